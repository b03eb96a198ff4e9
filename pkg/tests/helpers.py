"""Shared test helpers: small graphs, slabs and SPD matrices, plus config patching."""

import os
import sys
from contextlib import contextmanager
from unittest import mock

_LAB_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "Lab")
if _LAB_DIR not in sys.path:
    sys.path.insert(0, _LAB_DIR)

import numpy as np  # noqa: E402  (path set above)

from lattice import LatticeGraph, PrecisionOperator  # noqa: E402
from numerics import RngStream  # noqa: E402
from segal import CylinderSlab  # noqa: E402

SEED = 1234


def make_torus(n1=8, n2=8, spacing=1.0, mass=1.0) -> PrecisionOperator:
    return PrecisionOperator(LatticeGraph.torus(n1, n2, spacing), mass)


def make_cycle(n=8, spacing=1.0, mass=1.0) -> PrecisionOperator:
    return PrecisionOperator(LatticeGraph.cycle(n, spacing), mass)


def make_slab(n_transverse=2, n_layers=0, spacing=1.0, mass=1.0, interaction=None) -> CylinderSlab:
    return CylinderSlab(n_transverse, n_layers, spacing, mass, interaction)


def random_spd(n, seed=SEED, shift=1.0) -> np.ndarray:
    """A well-conditioned random SPD matrix: A A^T / n + shift I."""
    a = RngStream(seed).generator().standard_normal((n, n))
    return a @ a.T / n + shift * np.eye(n)


def rng(stream_id=0) -> RngStream:
    return RngStream(SEED, stream_id)


@contextmanager
def patch_config(**overrides):
    """Temporarily override attributes on the ``config`` module.

    Usage:
        with patch_config(SEGAL_ORDER=8, MC_BATCH=1000):
            ...
    Values are restored automatically on exit.
    """
    import config

    with mock.patch.multiple(config, **overrides):
        yield
