"""Test package.

Lab modules live in ``Lab/`` and use absolute imports (``import config``).
Put that directory on ``sys.path`` when the test package is imported so test
modules can import them directly.
"""

import os
import sys

_LAB_DIR = os.path.join(os.path.dirname(os.path.dirname(__file__)), "Lab")
if _LAB_DIR not in sys.path:
    sys.path.insert(0, _LAB_DIR)
