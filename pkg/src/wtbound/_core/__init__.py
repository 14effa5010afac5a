"""Hot loop of the Monte Carlo simulator.

The compiled extension is used when it was built; otherwise, or when
``WTBOUND_PURE_PYTHON`` is set, the NumPy version is selected.
"""

import os

from ._tandem_py import propagate as propagate_python

try:
    from ._tandem import propagate as propagate_compiled
except ImportError:  # extension not built
    propagate_compiled = None

if propagate_compiled is not None and not os.environ.get("WTBOUND_PURE_PYTHON"):
    propagate = propagate_compiled
    BACKEND = "cython"
else:
    propagate = propagate_python
    BACKEND = "python"

__all__ = ["propagate", "propagate_python", "propagate_compiled", "BACKEND"]
