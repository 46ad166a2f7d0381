"""Anomalous diffusion toolkit: stable laws, random walks, fractional
operators, fractional advection-dispersion solvers and fractional rheology.

Hot loops are numba kernels with pure-numpy fallbacks; set
``ANOMALY_DISABLE_NUMBA=1`` to force the numpy path.
"""

from .grids import Grid1D, TimeGrid
from .stable import StableParams
from .special import MLParams, mittag_leffler, ml1, mwright

__all__ = ["Grid1D", "TimeGrid", "StableParams", "MLParams", "mittag_leffler", "ml1", "mwright"]
__version__ = "0.1.0"
