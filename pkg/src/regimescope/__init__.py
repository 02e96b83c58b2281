"""Panel econometrics decision support.

Stationarity and cointegration testing, model selection, panel threshold
regression with bootstrap inference, and regime-dependent Granger causality,
exposed as a library, a CLI and an HTTP service.
"""

from .errors import RegimescopeError
from .panel import PanelDataset, load_csv

__version__ = "0.1.0"

__all__ = ["PanelDataset", "RegimescopeError", "load_csv", "__version__"]
