"""Log-bilinear odds-ratio association models for contingency tables.

Thin re-export of the compiled extension; see the individual docstrings on
the functions and classes for usage.
"""

from ._lbor import *  # noqa: F401,F403
from ._lbor import __doc__  # noqa: F401
