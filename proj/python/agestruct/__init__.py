"""Age-structured population model solvers with monotonicity and comparison tooling."""

try:
    from ._core import *  # noqa: F401,F403
except ImportError:  # in-tree builds place _core next to this package
    from _core import *  # type: ignore # noqa: F401,F403

__version__ = "0.1.0"
