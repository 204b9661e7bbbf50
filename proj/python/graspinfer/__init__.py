"""Likelihood-free geodesic HMC, neural ratio estimation and Riemannian MAP
search over hand-configuration manifolds R^n x S^d."""

from graspinfer._core import *  # noqa: F401,F403
from graspinfer._core import __doc__ as _core_doc

__all__ = [name for name in dir() if not name.startswith("_")]
