"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy fallback.
Set ``LOCALCOND_KERNELS=python`` to force the fallback.
"""

import os

import numpy as np

from . import _fallback as python

compiled = None
if os.environ.get("LOCALCOND_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels as compiled
    except ImportError:
        compiled = None

_impl = compiled if compiled is not None else python
BACKEND = "compiled" if compiled is not None else "python"


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def propagate(psi, fused):
    """``psi @ fused`` with a fixed left-to-right summation order per entry."""
    return _impl.propagate(_f64(psi), _f64(fused))


def sum_groups(values, groups):
    """``out[:, j] = sum_g values[:, groups[g, j]]``, accumulated in g order."""
    return _impl.sum_groups(_f64(values), _i64(groups))


def digit_permutation(n_digits, radix, perm):
    """Map each source column index to its index after permuting digits."""
    return _impl.digit_permutation(int(n_digits), int(radix), _i64(perm))


def enumerate_beliefs(phi, edge_u, edge_v, psi):
    """Unnormalized beliefs of every node by summing over all configurations."""
    return _impl.enumerate_beliefs(_f64(phi), _i64(edge_u), _i64(edge_v), _f64(psi))

__all__ = [
    "BACKEND",
    "compiled",
    "python",
    "propagate",
    "sum_groups",
    "digit_permutation",
    "enumerate_beliefs",
]
