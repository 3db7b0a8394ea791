"""Pure numpy versions of the compiled kernels.

Operation order matches ``_ckernels`` exactly for ``propagate``, ``sum_groups``
and ``digit_permutation``.
"""

import numpy as np

_CHUNK = 1 << 16


def propagate(psi, fused):
    psi = np.asarray(psi, dtype=np.float64)
    fused = np.asarray(fused, dtype=np.float64)
    if fused.shape[0] != psi.shape[1]:
        raise ValueError("shape mismatch in propagate")
    out = psi[:, 0:1] * fused[0:1, :]
    for k in range(1, psi.shape[1]):
        out = out + psi[:, k:k + 1] * fused[k:k + 1, :]
    return np.ascontiguousarray(out)


def sum_groups(values, groups):
    values = np.asarray(values, dtype=np.float64)
    groups = np.asarray(groups, dtype=np.int64)
    out = values[:, groups[0]]
    for g in range(1, groups.shape[0]):
        out = out + values[:, groups[g]]
    return np.ascontiguousarray(out)


def digit_permutation(n_digits, radix, perm):
    perm = np.asarray(perm, dtype=np.int64)
    total = radix ** n_digits
    if n_digits == 0:
        return np.zeros(1, dtype=np.int64)
    idx = np.arange(total, dtype=np.int64)
    weights = radix ** np.arange(n_digits - 1, -1, -1, dtype=np.int64)
    digits = (idx[:, None] // weights[None, :]) % radix
    return digits[:, perm] @ weights


def enumerate_beliefs(phi, edge_u, edge_v, psi):
    phi = np.asarray(phi, dtype=np.float64)
    nv, radix = phi.shape
    out = np.zeros((nv, radix), dtype=np.float64)
    if nv == 0:
        return out
    total = radix ** nv
    weights = radix ** np.arange(nv - 1, -1, -1, dtype=np.int64)
    rows = np.arange(nv)
    for start in range(0, total, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        x = (idx[:, None] // weights[None, :]) % radix
        w = np.prod(phi[rows[None, :], x], axis=1)
        for e in range(len(edge_u)):
            w = w * psi[e, x[:, edge_u[e]], x[:, edge_v[e]]]
        for v in range(nv):
            out[v] += np.bincount(x[:, v], weights=w, minlength=radix)
    return out
