"""Set partitions and the moment/cumulant conversion they drive.

Partitions of {1..r} are enumerated as restricted-growth strings in
lexicographic order, which fixes a deterministic canonical ordering.  The
conversion between the moment tensors mu_1..mu_r and cumulant tensors
kappa_1..kappa_r is the exact combinatorial sum over partitions:

    mu_r[i]    = sum over partitions pi of prod_{B in pi} kappa_{|B|}[i_B]
    kappa_r[i] = sum over pi of (-1)^(|pi|-1) (|pi|-1)! prod_B mu_{|B|}[i_B]

where i_B is the sub-tuple of i at the positions in block B.
"""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np

from .tensor import MAX_ORDER, SymmetricTensor, canonical_indices

__all__ = ["SetPartition", "enumerate_partitions", "moments_to_cumulants", "cumulants_to_moments"]

# Blocks ordered by minimum element, elements ascending inside a block.
SetPartition = tuple[tuple[int, ...], ...]


def _rgs_strings(r: int):
    """Restricted-growth strings of length r in lexicographic order."""
    a = [0] * r
    while True:
        yield tuple(a)
        for i in range(r - 1, 0, -1):
            if a[i] <= max(a[:i]):
                a[i] += 1
                for j in range(i + 1, r):
                    a[j] = 0
                break
        else:
            return


@lru_cache(maxsize=None)
def enumerate_partitions(r: int) -> tuple[SetPartition, ...]:
    """All set partitions of {1..r}, canonically ordered, B_r of them."""
    if not 1 <= r <= MAX_ORDER:
        raise ValueError(f"r must be in 1..{MAX_ORDER}, got {r}")
    result = []
    for rgs in _rgs_strings(r):
        nblocks = max(rgs) + 1
        blocks: list[list[int]] = [[] for _ in range(nblocks)]
        for pos, b in enumerate(rgs, start=1):
            blocks[b].append(pos)
        result.append(tuple(tuple(b) for b in blocks))
    return tuple(result)


def _check_sequence(tensors: list[SymmetricTensor], what: str) -> tuple[int, int]:
    if not tensors:
        raise ValueError(f"empty {what} sequence")
    r = len(tensors)
    if r > MAX_ORDER:
        raise ValueError(f"sequence length {r} exceeds cap {MAX_ORDER}")
    dim = tensors[0].dim
    for k, t in enumerate(tensors, start=1):
        if t.order != k:
            raise ValueError(f"{what}[{k - 1}] has order {t.order}, expected {k}")
        if t.dim != dim:
            raise ValueError(f"{what}[{k - 1}] has dim {t.dim}, expected {dim}")
    return r, dim


def _convert(tensors: list[SymmetricTensor], weight) -> list[SymmetricTensor]:
    r, dim = _check_sequence(tensors, "tensor")
    out = []
    for k in range(1, r + 1):
        idxs = canonical_indices(dim, k)
        vals = np.empty(len(idxs))
        parts = enumerate_partitions(k)
        for rank, idx in enumerate(idxs):
            acc = 0.0
            for part in parts:
                term = weight(len(part))
                for block in part:
                    sub = tuple(sorted(idx[p - 1] for p in block))
                    term *= tensors[len(sub) - 1].lookup(sub)
                acc += term
            vals[rank] = acc
        out.append(SymmetricTensor(k, dim, vals))
    return out


def moments_to_cumulants(moments: list[SymmetricTensor]) -> list[SymmetricTensor]:
    """Cumulant tensors kappa_1..kappa_r from moment tensors mu_1..mu_r."""
    return _convert(moments, lambda m: (-1) ** (m - 1) * math.factorial(m - 1))


def cumulants_to_moments(cumulants: list[SymmetricTensor]) -> list[SymmetricTensor]:
    """Moment tensors mu_1..mu_r from cumulant tensors kappa_1..kappa_r."""
    return _convert(cumulants, lambda m: 1.0)
