"""Double forms over an n-dimensional Euclidean space, orthonormal frame.

A (p,q) double form is stored as a dense matrix indexed by
(lexicographic p-subset, lexicographic q-subset) of ``{0..n-1}``.
Leading axes of ``entries`` are batch axes; every operation broadcasts
over them, which is how the chart module evaluates whole grids at once.
"""

from __future__ import annotations

import itertools
import math
from contextlib import contextmanager
from functools import lru_cache

import numpy as np

__all__ = [
    "DoubleForm", "SubsetIndexTable", "DoubleFormError", "DegreeError",
    "metric_form", "scalar_form", "from_bilinear", "from_tensor",
    "exterior_product", "contract", "hodge_star", "inner_product", "power",
    "first_bianchi_residual", "to_tensor", "tuple_value", "debug_corrupt_star",
    "MAX_DIM",
]

MAX_DIM = 12


class DoubleFormError(ValueError):
    pass


class DegreeError(DoubleFormError):
    pass


class SubsetIndexTable:
    """Rank/unrank between bitmasks and lexicographic positions of p-subsets."""

    def __init__(self, n: int, p: int):
        if not 0 <= p <= n:
            raise DegreeError(f"subset size {p} outside 0..{n}")
        self.n, self.p = n, p
        self.subsets = list(itertools.combinations(range(n), p))
        self.masks = [sum(1 << i for i in s) for s in self.subsets]
        self._rank = {m: i for i, m in enumerate(self.masks)}

    def __len__(self):
        return len(self.masks)

    def rank(self, mask: int) -> int:
        return self._rank[mask]

    def unrank(self, index: int) -> int:
        return self.masks[index]


def shuffle_sign(a_mask: int, b_mask: int) -> int:
    """Sign of the permutation sorting the concatenation (A, B) of two disjoint sets."""
    if a_mask & b_mask:
        raise ValueError("subsets overlap")
    inversions = 0
    a = a_mask
    while a:
        low = a & -a
        inversions += bin(b_mask & (low - 1)).count("1")
        a ^= low
    return -1 if inversions & 1 else 1


@lru_cache(maxsize=None)
def _table(n, p):
    return SubsetIndexTable(n, p)


@lru_cache(maxsize=None)
def _split_table(n, p, r):
    """For each (p+r)-subset K: ranks of every p-subset I of K, of K minus I, and the shuffle sign."""
    big, small, rest = _table(n, p + r), _table(n, p), _table(n, r)
    width = math.comb(p + r, p)
    first = np.zeros((len(big), width), dtype=np.intp)
    second = np.zeros((len(big), width), dtype=np.intp)
    sign = np.zeros((len(big), width))
    for row, subset in enumerate(big.subsets):
        kmask = big.masks[row]
        for col, part in enumerate(itertools.combinations(subset, p)):
            imask = sum(1 << i for i in part)
            first[row, col] = small.rank(imask)
            second[row, col] = rest.rank(kmask ^ imask)
            sign[row, col] = shuffle_sign(imask, kmask ^ imask)
    return first, second, sign


@lru_cache(maxsize=None)
def _contract_table(n, p):
    """Index of I plus {m} among p-subsets, for each (p-1)-subset I and each m; sign 0 if m in I."""
    low, high = _table(n, p - 1), _table(n, p)
    index = np.zeros((len(low), n), dtype=np.intp)
    sign = np.zeros((len(low), n))
    for row, imask in enumerate(low.masks):
        for m in range(n):
            if imask >> m & 1:
                continue
            index[row, m] = high.rank(imask | 1 << m)
            sign[row, m] = shuffle_sign(1 << m, imask)
    return index, sign


@lru_cache(maxsize=None)
def _star_table(n, p):
    src, dst = _table(n, p), _table(n, n - p)
    full = (1 << n) - 1
    target = np.array([dst.rank(full ^ m) for m in src.masks], dtype=np.intp)
    sign = np.array([shuffle_sign(m, full ^ m) for m in src.masks], dtype=float)
    return target, sign


@lru_cache(maxsize=None)
def _tuple_table(n, p):
    """Rank and sign for every p-tuple of basis indices (rank 0 and sign 0 on repeats)."""
    table = _table(n, p)
    index = np.zeros(n ** p, dtype=np.intp)
    sign = np.zeros(n ** p)
    for flat, tup in enumerate(itertools.product(range(n), repeat=p)):
        if len(set(tup)) < p:
            continue
        order = sorted(range(p), key=lambda i: tup[i])
        inversions = sum(1 for i in range(p) for j in range(i + 1, p) if order[i] > order[j])
        index[flat] = table.rank(sum(1 << i for i in tup))
        sign[flat] = -1.0 if inversions & 1 else 1.0
    return index, sign


_STAR_CORRUPT = False


@contextmanager
def debug_corrupt_star():
    """Negative control: flip the Hodge sign of every row subset that contains the first basis vector."""
    global _STAR_CORRUPT
    previous, _STAR_CORRUPT = _STAR_CORRUPT, True
    try:
        yield
    finally:
        _STAR_CORRUPT = previous


class DoubleForm:
    """A (p,q) double form on R^n in an orthonormal frame.

    ``entries`` has shape ``(..., C(n,p), C(n,q))``.  Forms are treated as
    immutable; arithmetic returns new forms.  ``*`` between forms is the
    exterior (Kulkarni-Nomizu) product, ``**`` an exterior power.
    """

    __slots__ = ("n", "p", "q", "entries")
    __array_priority__ = 100

    def __init__(self, n: int, p: int, q: int, entries):
        if not 1 <= n <= MAX_DIM:
            raise DoubleFormError(f"dimension {n} outside 1..{MAX_DIM}")
        if not (0 <= p <= n and 0 <= q <= n):
            raise DegreeError(f"bidegree ({p},{q}) invalid for n={n}")
        entries = np.asarray(entries, dtype=float)
        shape = (math.comb(n, p), math.comb(n, q))
        if entries.ndim < 2 or entries.shape[-2:] != shape:
            raise DoubleFormError(f"entries shape {entries.shape} does not end in {shape}")
        self.n, self.p, self.q = n, p, q
        self.entries = entries

    @property
    def bidegree(self):
        return (self.p, self.q)

    @property
    def batch_shape(self):
        return self.entries.shape[:-2]

    @property
    def scalar(self):
        """Value of a (0,0) form (float, or array over batch axes)."""
        if self.p or self.q:
            raise DegreeError("not a scalar form")
        return _as_scalar(self.entries[..., 0, 0])

    def matrix(self):
        """Entries of a (1,1) form as an n x n matrix."""
        if (self.p, self.q) != (1, 1):
            raise DegreeError("matrix() needs a (1,1) form")
        return self.entries

    def is_symmetric(self, tol: float = 1e-12) -> bool:
        if self.p != self.q:
            return False
        diff = self.entries - np.swapaxes(self.entries, -1, -2)
        return bool(np.max(np.abs(diff), initial=0.0) <= tol * max(1.0, np.max(np.abs(self.entries), initial=0.0)))

    def symmetrized(self) -> "DoubleForm":
        if self.p != self.q:
            raise DegreeError("only (p,p) forms can be symmetrized")
        return DoubleForm(self.n, self.p, self.q, 0.5 * (self.entries + np.swapaxes(self.entries, -1, -2)))

    def max_abs(self):
        return _as_scalar(np.max(np.abs(self.entries), axis=(-2, -1)))

    def _same_type(self, other):
        if not isinstance(other, DoubleForm):
            return NotImplemented
        if (self.n, self.p, self.q) != (other.n, other.p, other.q):
            raise DoubleFormError(
                f"type mismatch: ({self.p},{self.q}) on R^{self.n} vs ({other.p},{other.q}) on R^{other.n}")
        return other

    def __add__(self, other):
        if self._same_type(other) is NotImplemented:
            return NotImplemented
        return DoubleForm(self.n, self.p, self.q, self.entries + other.entries)

    def __sub__(self, other):
        if self._same_type(other) is NotImplemented:
            return NotImplemented
        return DoubleForm(self.n, self.p, self.q, self.entries - other.entries)

    def __neg__(self):
        return DoubleForm(self.n, self.p, self.q, -self.entries)

    def __mul__(self, other):
        if isinstance(other, DoubleForm):
            return exterior_product(self, other)
        return self.scaled(other)

    def __rmul__(self, other):
        return self.scaled(other)

    def __truediv__(self, other):
        return self.scaled(1.0 / np.asarray(other, dtype=float))

    def __pow__(self, k):
        return power(self, k)

    def scaled(self, factor) -> "DoubleForm":
        """Multiply by a scalar or by an array over the batch axes."""
        factor = np.asarray(factor, dtype=float)
        return DoubleForm(self.n, self.p, self.q, self.entries * factor[..., None, None])

    def __repr__(self):
        batch = f", batch={self.batch_shape}" if self.batch_shape else ""
        return f"DoubleForm(n={self.n}, ({self.p},{self.q}){batch})"


def _as_scalar(value):
    value = np.asarray(value)
    return float(value) if value.ndim == 0 else value


def scalar_form(n: int, value=1.0) -> DoubleForm:
    value = np.asarray(value, dtype=float)
    return DoubleForm(n, 0, 0, value[..., None, None])


def metric_form(n: int, r: int = 1) -> DoubleForm:
    """g^r as an (r,r) form: r! on the diagonal."""
    if not 0 <= r <= n:
        raise DegreeError(f"g^{r} does not exist in dimension {n}")
    return DoubleForm(n, r, r, math.factorial(r) * np.eye(math.comb(n, r)))


def from_bilinear(matrix) -> DoubleForm:
    """(1,1) form from an ``(..., n, n)`` matrix."""
    matrix = np.asarray(matrix, dtype=float)
    return DoubleForm(matrix.shape[-1], 1, 1, matrix)


def exterior_product(omega: DoubleForm, eta: DoubleForm) -> DoubleForm:
    if omega.n != eta.n:
        raise DoubleFormError(f"dimension mismatch {omega.n} vs {eta.n}")
    n = omega.n
    p, q, r, s = omega.p, omega.q, eta.p, eta.q
    if p + r > n or q + s > n:
        raise DegreeError(f"product degree ({p + r},{q + s}) exceeds n={n}")
    ki, kj, ks = _split_table(n, p, r)
    li, lj, ls = _split_table(n, q, s)
    w, e = omega.entries, eta.entries
    batch = np.broadcast_shapes(w.shape[:-2], e.shape[:-2])
    out = np.zeros(batch + (ki.shape[0], li.shape[0]))
    for a in range(ki.shape[1]):
        wa = w[..., ki[:, a], :][..., li]     # (..., K, L, b)
        ea = e[..., kj[:, a], :][..., lj]
        out += ks[:, a, None] * np.einsum("...klb,...klb,lb->...kl", wa, ea, ls)
    return DoubleForm(n, p + r, q + s, out)


def power(omega: DoubleForm, k: int) -> DoubleForm:
    if k < 0:
        raise DegreeError("negative power")
    if k * omega.p > omega.n or k * omega.q > omega.n:
        raise DegreeError(f"power {k} of a ({omega.p},{omega.q}) form exceeds n={omega.n}")
    result = scalar_form(omega.n, np.ones(omega.batch_shape))
    for _ in range(k):
        result = exterior_product(result, omega)
    return result


def contract(omega: DoubleForm, r: int = 1) -> DoubleForm:
    """Apply the contraction c ``r`` times."""
    if r < 0 or r > min(omega.p, omega.q):
        raise DegreeError(f"cannot contract a ({omega.p},{omega.q}) form {r} times")
    n, entries = omega.n, omega.entries
    p, q = omega.p, omega.q
    for _ in range(r):
        ui, us = _contract_table(n, p)
        vi, vs = _contract_table(n, q)
        gathered = entries[..., ui[:, None, :], vi[None, :, :]]
        entries = np.einsum("...abm,am,bm->...ab", gathered, us, vs)
        p, q = p - 1, q - 1
    return DoubleForm(n, p, q, entries)


def hodge_star(omega: DoubleForm) -> DoubleForm:
    """Generalized Hodge star: the Lambda-star applied to each argument block."""
    n, p, q = omega.n, omega.p, omega.q
    rows, rsign = _star_table(n, p)
    cols, csign = _star_table(n, q)
    if _STAR_CORRUPT:
        rsign = rsign * np.array([-1.0 if m & 1 else 1.0 for m in _table(n, p).masks])
    signed = omega.entries * rsign[:, None] * csign[None, :]
    out = np.empty_like(signed)
    out[..., rows[:, None], cols[None, :]] = signed
    return DoubleForm(n, n - p, n - q, out)


def inner_product(omega: DoubleForm, eta: DoubleForm):
    """Sum over subset pairs of entry products (one term per pair of subsets)."""
    if (omega.n, omega.p, omega.q) != (eta.n, eta.p, eta.q):
        raise DoubleFormError("inner product needs forms of the same type")
    return _as_scalar(np.sum(omega.entries * eta.entries, axis=(-2, -1)))


def to_tensor(omega: DoubleForm) -> np.ndarray:
    """Fully indexed values ``T[x1..xp, y1..yq]`` reconstructed from subset storage.

    Meant for oracles and checks; size grows like n^(p+q).
    """
    n, p, q = omega.n, omega.p, omega.q
    pi, ps = _tuple_table(n, p)
    qi, qs = _tuple_table(n, q)
    flat = omega.entries[..., pi[:, None], qi[None, :]] * ps[:, None] * qs[None, :]
    return flat.reshape(omega.batch_shape + (n,) * (p + q))


def tuple_value(omega: DoubleForm, xs, ys) -> float:
    """omega(e_x1, ..., e_xp; e_y1, ..., e_yq) for basis index tuples."""
    def locate(tup, size):
        if len(tup) != size:
            raise DegreeError("tuple length does not match bidegree")
        if len(set(tup)) < size:
            return 0, 0.0
        order = sorted(range(size), key=lambda i: tup[i])
        inv = sum(1 for i in range(size) for j in range(i + 1, size) if order[i] > order[j])
        return _table(omega.n, size).rank(sum(1 << i for i in tup)), (-1.0) ** inv
    i, si = locate(tuple(xs), omega.p)
    j, sj = locate(tuple(ys), omega.q)
    return _as_scalar(si * sj * omega.entries[..., i, j])


def from_tensor(tensor, p: int, q: int) -> DoubleForm:
    """Pack a fully indexed tensor (antisymmetric in each block) into subset storage."""
    tensor = np.asarray(tensor, dtype=float)
    n = tensor.shape[-1]
    batch = tensor.shape[:tensor.ndim - p - q]
    flat = tensor.reshape(batch + (n ** p, n ** q))
    rows = np.array([np.ravel_multi_index(s, (n,) * p) if p else 0 for s in _table(n, p).subsets], dtype=np.intp)
    cols = np.array([np.ravel_multi_index(s, (n,) * q) if q else 0 for s in _table(n, q).subsets], dtype=np.intp)
    return DoubleForm(n, p, q, flat[..., rows[:, None], cols[None, :]])


def first_bianchi_residual(omega: DoubleForm):
    """max |w(x,y;z,t) + w(y,z;x,t) + w(z,x;y,t)| over basis tuples, for a (2,2) form."""
    if (omega.p, omega.q) != (2, 2):
        raise DegreeError("first Bianchi sum is defined here for (2,2) forms")
    if omega.n < 3:
        return _as_scalar(np.zeros(omega.batch_shape))
    t = to_tensor(omega)
    cyc = t + np.einsum("...yzxw->...xyzw", t) + np.einsum("...zxyw->...xyzw", t)
    return _as_scalar(np.max(np.abs(cyc), axis=(-4, -3, -2, -1)))
