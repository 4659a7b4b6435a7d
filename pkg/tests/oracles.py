"""Brute-force reference implementations, written from the tuple-indexed definitions.

Nothing here uses the subset tables of the package; forms are unpacked by
walking permutations directly, so agreement is a genuine cross-check.
"""

import itertools
import math

import numpy as np


def parity(perm):
    perm = list(perm)
    sign = 1
    for i in range(len(perm)):
        while perm[i] != i:
            j = perm[i]
            perm[i], perm[j] = perm[j], perm[i]
            sign = -sign
    return sign


def full_tensor(form):
    """Unpack subset storage into a fully indexed (n,)*(p+q) array."""
    n, p, q = form.n, form.p, form.q
    out = np.zeros((n,) * (p + q))
    rows = list(itertools.combinations(range(n), p))
    cols = list(itertools.combinations(range(n), q))
    for i, I in enumerate(rows):
        for j, J in enumerate(cols):
            value = form.entries[i, j]
            for sp in itertools.permutations(range(p)):
                for sq in itertools.permutations(range(q)):
                    idx = tuple(I[a] for a in sp) + tuple(J[b] for b in sq)
                    out[idx] = parity(sp) * parity(sq) * value
    return out


def product(A, pa, qa, B, pb, qb):
    """(AB)(x;y) = sum over block shuffles of sign * A(x_I; y_J) B(x_I'; y_J'), from full tensors."""
    n = A.shape[0] if A.ndim else B.shape[0]
    p, q = pa + pb, qa + qb
    out = np.zeros((n,) * (p + q))
    norm = math.factorial(pa) * math.factorial(pb) * math.factorial(qa) * math.factorial(qb)
    for idx in itertools.product(range(n), repeat=p + q):
        xs, ys = idx[:p], idx[p:]
        if len(set(xs)) < p or len(set(ys)) < q:
            continue
        total = 0.0
        for sx in itertools.permutations(range(p)):
            for sy in itertools.permutations(range(q)):
                x = [xs[i] for i in sx]
                y = [ys[i] for i in sy]
                a = A[tuple(x[:pa]) + tuple(y[:qa])]
                b = B[tuple(x[pa:]) + tuple(y[qa:])]
                total += parity(sx) * parity(sy) * a * b
        out[idx] = total / norm
    return out


def contract(T, p, q):
    """(cT)(x;y) = sum_i T(e_i, x; e_i, y) on a full tensor of bidegree (p,q)."""
    n = T.shape[0]
    out = np.zeros((n,) * (p + q - 2))
    for i in range(n):
        index = (i,) + (slice(None),) * (p - 1) + (i,) + (slice(None),) * (q - 1)
        out = out + T[index]
    return out


def elementary_symmetric(values, k):
    return sum(math.prod(c) for c in itertools.combinations(values, k))


def bianchi_sum(T):
    """max over x,y,z,t of |T(x,y;z,t) + T(y,z;x,t) + T(z,x;y,t)|."""
    n = T.shape[0]
    worst = 0.0
    for x, y, z, t in itertools.product(range(n), repeat=4):
        worst = max(worst, abs(T[x, y, z, t] + T[y, z, x, t] + T[z, x, y, t]))
    return worst


def sectional_from_tensor(T, x, y):
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    area = np.dot(x, x) * np.dot(y, y) - np.dot(x, y) ** 2
    return np.einsum("abcd,a,b,c,d->", T, x, y, x, y) / area


def hodge_star(T, n, p, q):
    """(*T)(I^c; J^c) = sign(I, I^c) sign(J, J^c) T(I; J), walked over sorted tuples."""
    out = np.zeros((n,) * (2 * n - p - q))
    for I in itertools.combinations(range(n), p):
        Ic = tuple(i for i in range(n) if i not in I)
        si = parity(I + Ic)
        for J in itertools.combinations(range(n), q):
            Jc = tuple(j for j in range(n) if j not in J)
            sj = parity(J + Jc)
            value = si * sj * T[I + J]
            for a in itertools.permutations(range(n - p)):
                for b in itertools.permutations(range(n - q)):
                    idx = tuple(Ic[k] for k in a) + tuple(Jc[k] for k in b)
                    out[idx] = parity(a) * parity(b) * value
    return out
