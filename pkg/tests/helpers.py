"""Independent oracles and hypothesis strategies shared by the test modules.

The oracles use dense numpy arrays and plain loops only; none of them call into
the sparse code paths they are compared against.
"""

import math

import numpy as np
from hypothesis import strategies as st

from mcdiffusion import RatingsDataset


def dense_diffusion(d: RatingsDataset) -> np.ndarray:
    """S = A diag(1/k(c)) A^T diag(1/k(v)) on the full (unpruned) user x channel matrix."""
    R = d.scale_max
    A = np.zeros((d.num_users, d.num_items * R))
    for u, i, r in d.triples:
        A[u, i * R + r - 1] = 1.0
    kc = A.sum(axis=0)
    kv = A.sum(axis=1)
    inv_kc = np.divide(1.0, kc, out=np.zeros_like(kc), where=kc > 0)
    inv_kv = np.divide(1.0, kv, out=np.zeros_like(kv), where=kv > 0)
    return A @ np.diag(inv_kc) @ A.T @ np.diag(inv_kv)


def two_step_diffusion(d: RatingsDataset) -> np.ndarray:
    """Literal two-step resource spreading with dict bookkeeping."""
    R = d.scale_max
    user_ch = {}
    ch_users = {}
    for u, i, r in d.triples:
        user_ch.setdefault(u, set()).add((i, r))
        ch_users.setdefault((i, r), set()).add(u)
    S = np.zeros((d.num_users, d.num_users))
    for v, chans in user_ch.items():
        resource = {c: 1.0 / len(chans) for c in chans}
        for c, amount in resource.items():
            for u in ch_users[c]:
                S[u, v] += amount / len(ch_users[c])
    return S


def naive_pearson(d: RatingsDataset, mean="common", min_common=2) -> np.ndarray:
    """Two-pass Pearson per pair over the co-rated items."""
    ratings = {}
    for u, i, r in d.triples:
        ratings.setdefault(u, {})[i] = r
    global_means = {u: sum(x.values()) / len(x) for u, x in ratings.items()}
    m = d.num_users
    S = np.zeros((m, m))
    for u in ratings:
        for v in ratings:
            common = sorted(set(ratings[u]) & set(ratings[v]))
            if len(common) < min_common:
                continue
            x = [ratings[u][a] for a in common]
            y = [ratings[v][a] for a in common]
            if mean == "common":
                mx, my = sum(x) / len(x), sum(y) / len(y)
            else:
                mx, my = global_means[u], global_means[v]
            dx = [a - mx for a in x]
            dy = [b - my for b in y]
            vx = sum(a * a for a in dx)
            vy = sum(b * b for b in dy)
            if vx <= 1e-12 or vy <= 1e-12:
                continue
            S[u, v] = sum(a * b for a, b in zip(dx, dy)) / math.sqrt(vx * vy)
    return S


def naive_prediction(u, a, d: RatingsDataset, S: np.ndarray, kappa="signed"):
    """Mean-centred CF prediction with plain loops; returns (value or None, neighbours)."""
    mine = [r for (uu, _, r) in d.triples if uu == u]
    all_r = [r for (_, _, r) in d.triples]
    mean_u = sum(mine) / len(mine) if mine else sum(all_r) / len(all_r)
    num = den = 0.0
    count = 0
    for v in range(d.num_users):
        if v == u or S[u, v] == 0:
            continue
        r_va = [r for (vv, ii, r) in d.triples if vv == v and ii == a]
        if not r_va:
            continue
        rv = [r for (vv, _, r) in d.triples if vv == v]
        num += S[u, v] * (r_va[0] - sum(rv) / len(rv))
        den += S[u, v] if kappa == "signed" else abs(S[u, v])
        count += 1
    if count == 0 or abs(den) < 1e-12:
        return mean_u, 0
    return mean_u + num / den, count


def random_dataset(rng: np.random.Generator, max_m=30, max_n=30, scale_max=5, density=None):
    m = int(rng.integers(1, max_m + 1))
    n = int(rng.integers(1, max_n + 1))
    dens = rng.uniform(0.05, 0.8) if density is None else density
    cells = np.flatnonzero(rng.random(m * n) < dens)
    if len(cells) == 0:
        cells = np.array([int(rng.integers(m * n))])
    users, items = np.divmod(cells, n)
    ratings = rng.integers(1, scale_max + 1, len(cells))
    return RatingsDataset(m, n, scale_max, users, items, ratings)


@st.composite
def datasets(draw, max_m=8, max_n=8, scale_max=5, min_triples=1):
    m = draw(st.integers(1, max_m))
    n = draw(st.integers(1, max_n))
    cells = draw(
        st.lists(st.integers(0, m * n - 1), min_size=min(min_triples, m * n), max_size=m * n, unique=True)
    )
    ratings = draw(st.lists(st.integers(1, scale_max), min_size=len(cells), max_size=len(cells)))
    users, items = np.divmod(np.asarray(cells, dtype=np.int64), n)
    return RatingsDataset(m, n, scale_max, users, items, ratings)
