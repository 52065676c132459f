"""User-based CF prediction from a similarity matrix.

    r'[u, a] = mean[u] + kappa * sum_v s[u, v] * (r[v, a] - mean[v])

``v`` runs over the training voters of item ``a`` (other than ``u``) with a
nonzero ``s[u, v]``. With ``kappa="signed"`` the normalization is
``1 / sum_v s[u, v]`` exactly as written; ``kappa="absolute"`` uses
``1 / sum_v |s[u, v]|`` (Resnick). The two coincide for diffusion similarity,
which is never negative. Signed normalization can blow up when correlations of
both signs nearly cancel, so it is meant to be used with clamping.
"""

from __future__ import annotations

import csv
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .ratings import RatingsDataset, Split, UserMeans, compute_user_means
from .similarity import SimilarityMatrix

NONE, USER_MEAN, GLOBAL_MEAN = "none", "user_mean", "global_mean"
FALLBACKS = (NONE, USER_MEAN, GLOBAL_MEAN)
EMPTY_WEIGHT = 1e-12


@dataclass(frozen=True)
class PredictorOptions:
    kappa: str = "signed"
    clamp: bool = True
    top_k: int | None = None

    def __post_init__(self):
        if self.kappa not in ("signed", "absolute"):
            raise ValueError(f"kappa must be 'signed' or 'absolute', got {self.kappa!r}")
        if self.top_k is not None and self.top_k < 1:
            raise ValueError("top_k must be positive")


@dataclass(frozen=True)
class Prediction:
    user_id: int
    item_id: int
    value: float
    kappa: float
    neighbor_count: int
    fallback: str = NONE


def _finish(u_mean, num, den, count, opts, lo, hi, cold):
    """Shared tail of the scalar and batch paths (works elementwise on arrays)."""
    weighted = (count > 0) & (np.abs(den) >= EMPTY_WEIGHT)
    safe = np.where(weighted, den, 1.0)
    value = np.where(weighted, u_mean + num / safe, u_mean)
    if opts.clamp:
        value = np.clip(value, lo, hi)
    kappa = np.where(weighted, 1.0 / safe, 0.0)
    code = np.where(weighted, 0, np.where(cold, 2, 1))
    count = np.where(weighted, count, 0)
    return value, kappa, count, code


def predict(
    u: int,
    a: int,
    train: RatingsDataset,
    means: UserMeans,
    S: SimilarityMatrix,
    options: PredictorOptions = PredictorOptions(),
) -> Prediction:
    """Predict the rating of user ``u`` on item ``a``; falls back to means, never fails."""
    cold = u >= train.num_users or u not in means.per_user
    u_mean = means.global_mean if cold else means.per_user[u]
    num = den = 0.0
    count = 0
    if not cold and a < train.num_items:
        voters, vr = train.item_ratings(a)
        order = np.argsort(voters, kind="stable")
        voters, vr = voters[order], vr[order]
        row = S.rows[u]
        s = np.zeros(len(voters))
        if len(row.indices):
            pos = np.minimum(np.searchsorted(row.indices, voters), len(row.indices) - 1)
            found = row.indices[pos] == voters
            s[found] = row.data[pos[found]]
        s[voters == u] = 0.0
        keep = s != 0
        voters, vr, s = voters[keep], vr[keep], s[keep]
        if options.top_k is not None and len(s) > options.top_k:
            top = np.sort(np.argsort(-np.abs(s), kind="stable")[: options.top_k])
            voters, vr, s = voters[top], vr[top], s[top]
        dev = vr - means.values[voters]
        # ascending voter order
        for sv, d in zip(s.tolist(), dev.tolist()):
            num += sv * d
            den += sv if options.kappa == "signed" else abs(sv)
        count = len(s)
    value, kappa, count, code = _finish(
        u_mean, np.float64(num), np.float64(den), np.int64(count), options, 1, train.scale_max, cold
    )
    return Prediction(int(u), int(a), float(value), float(kappa), int(count), FALLBACKS[int(code)])


class ProbePredictions(Sequence):
    """Column store of predictions aligned with a probe; indexes to ``Prediction``."""

    def __init__(self, users, items, truth, value, kappa, neighbor_count, fallback):
        self.users = users
        self.items = items
        self.truth = truth
        self.value = value
        self.kappa = kappa
        self.neighbor_count = neighbor_count
        self.fallback = fallback

    def __len__(self):
        return len(self.value)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return [self[j] for j in range(*k.indices(len(self)))]
        return Prediction(
            int(self.users[k]),
            int(self.items[k]),
            float(self.value[k]),
            float(self.kappa[k]),
            int(self.neighbor_count[k]),
            FALLBACKS[int(self.fallback[k])],
        )

    def fallback_counts(self) -> dict[str, int]:
        counts = np.bincount(self.fallback, minlength=3)
        return dict(zip(FALLBACKS, counts.tolist()))

    @property
    def fallback_fraction(self) -> float:
        return float(np.count_nonzero(self.fallback)) / len(self) if len(self) else 0.0

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "item", "true", "predicted", "fallback"])
            for k in range(len(self)):
                w.writerow(
                    [
                        int(self.users[k]),
                        int(self.items[k]),
                        int(self.truth[k]),
                        repr(float(self.value[k])),
                        FALLBACKS[int(self.fallback[k])],
                    ]
                )


def _weights(S: SimilarityMatrix, kappa: str) -> tuple[sparse.csr_matrix, sparse.csr_matrix]:
    rows = S.rows.copy()
    rows.setdiag(0.0)
    rows.eliminate_zeros()
    rows.sort_indices()
    w = abs(rows) if kappa == "absolute" else rows
    return rows, w


def predict_probe(
    split: Split,
    S: SimilarityMatrix,
    means: UserMeans | None = None,
    options: PredictorOptions = PredictorOptions(),
    block_cells: int = 4_000_000,
) -> ProbePredictions:
    """One prediction per probe triple, in probe order.

    Neighbourhood sums for all probe pairs come from sparse products of the
    similarity rows with the training deviation and voter-indicator matrices,
    processed in blocks of probe users.
    """
    train = split.train
    if means is None:
        means = compute_user_means(train)
    pu, pa = split.probe_users, split.probe_items
    n_probe = len(pu)
    if options.top_k is not None:
        preds = [predict(int(u), int(a), train, means, S, options) for u, a in zip(pu, pa)]
        return ProbePredictions(
            pu,
            pa,
            split.probe_ratings,
            np.array([p.value for p in preds], dtype=np.float64),
            np.array([p.kappa for p in preds], dtype=np.float64),
            np.array([p.neighbor_count for p in preds], dtype=np.int64),
            np.array([FALLBACKS.index(p.fallback) for p in preds], dtype=np.int64),
        )

    m, n = train.num_users, train.num_items
    shape = (m, n)
    B = sparse.csr_matrix((np.ones(len(train)), (train.users, train.items)), shape=shape)
    D = sparse.csr_matrix(
        (train.ratings - means.values[train.users], (train.users, train.items)), shape=shape
    )
    rows, w = _weights(S, options.kappa)
    nz = rows.copy()
    nz.data = np.ones_like(nz.data)

    num = np.zeros(n_probe)
    den = np.zeros(n_probe)
    count = np.zeros(n_probe, dtype=np.int64)
    order = np.argsort(pu, kind="stable")
    users = np.unique(pu)
    step = max(1, block_cells // max(n, 1))
    for lo in range(0, len(users), step):
        blk = users[lo : lo + step]
        sel = order[np.searchsorted(pu[order], blk[0]) : np.searchsorted(pu[order], blk[-1], "right")]
        local = np.searchsorted(blk, pu[sel])
        cols = pa[sel]
        num[sel] = (rows[blk] @ D).toarray()[local, cols]
        den[sel] = (w[blk] @ B).toarray()[local, cols]
        count[sel] = np.rint((nz[blk] @ B).toarray()[local, cols]).astype(np.int64)

    cold = np.isin(pu, np.fromiter(means.per_user, dtype=np.int64), invert=True)
    u_mean = means.values[pu]
    value, kappa, count, code = _finish(u_mean, num, den, count, options, 1, train.scale_max, cold)
    return ProbePredictions(pu, pa, split.probe_ratings, value, kappa, count, code)
