"""User-user similarity: multi-channel resource diffusion and Pearson correlation.

Diffusion similarity ``s[u, v]`` is the share of one unit of resource, started on
user ``v``, that reaches user ``u`` after spreading evenly ``v -> channels`` and
then evenly ``channel -> users``. Each column sums to one; the matrix is not
symmetric. Matrices are stored column-major so column ``v`` is the output of
a diffusion started at ``v``.
"""

from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

from .channels import ChannelGraph, build_channel_graph
from .ratings import RatingsDataset

DIFFUSION = "diffusion"
PEARSON = "pearson"
METHODS = (DIFFUSION, PEARSON)


@dataclass(frozen=True, eq=False)
class SimilarityMatrix:
    method: str
    num_users: int
    matrix: sparse.csc_matrix
    symmetric: bool

    def column(self, v: int) -> tuple[np.ndarray, np.ndarray]:
        """(users, scores) of the column for source user ``v``."""
        lo, hi = self.matrix.indptr[v], self.matrix.indptr[v + 1]
        return self.matrix.indices[lo:hi], self.matrix.data[lo:hi]

    def __getitem__(self, uv: tuple[int, int]) -> float:
        u, v = uv
        users, scores = self.column(v)
        k = np.searchsorted(users, u)
        if k < len(users) and users[k] == u:
            return float(scores[k])
        return 0.0

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()

    @cached_property
    def rows(self) -> sparse.csr_matrix:
        """Row-major copy: row ``u`` holds ``s[u, v]`` over all ``v``."""
        out = self.matrix.tocsr()
        out.sort_indices()
        return out

    def column_sums(self) -> np.ndarray:
        return np.asarray(self.matrix.sum(axis=0)).ravel()

    def entries(self, sources=None):
        """Yield ``(u, v, score)`` sorted by ``(v, u)``."""
        for v in range(self.num_users) if sources is None else sources:
            users, scores = self.column(v)
            for u, s in zip(users.tolist(), scores.tolist()):
                yield u, v, s

    def write_csv(self, path, sources=None) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["u", "v", "score"])
            for u, v, s in self.entries(sources):
                w.writerow([u, v, repr(s)])


def _assemble(columns, m: int) -> sparse.csc_matrix:
    lengths = [len(c[0]) for c in columns]
    indptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(lengths, out=indptr[1:])
    if columns:
        indices = np.concatenate([c[0] for c in columns]).astype(np.int64)
        data = np.concatenate([c[1] for c in columns]).astype(np.float64)
    else:
        indices, data = np.zeros(0, np.int64), np.zeros(0)
    return sparse.csc_matrix((data, indices, indptr), shape=(m, m))


def _chunked(fn, m: int, threads: int, chunk: int = 64):
    """Apply ``fn(range)`` over user chunks; results are concatenated in user order."""
    spans = [range(lo, min(lo + chunk, m)) for lo in range(0, m, chunk)]
    if threads <= 1 or len(spans) <= 1:
        parts = [fn(s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(fn, spans))
    return [col for part in parts for col in part]


@dataclass(frozen=True)
class ResourceVector:
    """Resource held by each channel after the first diffusion step from one user."""

    source: int
    channels: np.ndarray
    amounts: np.ndarray

    @property
    def per_channel(self) -> dict[int, float]:
        return dict(zip(self.channels.tolist(), self.amounts.tolist()))

    def total(self) -> float:
        return float(self.amounts.sum())


def diffuse_from_user(g: ChannelGraph, v: int) -> ResourceVector:
    """User ``v`` splits one unit of resource evenly over its ``k(v)`` channels."""
    chans = g.channels_of(v)
    k = len(chans)
    amounts = np.full(k, 1.0 / k) if k else np.zeros(0)
    return ResourceVector(v, chans.copy(), amounts)


def _gather(indptr: np.ndarray, rows: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Flat CSR positions of the listed rows, plus the row length repeated per position."""
    starts = indptr[rows]
    lens = indptr[rows + 1] - starts
    total = int(lens.sum())
    offsets = np.repeat(starts - (np.cumsum(lens) - lens), lens)
    return np.arange(total) + offsets, lens


def diffusion_similarity_column(g: ChannelGraph, v: int) -> tuple[np.ndarray, np.ndarray]:
    """Column ``s[:, v]`` as sorted (users, scores); empty for an isolated ``v``.

    ``s[u, v] = 1/k(v) * sum_c a[u, c] a[v, c] / k(c)``
    """
    resource = diffuse_from_user(g, v)
    if len(resource.channels) == 0:
        return np.zeros(0, np.int64), np.zeros(0)
    pos, lens = _gather(g.channel_indptr, resource.channels)
    # second step: channel c hands R_cv / k(c) to each of its users
    share = np.repeat(resource.amounts / g.channel_degree[resource.channels], lens)
    acc = np.bincount(g.channel_users[pos], weights=share, minlength=g.num_users)
    users = np.flatnonzero(acc)
    return users, acc[users]


def diffusion_similarity(g: ChannelGraph, threads: int = 1) -> SimilarityMatrix:
    def work(span):
        return [diffusion_similarity_column(g, v) for v in span]

    columns = _chunked(work, g.num_users, threads)
    return SimilarityMatrix(DIFFUSION, g.num_users, _assemble(columns, g.num_users), False)


def _rating_matrices(train: RatingsDataset):
    shape = (train.num_users, train.num_items)
    B = sparse.csr_matrix(
        (np.ones(len(train)), (train.users, train.items)), shape=shape, dtype=np.float64
    )
    R = sparse.csr_matrix(
        (train.ratings.astype(np.float64), (train.users, train.items)), shape=shape
    )
    B.sort_indices()
    R.sort_indices()
    return B, R


def pearson_similarity(
    train: RatingsDataset,
    mean: str = "common",
    min_common: int = 2,
    threads: int = 1,
    block: int | None = None,
) -> SimilarityMatrix:
    """Pearson correlation over co-rated items.

    ``mean="common"`` centres each user on the items the pair has in common (the
    default); ``mean="global"`` centres on the user's mean over all training
    ratings. Pairs with fewer than ``min_common`` co-rated items, or zero variance
    on them, score 0. Diagonal entries are stored like any other pair.

    Co-rating sums for all pairs come from sparse products of the rating and
    indicator matrices, one block of rows at a time. In ``common`` mode every
    quantity is an integer so the result is exact and symmetric by construction.
    """
    if mean not in ("common", "global"):
        raise ValueError(f"mean must be 'common' or 'global', got {mean!r}")
    m = train.num_users
    B, R = _rating_matrices(train)
    Bt = B.T.tocsc()
    if mean == "common":
        Rt = R.T.tocsc()
        R2 = R.multiply(R).tocsr()
    else:
        counts = np.maximum(np.bincount(train.users, minlength=m), 1)
        means = np.bincount(train.users, weights=train.ratings, minlength=m) / counts
        D = sparse.csr_matrix(
            (train.ratings - means[train.users], (train.users, train.items)),
            shape=(m, train.num_items),
        )
        D.sort_indices()
        Dt = D.T.tocsc()
        D2 = D.multiply(D).tocsr()
    if block is None:
        block = max(1, min(m, 4_000_000 // max(m, 1)))

    def work(lo: int, hi: int):
        n = (B[lo:hi] @ Bt).toarray()
        if mean == "common":
            sx = (R[lo:hi] @ Bt).toarray()
            sy = (B[lo:hi] @ Rt).toarray()
            sxx = (R2[lo:hi] @ Bt).toarray()
            syy = (B[lo:hi] @ R2.T).toarray()
            sxy = (R[lo:hi] @ Rt).toarray()
            cov = n * sxy - sx * sy
            vx = n * sxx - sx * sx
            vy = n * syy - sy * sy
        else:
            cov = (D[lo:hi] @ Dt).toarray()
            vx = (D2[lo:hi] @ Bt).toarray()
            vy = (B[lo:hi] @ D2.T).toarray()
        ok = (n >= min_common) & (vx > 0) & (vy > 0)
        s = np.zeros_like(cov)
        s[ok] = cov[ok] / np.sqrt(vx[ok] * vy[ok])
        np.clip(s, -1.0, 1.0, out=s)
        return sparse.csr_matrix(s)

    spans = [(lo, min(lo + block, m)) for lo in range(0, m, block)]
    if threads <= 1 or len(spans) <= 1:
        parts = [work(*s) for s in spans]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda s: work(*s), spans))
    full = sparse.vstack(parts, format="csr") if parts else sparse.csr_matrix((m, m))
    # mirror the upper triangle so s[u, v] and s[v, u] are the same float
    upper = sparse.triu(full, k=0, format="csr")
    sym = (upper + sparse.triu(full, k=1, format="csr").T).tocsc()
    sym.eliminate_zeros()
    sym.sort_indices()
    return SimilarityMatrix(PEARSON, m, sym, True)


def compute_similarity(
    method: str, train: RatingsDataset, graph: ChannelGraph | None = None, threads: int = 1, **opts
) -> SimilarityMatrix:
    if method == DIFFUSION:
        return diffusion_similarity(graph or build_channel_graph(train), threads=threads)
    if method == PEARSON:
        return pearson_similarity(train, threads=threads, **opts)
    raise ValueError(f"unknown similarity method {method!r}; choose from {METHODS}")
