"""Readers and writers for rating files, Netflix-style subsampling, synthetic data."""

from __future__ import annotations

import csv
import logging
import os
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ratings import DataError, RatingsDataset

log = logging.getLogger(__name__)

DATA_DIR_ENV = "MCDIFF_DATA_DIR"
KNOWN_DATASETS = {"ml100k": Path("ml-100k") / "u.data"}


@dataclass(frozen=True)
class RawRatingRecord:
    external_user_id: str
    external_item_id: str
    rating: int
    timestamp: int | None = None


def _natural_key(token: str):
    return (0, int(token), "") if token.isdigit() else (1, 0, token)


def _parse_rating(text: str, scale_max: int, where: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise DataError(f"{where}: rating {text!r} is not an integer") from None
    if not 1 <= value <= scale_max:
        raise DataError(f"{where}: rating {value} outside 1..{scale_max}")
    return value


def from_records(records, scale_max: int = 5) -> RatingsDataset:
    """Remap external ids to dense indices (sorted, numeric ids numerically)."""
    records = list(records)
    user_ids = sorted({r.external_user_id for r in records}, key=_natural_key)
    item_ids = sorted({r.external_item_id for r in records}, key=_natural_key)
    uix = {t: k for k, t in enumerate(user_ids)}
    iix = {t: k for k, t in enumerate(item_ids)}
    return RatingsDataset(
        len(user_ids),
        len(item_ids),
        scale_max,
        [uix[r.external_user_id] for r in records],
        [iix[r.external_item_id] for r in records],
        [r.rating for r in records],
        tuple(user_ids),
        tuple(item_ids),
    )


def read_movielens_records(path, scale_max: int = 5) -> list[RawRatingRecord]:
    records = []
    with open(path, encoding="latin-1") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) not in (3, 4):
                raise DataError(f"{path}:{lineno}: expected user<TAB>item<TAB>rating<TAB>timestamp")
            ts = None
            if len(parts) == 4:
                try:
                    ts = int(parts[3])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad timestamp {parts[3]!r}") from None
            rating = _parse_rating(parts[2], scale_max, f"{path}:{lineno}")
            records.append(RawRatingRecord(parts[0], parts[1], rating, ts))
    return records


def load_movielens(path, scale_max: int = 5) -> RatingsDataset:
    """Load a MovieLens 100k ``u.data`` style file. Timestamps are discarded."""
    return from_records(read_movielens_records(path, scale_max), scale_max)


def write_movielens(d: RatingsDataset, path) -> None:
    users = d.user_ids or tuple(str(u + 1) for u in range(d.num_users))
    items = d.item_ids or tuple(str(i + 1) for i in range(d.num_items))
    with open(path, "w", encoding="latin-1") as fh:
        for u, i, r in zip(d.users.tolist(), d.items.tolist(), d.ratings.tolist()):
            fh.write(f"{users[u]}\t{items[i]}\t{r}\t0\n")


_HEADER = re.compile(r"^\s*(\S+?)\s*:\s*$")


def _netflix_files(path: Path) -> list[Path]:
    if path.is_dir():
        files = sorted(p for p in path.iterdir() if p.suffix == ".txt")
        if not files:
            raise DataError(f"{path}: no .txt rating files found")
        return files
    return [path]


def load_netflix(path, scale_max: int = 5) -> RatingsDataset:
    """Load Netflix Prize data: a directory of per-movie files or a combined file.

    Each block starts with ``<movie_id>:`` and continues with ``user_id,rating,date``.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    records = []
    for f in _netflix_files(path):
        movie = None
        with open(f, encoding="latin-1") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                m = _HEADER.match(line)
                if m:
                    movie = m.group(1)
                    continue
                if movie is None:
                    raise DataError(f"{f}:{lineno}: rating line before any '<movie_id>:' header")
                parts = line.split(",")
                if len(parts) < 2:
                    raise DataError(f"{f}:{lineno}: expected user_id,rating,date")
                rating = _parse_rating(parts[1], scale_max, f"{f}:{lineno}")
                records.append(RawRatingRecord(parts[0], movie, rating))
    return from_records(records, scale_max)


def load_csv(path, scale_max: int = 5) -> RatingsDataset:
    """Canonical fixture format: ``user,item,rating`` header, 0-based dense ids."""
    triples = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["user", "item", "rating"]:
            raise DataError(f"{path}:1: header must be 'user,item,rating'")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise DataError(f"{path}:{lineno}: expected 3 fields, got {len(row)}")
            try:
                u, i = int(row[0]), int(row[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer id") from None
            if u < 0 or i < 0:
                raise DataError(f"{path}:{lineno}: negative id")
            triples.append((u, i, _parse_rating(row[2], scale_max, f"{path}:{lineno}")))
    return RatingsDataset.from_triples(triples, scale_max=scale_max)


def write_csv(d: RatingsDataset, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["user", "item", "rating"])
        w.writerows(zip(d.users.tolist(), d.items.tolist(), d.ratings.tolist()))


def resolve_dataset(spec: str, fmt: str | None = None) -> tuple[Path, str]:
    """Map a dataset argument (a path or a known tag like ``ml100k``) to (path, format)."""
    if spec in KNOWN_DATASETS:
        base = Path(os.environ.get(DATA_DIR_ENV, "data"))
        path = base / KNOWN_DATASETS[spec]
        return path, fmt or "movielens"
    path = Path(spec)
    if fmt is None:
        if path.is_dir():
            fmt = "netflix"
        elif path.suffix.lower() == ".csv":
            fmt = "csv"
        else:
            fmt = "movielens"
    return path, fmt


def load_dataset(spec: str, fmt: str | None = None, scale_max: int = 5) -> RatingsDataset:
    path, fmt = resolve_dataset(spec, fmt)
    if not path.exists():
        raise FileNotFoundError(f"dataset not found: {path}")
    loaders = {"movielens": load_movielens, "netflix": load_netflix, "csv": load_csv}
    if fmt not in loaders:
        raise ValueError(f"unknown format {fmt!r}; choose from {sorted(loaders)}")
    return loaders[fmt](path, scale_max)


class SubsampleError(DataError):
    def __init__(self, message, best_user_degree=0, best_item_degree=0):
        super().__init__(message)
        self.best_user_degree = best_user_degree
        self.best_item_degree = best_item_degree


def _restrict(source: RatingsDataset, users: np.ndarray, items: np.ndarray) -> RatingsDataset:
    """Sub-dataset on the given source users/items, ids remapped in source order."""
    users = np.sort(users)
    items = np.sort(items)
    umap = np.full(source.num_users, -1)
    umap[users] = np.arange(len(users))
    imap = np.full(source.num_items, -1)
    imap[items] = np.arange(len(items))
    keep = (umap[source.users] >= 0) & (imap[source.items] >= 0)
    return RatingsDataset(
        len(users),
        len(items),
        source.scale_max,
        umap[source.users[keep]],
        imap[source.items[keep]],
        source.ratings[keep],
        tuple(source.user_ids[u] for u in users) if source.user_ids else None,
        tuple(source.item_ids[i] for i in items) if source.item_ids else None,
    )


def subsample_netflix(
    source: RatingsDataset,
    target_users: int = 3000,
    target_items: int = 3000,
    min_user_degree: int = 45,
    min_item_degree: int = 23,
    seed: int = 0,
    max_rounds: int = 1000,
) -> RatingsDataset:
    """Random sample with exactly ``target_users`` x ``target_items`` whose degree
    minima hold inside the sample itself.

    Iterative peeling: draw random users/items, repeatedly drop the entities that
    violate their minimum on the current subgraph and refill from the unused pool,
    preferring candidates that already meet the minimum against the current sample.
    Dropped entities are never re-drawn, so the loop terminates.
    """
    if target_users > source.num_users or target_items > source.num_items:
        raise SubsampleError(
            f"source has {source.num_users} users / {source.num_items} items, "
            f"fewer than requested {target_users} / {target_items}"
        )
    rng = np.random.Generator(np.random.PCG64(seed))
    m, n = source.num_users, source.num_items
    su, si = source.users, source.items

    def pick(pool: np.ndarray, k: int, score: np.ndarray, need: int) -> np.ndarray:
        if k <= 0 or len(pool) == 0:
            return pool[:0]
        good = pool[score[pool] >= need]
        first = rng.permutation(good)[:k]
        if len(first) < k:
            rest = np.setdiff1d(pool, first)
            first = np.concatenate([first, rng.permutation(rest)[: k - len(first)]])
        return first

    in_u = np.zeros(m, dtype=bool)
    in_i = np.zeros(n, dtype=bool)
    banned_u = np.zeros(m, dtype=bool)
    banned_i = np.zeros(n, dtype=bool)
    in_i[pick(np.arange(n), target_items, source.item_degrees, min_item_degree)] = True
    in_u[pick(np.arange(m), target_users, source.user_degrees, min_user_degree)] = True

    best = (0, 0)
    for round_ in range(max_rounds):
        live = in_u[su] & in_i[si]
        udeg = np.bincount(su[live], minlength=m)
        ideg = np.bincount(si[live], minlength=n)
        bad_u = in_u & (udeg < min_user_degree)
        bad_i = in_i & (ideg < min_item_degree)
        worst = (
            int(udeg[in_u].min()) if in_u.any() else 0,
            int(ideg[in_i].min()) if in_i.any() else 0,
        )
        if in_u.sum() == target_users and in_i.sum() == target_items:
            best = max(best, worst)
            if not bad_u.any() and not bad_i.any():
                log.debug("subsample converged after %d rounds", round_)
                return _restrict(source, np.flatnonzero(in_u), np.flatnonzero(in_i))
        # peel the side with proportionally more violators first
        if bad_u.sum() / max(target_users, 1) >= bad_i.sum() / max(target_items, 1) and bad_u.any():
            in_u[bad_u] = False
            banned_u |= bad_u
        elif bad_i.any():
            in_i[bad_i] = False
            banned_i |= bad_i
        # refill both sides against the current opposite side
        live_i = in_i[si]
        score_u = np.bincount(su[live_i], minlength=m)
        pool_u = np.flatnonzero(~in_u & ~banned_u)
        in_u[pick(pool_u, target_users - int(in_u.sum()), score_u, min_user_degree)] = True
        live_u = in_u[su]
        score_i = np.bincount(si[live_u], minlength=n)
        pool_i = np.flatnonzero(~in_i & ~banned_i)
        in_i[pick(pool_i, target_items - int(in_i.sum()), score_i, min_item_degree)] = True
        if in_u.sum() < target_users or in_i.sum() < target_items:
            break
    raise SubsampleError(
        f"could not satisfy degree minima ({min_user_degree}, {min_item_degree}) "
        f"with {target_users} x {target_items}; best minimum degrees reached "
        f"user={best[0]} item={best[1]}",
        *best,
    )


def generate_synthetic(
    m: int,
    n: int,
    density: float,
    scale_max: int = 5,
    seed: int = 0,
    user_bias_spread: float = 0.5,
    item_bias_spread: float = 0.7,
    noise: float = 0.8,
    base: float | None = None,
) -> RatingsDataset:
    """Random ratings from ``base + user bias + item bias + noise``, rounded and clamped.

    Exactly ``round(density * m * n)`` distinct cells are rated. Biases and noise are
    Gaussian with the given standard deviations; ``base`` defaults to the scale midpoint.
    """
    if not 0 < density <= 1:
        raise ValueError(f"density must lie in (0, 1], got {density}")
    rng = np.random.Generator(np.random.PCG64(seed))
    cells = m * n
    k = min(cells, int(np.floor(density * cells + 0.5)))
    chosen = np.sort(rng.choice(cells, size=k, replace=False))
    users, items = np.divmod(chosen, n)
    if base is None:
        base = (scale_max + 1) / 2
    bu = rng.normal(0.0, 1.0, m) * user_bias_spread
    bi = rng.normal(0.0, 1.0, n) * item_bias_spread
    eps = rng.normal(0.0, 1.0, k) * noise
    raw = base + bu[users] + bi[items] + eps
    ratings = np.clip(np.floor(raw + 0.5), 1, scale_max).astype(np.int64)
    return RatingsDataset(m, n, scale_max, users, items, ratings)
