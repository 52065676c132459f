"""Rating data model, user means, dataset statistics and the train/probe splitter."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

RNG_NAME = "numpy.random.PCG64 seeded by SeedSequence([seed, run_index])"


class DataError(ValueError):
    """Input data violates the rating model (bad file, bad value, duplicate pair...)."""


class InvariantError(AssertionError):
    """An internal structural invariant does not hold."""


def _frozen(a, dtype) -> np.ndarray:
    a = np.array(a, dtype=dtype, copy=True).reshape(-1)
    a.flags.writeable = False
    return a


def _group(keys: np.ndarray, size: int) -> tuple[np.ndarray, np.ndarray]:
    """Stable CSR grouping: returns (indptr, order) so that order[indptr[k]:indptr[k+1]]
    lists positions with key k in their original order."""
    order = np.argsort(keys, kind="stable")
    counts = np.bincount(keys, minlength=size)
    indptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    return indptr, order


@dataclass(frozen=True, eq=False)
class RatingsDataset:
    """Immutable set of (user, item, rating) triples on the scale 1..scale_max.

    Users and items are dense 0-based indices. ``user_ids``/``item_ids`` keep the
    external tokens when the dataset was read from a file.
    """

    num_users: int
    num_items: int
    scale_max: int
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    user_ids: tuple | None = None
    item_ids: tuple | None = None

    def __post_init__(self):
        users = _frozen(self.users, np.int64)
        items = _frozen(self.items, np.int64)
        ratings = _frozen(self.ratings, np.int64)
        object.__setattr__(self, "users", users)
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "ratings", ratings)
        if not (len(users) == len(items) == len(ratings)):
            raise DataError("users, items and ratings must have equal length")
        if self.scale_max < 1:
            raise DataError(f"scale_max must be >= 1, got {self.scale_max}")
        if len(ratings):
            bad = np.flatnonzero((ratings < 1) | (ratings > self.scale_max))
            if len(bad):
                raise DataError(
                    f"rating {ratings[bad[0]]} at triple {bad[0]} outside 1..{self.scale_max}"
                )
            if users.min() < 0 or users.max() >= self.num_users:
                raise DataError("user index out of range")
            if items.min() < 0 or items.max() >= self.num_items:
                raise DataError("item index out of range")
            keys = users * self.num_items + items
            uniq, first, counts = np.unique(keys, return_index=True, return_counts=True)
            if len(uniq) != len(keys):
                k = uniq[np.argmax(counts > 1)]
                raise DataError(
                    f"duplicate (user, item) pair ({k // self.num_items}, {k % self.num_items})"
                )
        if self.user_ids is not None and len(self.user_ids) != self.num_users:
            raise DataError("user_ids length does not match num_users")
        if self.item_ids is not None and len(self.item_ids) != self.num_items:
            raise DataError("item_ids length does not match num_items")

    def __len__(self) -> int:
        return len(self.ratings)

    def __eq__(self, other):
        if not isinstance(other, RatingsDataset):
            return NotImplemented
        return (
            self.num_users == other.num_users
            and self.num_items == other.num_items
            and self.scale_max == other.scale_max
            and np.array_equal(self.users, other.users)
            and np.array_equal(self.items, other.items)
            and np.array_equal(self.ratings, other.ratings)
            and self.user_ids == other.user_ids
            and self.item_ids == other.item_ids
        )

    __hash__ = None

    @property
    def triples(self) -> list[tuple[int, int, int]]:
        return list(zip(self.users.tolist(), self.items.tolist(), self.ratings.tolist()))

    @cached_property
    def _user_index(self):
        return _group(self.users, self.num_users)

    @cached_property
    def _item_index(self):
        return _group(self.items, self.num_items)

    def user_ratings(self, u: int) -> tuple[np.ndarray, np.ndarray]:
        """(items, ratings) of user ``u`` in triple order."""
        indptr, order = self._user_index
        sel = order[indptr[u] : indptr[u + 1]]
        return self.items[sel], self.ratings[sel]

    def item_ratings(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(users, ratings) of item ``i`` in triple order."""
        indptr, order = self._item_index
        sel = order[indptr[i] : indptr[i + 1]]
        return self.users[sel], self.ratings[sel]

    @cached_property
    def by_user(self) -> dict[int, list[tuple[int, int]]]:
        return {
            u: list(zip(*(a.tolist() for a in self.user_ratings(u))))
            for u in range(self.num_users)
            if self.user_degrees[u]
        }

    @cached_property
    def by_item(self) -> dict[int, list[tuple[int, int]]]:
        return {
            i: list(zip(*(a.tolist() for a in self.item_ratings(i))))
            for i in range(self.num_items)
            if self.item_degrees[i]
        }

    @cached_property
    def user_degrees(self) -> np.ndarray:
        return np.bincount(self.users, minlength=self.num_users)

    @cached_property
    def item_degrees(self) -> np.ndarray:
        return np.bincount(self.items, minlength=self.num_items)

    def subset(self, mask: np.ndarray) -> RatingsDataset:
        """Triples selected by a boolean mask, keeping the same index space."""
        return RatingsDataset(
            self.num_users,
            self.num_items,
            self.scale_max,
            self.users[mask],
            self.items[mask],
            self.ratings[mask],
            self.user_ids,
            self.item_ids,
        )

    @classmethod
    def from_triples(cls, triples, num_users=None, num_items=None, scale_max=5):
        arr = np.asarray(list(triples), dtype=np.int64).reshape(-1, 3)
        if num_users is None:
            num_users = int(arr[:, 0].max()) + 1 if len(arr) else 0
        if num_items is None:
            num_items = int(arr[:, 1].max()) + 1 if len(arr) else 0
        return cls(num_users, num_items, scale_max, arr[:, 0], arr[:, 1], arr[:, 2])


@dataclass(frozen=True)
class Split:
    """Train/probe partition of a dataset. The probe shares the train index space."""

    train: RatingsDataset
    probe_users: np.ndarray
    probe_items: np.ndarray
    probe_ratings: np.ndarray
    p: int
    seed: int
    run_index: int
    rng: str = RNG_NAME

    @property
    def probe(self) -> list[tuple[int, int, int]]:
        return list(
            zip(self.probe_users.tolist(), self.probe_items.tolist(), self.probe_ratings.tolist())
        )

    def __len__(self) -> int:
        return len(self.probe_ratings)


def probe_size(n: int, p: int) -> int:
    # round-half-up of p/100 * n in exact integer arithmetic
    return (p * n + 50) // 100


def split_dataset(source: RatingsDataset, p: int, seed: int, run_index: int = 0) -> Split:
    """Move a uniform random ``p`` percent of the triples into the probe set.

    The partition is a pure function of ``(seed, run_index)``; the probe keeps the
    source triple order.
    """
    if not 10 <= p <= 90:
        raise ValueError(f"p must lie in 10..90, got {p}")
    n = len(source)
    if n == 0:
        raise DataError("cannot split an empty dataset")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, run_index])))
    chosen = rng.choice(n, size=probe_size(n, p), replace=False)
    in_probe = np.zeros(n, dtype=bool)
    in_probe[chosen] = True
    return Split(
        train=source.subset(~in_probe),
        probe_users=_frozen(source.users[in_probe], np.int64),
        probe_items=_frozen(source.items[in_probe], np.int64),
        probe_ratings=_frozen(source.ratings[in_probe], np.int64),
        p=p,
        seed=seed,
        run_index=run_index,
    )


@dataclass(frozen=True)
class UserMeans:
    """Per-user mean training rating; users without training ratings are absent."""

    per_user: dict[int, float]
    global_mean: float
    values: np.ndarray = field(repr=False)

    def of(self, u: int) -> float:
        return self.per_user.get(u, self.global_mean)


def compute_user_means(train: RatingsDataset) -> UserMeans:
    if len(train) == 0:
        raise DataError("global mean is undefined for an empty training set")
    counts = np.bincount(train.users, minlength=train.num_users)
    # integer sums keep the result independent of triple order
    sums = np.bincount(train.users, weights=train.ratings, minlength=train.num_users)
    global_mean = float(train.ratings.sum()) / len(train)
    values = np.full(train.num_users, global_mean)
    rated = counts > 0
    values[rated] = sums[rated] / counts[rated]
    values.flags.writeable = False
    per_user = {int(u): float(values[u]) for u in np.flatnonzero(rated)}
    return UserMeans(per_user, global_mean, values)


@dataclass(frozen=True)
class DatasetStats:
    num_users: int
    num_items: int
    num_ratings: int
    density: float
    histogram: dict[int, int]
    active_users: int
    active_items: int

    def lines(self) -> list[str]:
        out = [
            f"users (m): {self.num_users}",
            f"items (n): {self.num_items}",
            f"ratings: {self.num_ratings}",
            f"density: {self.density:.6f}",
            f"active users/items: {self.active_users}/{self.active_items}",
        ]
        out += [f"  rating {k}: {v}" for k, v in self.histogram.items()]
        return out


def dataset_stats(d: RatingsDataset) -> DatasetStats:
    cells = d.num_users * d.num_items
    hist = np.bincount(d.ratings, minlength=d.scale_max + 1)[1:]
    return DatasetStats(
        num_users=d.num_users,
        num_items=d.num_items,
        num_ratings=len(d),
        density=len(d) / cells if cells else 0.0,
        histogram={lvl: int(c) for lvl, c in enumerate(hist, start=1)},
        active_users=int(np.count_nonzero(d.user_degrees)),
        active_items=int(np.count_nonzero(d.item_degrees)),
    )
