"""Multi-channel user-channel bipartite graph.

Every item is split into one channel per rating level; a user who gave item
``a`` the rating ``r`` is linked to channel ``(a, r)`` and to nothing else of
that item. Only occupied channels are materialized, indexed in ``(item, level)``
order.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .ratings import RatingsDataset


def _csr(groups, size):
    indptr = np.zeros(size + 1, dtype=np.int64)
    np.cumsum([len(g) for g in groups], out=indptr[1:])
    flat = np.concatenate(groups).astype(np.int64) if groups else np.zeros(0, np.int64)
    return indptr, flat


@dataclass(frozen=True, eq=False)
class ChannelGraph:
    """Unweighted user-channel adjacency with its degrees.

    ``user_adj`` only holds users with at least one edge; ``user_degree`` is defined
    for every user (zero when isolated). CSR copies of both adjacency sides are built
    on construction for the diffusion kernel.
    """

    num_users: int
    scale_max: int
    channel_item: np.ndarray
    channel_level: np.ndarray
    user_adj: dict[int, np.ndarray]
    channel_adj: tuple[np.ndarray, ...]
    user_degree: np.ndarray
    channel_degree: np.ndarray
    user_indptr: np.ndarray = field(init=False, repr=False)
    user_channels: np.ndarray = field(init=False, repr=False)
    channel_indptr: np.ndarray = field(init=False, repr=False)
    channel_users: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        groups = [self.user_adj.get(u, np.zeros(0, np.int64)) for u in range(self.num_users)]
        uptr, uch = _csr(groups, self.num_users)
        cptr, cus = _csr(list(self.channel_adj), len(self.channel_adj))
        for name, value in (
            ("user_indptr", uptr),
            ("user_channels", uch),
            ("channel_indptr", cptr),
            ("channel_users", cus),
        ):
            value.flags.writeable = False
            object.__setattr__(self, name, value)

    @property
    def num_channels(self) -> int:
        return len(self.channel_adj)

    @property
    def num_edges(self) -> int:
        return len(self.user_channels)

    def channels_of(self, v: int) -> np.ndarray:
        return self.user_channels[self.user_indptr[v] : self.user_indptr[v + 1]]

    def users_of(self, c: int) -> np.ndarray:
        return self.channel_users[self.channel_indptr[c] : self.channel_indptr[c + 1]]

    def channel_id(self, c: int) -> tuple[int, int]:
        return int(self.channel_item[c]), int(self.channel_level[c])

    def edges(self) -> list[tuple[int, int, int]]:
        """(user, item, level) for every edge, sorted by user then channel."""
        deg = np.diff(self.user_indptr)
        users = np.repeat(np.arange(self.num_users), deg)
        return list(
            zip(
                users.tolist(),
                self.channel_item[self.user_channels].tolist(),
                self.channel_level[self.user_channels].tolist(),
            )
        )

    def write_edges(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["user", "item", "level"])
            w.writerows(self.edges())


def build_channel_graph(train: RatingsDataset) -> ChannelGraph:
    """One edge ``(v, (item, r_v,item))`` per training triple."""
    R = train.scale_max
    key = train.items * R + (train.ratings - 1)
    keys, chan = np.unique(key, return_inverse=True)
    chan = chan.reshape(-1).astype(np.int64)
    channel_item, channel_level = np.divmod(keys, R)
    channel_level = channel_level + 1

    order = np.lexsort((chan, train.users))
    su, sc = train.users[order], chan[order]
    ubounds = np.flatnonzero(np.diff(su)) + 1
    user_adj = {
        int(g_u[0]): g_c
        for g_u, g_c in zip(np.split(su, ubounds), np.split(sc, ubounds))
        if len(g_u)
    }

    order = np.lexsort((train.users, chan))
    cu, cc = train.users[order], chan[order]
    cbounds = np.flatnonzero(np.diff(cc)) + 1
    channel_adj = tuple(np.split(cu, cbounds)) if len(cc) else ()

    user_degree = np.bincount(train.users, minlength=train.num_users).astype(np.int64)
    channel_degree = np.bincount(chan, minlength=len(keys)).astype(np.int64)
    for a in (channel_item, channel_level, user_degree, channel_degree):
        a.flags.writeable = False
    return ChannelGraph(
        num_users=train.num_users,
        scale_max=R,
        channel_item=channel_item,
        channel_level=channel_level,
        user_adj=user_adj,
        channel_adj=channel_adj,
        user_degree=user_degree,
        channel_degree=channel_degree,
    )


@dataclass
class ConsistencyReport:
    ok: bool
    problems: list[str]

    def __bool__(self):
        return self.ok


def graph_consistency_check(g: ChannelGraph, max_problems: int = 20) -> ConsistencyReport:
    """Check every structural invariant of a channel graph; never raises."""
    problems: list[str] = []

    def fail(msg):
        if len(problems) < max_problems:
            problems.append(msg)

    nc = g.num_channels
    if len(g.user_degree) != g.num_users:
        fail(f"user_degree has length {len(g.user_degree)}, expected {g.num_users}")
    if len(g.channel_degree) != nc:
        fail(f"channel_degree has length {len(g.channel_degree)}, expected {nc}")
    if len(g.channel_item) != nc or len(g.channel_level) != nc:
        fail("channel id arrays do not match channel count")
    elif nc:
        if np.any((g.channel_level < 1) | (g.channel_level > g.scale_max)):
            fail("channel level outside rating scale")
        key = g.channel_item * g.scale_max + g.channel_level
        if np.any(np.diff(key) <= 0):
            fail("channels are not strictly sorted by (item, level)")

    user_edges = set()
    for u, chans in g.user_adj.items():
        if not 0 <= u < g.num_users:
            fail(f"user {u} outside 0..{g.num_users - 1}")
            continue
        if len(chans) == 0:
            fail(f"isolated user {u} stored with empty adjacency")
        if np.any(np.diff(chans) <= 0):
            fail(f"adjacency of user {u} not strictly sorted")
        if u < len(g.user_degree) and g.user_degree[u] != len(chans):
            fail(f"k(v) mismatch for user {u}: degree {g.user_degree[u]}, adjacency {len(chans)}")
        for c in chans.tolist():
            if not 0 <= c < nc:
                fail(f"user {u} links to unknown channel {c}")
            user_edges.add((u, c))
    for u in np.flatnonzero(np.asarray(g.user_degree) > 0).tolist():
        if u not in g.user_adj:
            fail(f"user {u} has degree {g.user_degree[u]} but no adjacency")

    channel_edges = set()
    for c, users in enumerate(g.channel_adj):
        if len(users) == 0:
            fail(f"channel {c} has k(c) = 0")
        if np.any(np.diff(users) <= 0):
            fail(f"adjacency of channel {c} not strictly sorted")
        if c < len(g.channel_degree) and g.channel_degree[c] != len(users):
            fail(f"k(c) mismatch for channel {c}")
        channel_edges.update((u, c) for u in users.tolist())

    for u, c in sorted(user_edges - channel_edges):
        fail(f"edge (user {u}, channel {c}) present in user_adj but missing from channel_adj")
    for u, c in sorted(channel_edges - user_edges):
        fail(f"edge (user {u}, channel {c}) present in channel_adj but missing from user_adj")

    # one channel per item per user
    for u, chans in g.user_adj.items():
        items = g.channel_item[chans[(chans >= 0) & (chans < nc)]]
        if len(np.unique(items)) != len(items):
            fail(f"user {u} is linked to two channels of the same item")

    su, sc = int(np.sum(g.user_degree)), int(np.sum(g.channel_degree))
    if su != sc:
        fail(f"sum k(v) = {su} differs from sum k(c) = {sc}")
    return ConsistencyReport(not problems, problems)
