"""User clustering and channel assignment.

Clusters grow one user per iteration.  At iteration ``i`` every cluster
holds ``i - 1`` users; the cost of admitting unassigned user ``n`` into the
cluster on channel ``k`` is the cluster metric after re-solving the resource
allocation for the enlarged cluster.  A linear bottleneck assignment then
picks one new user per cluster so that the worst admitted cost is as large
as possible.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import maximum_bipartite_matching

from .coverage import optimal_coverage
from .link import LinkBudget, link_budget
from .ra import PowerCaps, allocate_batch, allocate_cluster
from .scenario import Position, ScenarioConfig

METRICS = ("rate", "throughput", "coverage")
ORACLE_MAX_LABELINGS = 2_000_000


# ---------------------------------------------------------------------------
# Linear bottleneck assignment
# ---------------------------------------------------------------------------


def _perfect_on(mask: np.ndarray) -> np.ndarray | None:
    """Row -> column matching saturating every row of ``mask``, or None."""
    match = maximum_bipartite_matching(csr_matrix(mask), perm_type="column")
    return None if np.any(match < 0) else match


def lba_solve(cost) -> tuple[np.ndarray, np.ndarray, float]:
    """Assignment maximizing the smallest selected entry.

    Rectangular inputs are padded to square with ``+inf`` so padding never
    binds.  The threshold method bisects over the sorted distinct entries and
    tests each threshold with a maximum bipartite matching.  Returns
    ``(rows, cols, bottleneck)`` restricted to real cells, rows ascending.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.ndim != 2 or cost.size == 0:
        raise ValueError("cost matrix must be a non-empty 2-D array")
    if np.isnan(cost).any():
        raise ValueError("cost matrix contains NaN")
    r, c = cost.shape
    m = max(r, c)
    padded = np.full((m, m), np.inf)
    padded[:r, :c] = cost
    values = np.unique(cost)
    lo, hi = 0, len(values) - 1
    best = _perfect_on(padded >= values[0])
    # invariant: a perfect matching exists at values[lo]
    while lo < hi:
        mid = (lo + hi + 1) // 2
        match = _perfect_on(padded >= values[mid])
        if match is None:
            hi = mid - 1
        else:
            lo, best = mid, match
    rows = np.arange(m)
    keep = (rows < r) & (best < c)
    return rows[keep], best[keep], float(values[lo])


# ---------------------------------------------------------------------------
# Cluster metrics
# ---------------------------------------------------------------------------


def _batched_metric(budget: LinkBudget, ks, members, metric: str) -> np.ndarray:
    """Rate-type metric of many equal-size clusters at once.

    ``ks`` (B,) channels, ``members`` (B, C) user ids.  Members are put in
    decoding order (ascending gain, ties by id) before allocation.
    """
    ks = np.asarray(ks)
    members = np.sort(np.asarray(members), axis=1)
    gains = budget.gain[ks[:, None], members]
    order = np.argsort(gains, axis=1, kind="stable")
    members = np.take_along_axis(members, order, axis=1)
    I_n = budget.I_n[ks[:, None], members]
    _, _, _, rate = allocate_batch(
        budget.I_r[ks], I_n, budget.phi1[ks], budget.phi2[ks], budget.scenario.bandwidth_w
    )
    return rate * members.shape[1] if metric == "throughput" else rate


def cluster_metric(budget: LinkBudget, k: int, members: Sequence[int], metric: str = "rate") -> float:
    """Metric of one cluster: max-min rate, cluster throughput |C| R*, or
    the smallest member coverage probability."""
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    state = budget.cluster_state(k, list(members))
    if metric == "coverage":
        return min(r.p_e2e for r in optimal_coverage(state, budget.scenario.rate_threshold_rbar))
    alloc = allocate_cluster(state, PowerCaps(float(budget.phi1[k]), float(budget.phi2[k])))
    return alloc.maxmin_rate * (state.size if metric == "throughput" else 1)


def _cost_matrix(budget: LinkBudget, clusters, unassigned, metric) -> np.ndarray:
    kk = len(clusters)
    u = np.asarray(unassigned)
    if metric == "coverage":
        out = np.empty((kk, len(u)))
        for k, cl in enumerate(clusters):
            for j, n in enumerate(u):
                out[k, j] = cluster_metric(budget, k, list(cl) + [int(n)], metric)
        return out
    size = len(clusters[0])
    ks = np.repeat(np.arange(kk), len(u))
    base = np.array([list(cl) for cl in clusters], dtype=int).reshape(kk, size)
    members = np.concatenate([np.repeat(base, len(u), axis=0), np.tile(u, kk)[:, None]], axis=1)
    return _batched_metric(budget, ks, members, metric).reshape(kk, len(u))


# ---------------------------------------------------------------------------
# Iterative clustering
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AssignmentResult:
    chi: np.ndarray
    clusters: tuple[tuple[int, ...], ...]
    cluster_metrics: tuple[float, ...]
    min_metric: float
    metric: str
    bottlenecks: tuple[float, ...] = field(default=())

    @property
    def k(self) -> int:
        return self.chi.shape[0]


def _chi(clusters, n_users) -> np.ndarray:
    chi = np.zeros((len(clusters), n_users), dtype=int)
    for k, cl in enumerate(clusters):
        chi[k, list(cl)] = 1
    return chi


def _summary(clusters, metrics, metric, n_users, bottlenecks=()) -> AssignmentResult:
    used = [m for cl, m in zip(clusters, metrics) if cl]
    return AssignmentResult(
        chi=_chi(clusters, n_users),
        clusters=tuple(tuple(sorted(cl)) for cl in clusters),
        cluster_metrics=tuple(float(m) for m in metrics),
        min_metric=float(min(used)) if used else math.nan,
        metric=metric,
        bottlenecks=tuple(bottlenecks),
    )


def cluster_and_assign(
    c: Position | None,
    scenario: ScenarioConfig,
    metric: str | None = None,
    budget: LinkBudget | None = None,
) -> AssignmentResult:
    """Grow clusters over ceil(N/K) LBA rounds and report the worst cluster
    metric.  Clusters that stay empty (K > N) carry a NaN metric and are
    ignored in the minimum."""
    metric = metric or scenario.metric
    if metric not in METRICS:
        raise ValueError(f"metric must be one of {METRICS}")
    budget = budget if budget is not None else link_budget(scenario, c)
    kk, n = budget.k, budget.n
    cap = math.ceil(n / kk)
    clusters: list[list[int]] = [[] for _ in range(kk)]
    metrics = [math.nan] * kk
    unassigned = list(range(n))
    bottlenecks = []
    for _ in range(cap):
        if not unassigned:
            break
        cost = _cost_matrix(budget, clusters, unassigned, metric)
        rows, cols, bott = lba_solve(cost)
        bottlenecks.append(bott)
        for k, j in zip(rows, cols):
            clusters[k].append(unassigned[j])
            metrics[k] = float(cost[k, j])
        taken = {unassigned[j] for j in cols}
        unassigned = [u for u in unassigned if u not in taken]
        chi = _chi(clusters, n)
        if chi.sum(axis=0).max() > 1 or chi.sum(axis=1).max() > cap:
            raise RuntimeError("assignment constraint violated")
    if unassigned:
        raise RuntimeError("users left unassigned")
    return _summary(clusters, metrics, metric, n, bottlenecks)


# ---------------------------------------------------------------------------
# Exhaustive oracle
# ---------------------------------------------------------------------------


def exhaustive_assignment_oracle(
    c: Position | None,
    scenario: ScenarioConfig,
    metric: str | None = None,
    budget: LinkBudget | None = None,
    require_nonempty: bool = True,
) -> AssignmentResult:
    """Best labeled partition of the users into K clusters of size at most
    ceil(N/K), by enumeration.

    With ``require_nonempty`` (default) every channel gets a user whenever
    N >= K, which is the outcome the iterative procedure always produces.
    Cluster metrics are cached per (channel, member set).
    """
    metric = metric or scenario.metric
    budget = budget if budget is not None else link_budget(scenario, c)
    kk, n = budget.k, budget.n
    if kk ** n > ORACLE_MAX_LABELINGS:
        raise ValueError(f"oracle instance too large: {kk}^{n} labelings")
    cap = math.ceil(n / kk)
    need_all = require_nonempty and n >= kk
    cache: dict[tuple[int, tuple[int, ...]], float] = {}

    def value(k, members):
        key = (k, members)
        if key not in cache:
            cache[key] = cluster_metric(budget, k, members, metric)
        return cache[key]

    best_val, best_clusters = -math.inf, None
    for labels in itertools.product(range(kk), repeat=n):
        counts = np.bincount(labels, minlength=kk)
        if counts.max() > cap or (need_all and counts.min() == 0):
            continue
        clusters = [tuple(i for i, l in enumerate(labels) if l == k) for k in range(kk)]
        val = min(value(k, cl) for k, cl in enumerate(clusters) if cl)
        if val > best_val:
            best_val, best_clusters = val, clusters
    metrics = [value(k, cl) if cl else math.nan for k, cl in enumerate(best_clusters)]
    return _summary([list(cl) for cl in best_clusters], metrics, metric, n)

