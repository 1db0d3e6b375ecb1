"""Lloyd's-algorithm partitioning of receivers by estimated phase vectors.

Clustering operates on the observable relative-phase vectors (length K-1).
The default metric treats phases as plain Euclidean coordinates on [0, 2*pi);
an optional unit-circle embedding maps each phase to a (cos, sin) pair to
remove wraparound artifacts.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from wetsim.errors import ConfigurationError

MAX_LLOYD_ITER = 100
DEFAULT_RESTARTS = 10


@dataclass(frozen=True)
class PhasePoint:
    """A receiver's clustering coordinates: its estimated relative phases."""

    er_id: int
    coords: np.ndarray


@dataclass(frozen=True)
class Clustering:
    """Result of one Lloyd run (best restart).

    assignments         : (N,) cluster index per point, 0-based
    centroids           : (Q, d) arithmetic means of members
    objective           : total within-cluster sum of squares
    per_cluster_scatter : (Q,) within-cluster sum of squares
    objective_history   : objective after each assignment step of the winning
                          restart (non-increasing by construction)
    circular            : whether coords were embedded on the unit circle
    """

    assignments: np.ndarray
    centroids: np.ndarray
    objective: float
    per_cluster_scatter: np.ndarray
    objective_history: tuple[float, ...]
    circular: bool = False


def embed_circular(coords: np.ndarray) -> np.ndarray:
    """Map (N, d) phases to (N, 2d) unit-circle coordinates."""
    return np.concatenate([np.cos(coords), np.sin(coords)], axis=1)


def _scatter(X, assignments, centroids, Q):
    per = np.zeros(Q)
    for q in range(Q):
        members = X[assignments == q]
        if members.size:
            per[q] = float(((members - centroids[q]) ** 2).sum())
    return per


def _lloyd_once(X: np.ndarray, Q: int, rng: np.random.Generator, max_iter: int):
    n = X.shape[0]
    centroids = X[rng.choice(n, size=Q, replace=False)].copy()
    assignments = np.full(n, -1, dtype=int)
    history = []
    for _ in range(max_iter):
        d2 = ((X[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)  # argmin ties break toward lowest index
        history.append(float(d2[np.arange(n), new_assign].sum()))
        if np.array_equal(new_assign, assignments):
            break
        assignments = new_assign
        for q in range(Q):
            mask = assignments == q
            if mask.any():
                centroids[q] = X[mask].mean(axis=0)
            else:
                # re-seed an empty cluster with the point farthest from its centroid
                dist_own = ((X - centroids[assignments]) ** 2).sum(axis=1)
                centroids[q] = X[dist_own.argmax()]
    per = _scatter(X, assignments, centroids, Q)
    return assignments, centroids, per, history


def lloyd_cluster(
    points: list[PhasePoint],
    Q: int,
    restarts: int = DEFAULT_RESTARTS,
    rng: np.random.Generator | None = None,
    circular: bool = False,
    max_iter: int = MAX_LLOYD_ITER,
) -> Clustering:
    """Best of `restarts` seeded Lloyd runs, by within-cluster sum of squares."""
    n = len(points)
    if not 1 <= Q <= n:
        raise ConfigurationError(f"need 1 <= Q <= N, got Q={Q}, N={n}")
    if restarts < 1:
        raise ConfigurationError("restarts must be >= 1")
    if rng is None:
        rng = np.random.default_rng(0)

    X = np.stack([np.asarray(p.coords, dtype=float) for p in points])
    if X.ndim != 2:
        raise ConfigurationError("point coords must be 1-D vectors")
    if circular:
        X = embed_circular(X)

    best = None
    for _ in range(restarts):
        assignments, centroids, per, history = _lloyd_once(X, Q, rng, max_iter)
        obj = float(per.sum())
        if best is None or obj < best[0]:
            best = (obj, assignments, centroids, per, history)

    obj, assignments, centroids, per, history = best
    return Clustering(
        assignments=assignments,
        centroids=centroids,
        objective=obj,
        per_cluster_scatter=per,
        objective_history=tuple(history),
        circular=circular,
    )


def select_cluster(clustering: Clustering, normalized: bool = False) -> int:
    """Index of the densest cluster: minimum within-cluster scatter, ties
    broken by lowest index.  `normalized` divides scatter by member count."""
    scatter = clustering.per_cluster_scatter
    if normalized:
        counts = np.bincount(clustering.assignments, minlength=scatter.size).astype(float)
        scatter = np.where(counts > 0, scatter / np.maximum(counts, 1.0), np.inf)
    return int(np.argmin(scatter))


def clustering_to_csv(clustering: Clustering, points: list[PhasePoint], path) -> None:
    """Dump assignments plus a centroid table."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["er_id", "cluster"])
        for p, q in zip(points, clustering.assignments):
            writer.writerow([p.er_id, int(q)])
        writer.writerow([])
        writer.writerow(["cluster"] + [f"c{j}" for j in range(clustering.centroids.shape[1])])
        for q, w in enumerate(clustering.centroids):
            writer.writerow([q] + [repr(x) for x in w])
