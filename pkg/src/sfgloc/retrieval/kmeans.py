"""Lloyd's k-means with k-means++ seeding."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class KMeansResult:
    centroids: np.ndarray
    labels: np.ndarray
    n_iter: int
    inertia: float


def sq_distances(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances, shape (len(X), len(C)), clipped at 0."""
    d = (X * X).sum(1)[:, None] - 2.0 * X @ C.T + (C * C).sum(1)[None, :]
    return np.maximum(d, 0.0)


def kmeans_pp(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    n = len(X)
    centers = [int(rng.integers(n))]
    closest = sq_distances(X, X[centers]).ravel()
    for _ in range(1, k):
        total = closest.sum()
        if total <= 0:
            # every point already coincides with a centre: take unused rows in order
            free = np.setdiff1d(np.arange(n), centers)
            centers.append(int(free[0]))
        else:
            centers.append(int(rng.choice(n, p=closest / total)))
        closest = np.minimum(closest, sq_distances(X, X[centers[-1:]]).ravel())
    return X[centers].copy()


def kmeans(X, k: int, seed: int = 0, max_iter: int = 100, tol: float = 0.0) -> KMeansResult:
    """Cluster rows of X into k groups; stops when assignments no longer change."""
    X = np.asarray(X, dtype=np.float64)
    n = len(X)
    if not 1 <= k <= n:
        raise ValueError(f"need 1 <= k <= n, got k={k}, n={n}")
    rng = np.random.default_rng(seed)
    C = kmeans_pp(X, k, rng)
    labels = np.full(n, -1)
    it = 0
    for it in range(1, max_iter + 1):
        D = sq_distances(X, C)
        new = D.argmin(1)
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            members = X[labels == j]
            if len(members):
                C[j] = members.mean(0)
            else:
                # re-seed an empty cluster at the point farthest from its centre
                far = int(D[np.arange(n), labels].argmax())
                C[j] = X[far]
                labels[far] = j
    D = sq_distances(X, C)
    labels = D.argmin(1)
    return KMeansResult(C, labels, it, float(D[np.arange(n), labels].sum()))
