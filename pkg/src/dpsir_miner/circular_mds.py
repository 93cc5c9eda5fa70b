"""Circular dimensionality reduction: place items on a circle so that
1 - cos(angular separation) approximates a given cosine-distance matrix.

The objective is sum_{i<j} (d_ij - D_ij)^2 with d_ij = 1 - cos(theta_i - theta_j).
Since cosine is even and 2*pi periodic, the wrap-around separation
min(|dt|, 2*pi - |dt|) gives the same value as the raw difference, so the
objective and its gradient are smooth everywhere.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

TWO_PI = 2.0 * np.pi


@dataclass
class AngleSolution:
    thetas: np.ndarray
    objective: float
    restarts_used: int
    converged: bool


@dataclass(frozen=True)
class SectorAllocation:
    """Angular spans assigned to clusters, ordered by circular mean angle."""

    sectors: dict = field(default_factory=dict)  # cluster id -> (start, end); end may exceed 2*pi
    order: tuple = ()


def pairwise_model_distances(thetas: np.ndarray) -> np.ndarray:
    dt = thetas[:, None] - thetas[None, :]
    return 1.0 - np.cos(dt)


def circular_stress(thetas: np.ndarray, D: np.ndarray) -> float:
    """Sum of squared differences between modelled and target distances over i<j."""
    thetas = np.asarray(thetas, dtype=float)
    diff = pairwise_model_distances(thetas) - D
    iu = np.triu_indices(len(thetas), k=1)
    return float(np.sum(diff[iu] ** 2))


def circular_stress_gradient(thetas: np.ndarray, D: np.ndarray) -> np.ndarray:
    """Analytic gradient of circular_stress with respect to each angle."""
    thetas = np.asarray(thetas, dtype=float)
    dt = thetas[:, None] - thetas[None, :]
    resid = (1.0 - np.cos(dt)) - D
    np.fill_diagonal(resid, 0.0)
    # d/d theta_i of (1 - cos(theta_i - theta_j)) is sin(theta_i - theta_j)
    return np.sum(2.0 * resid * np.sin(dt), axis=1)


def _classical_mds_angles(D: np.ndarray) -> np.ndarray:
    """Angles of a 2D classical-MDS embedding, used to seed the first restart."""
    n = D.shape[0]
    J = np.eye(n) - np.ones((n, n)) / n
    B = -0.5 * J @ (D ** 2) @ J
    vals, vecs = np.linalg.eigh(B)
    idx = np.argsort(vals)[::-1][:2]
    coords = vecs[:, idx] * np.sqrt(np.maximum(vals[idx], 1e-12))
    return np.mod(np.arctan2(coords[:, 1], coords[:, 0]), TWO_PI)


def _fix_gauge(thetas: np.ndarray) -> np.ndarray:
    """Rotate so item 0 sits at angle 0 and reflect so item 1 has angle < pi.

    Stress is invariant under rotation and reflection; pinning the gauge
    makes repeated runs comparable.
    """
    out = np.mod(thetas - thetas[0], TWO_PI)
    if len(out) > 1 and out[1] > np.pi:
        out = np.mod(-out, TWO_PI)
    return out


def optimize_angles(D: np.ndarray, restarts: int = 10, seed: int = 0,
                    grad_tol: float = 1e-6, max_iter: int = 500) -> AngleSolution:
    """Best-of-restarts L-BFGS minimisation of the circular stress.

    Restart 0 starts from a classical-MDS 2D projection; the rest start
    from seeded uniform-random angles.
    """
    D = np.asarray(D, dtype=float)
    n = D.shape[0]
    if n < 2:
        return AngleSolution(np.zeros(n), 0.0, 0, True)

    rng = np.random.default_rng(seed)
    best = None
    for r in range(max(restarts, 1)):
        if r == 0:
            x0 = _classical_mds_angles(D)
        else:
            x0 = rng.uniform(0.0, TWO_PI, size=n)
        res = minimize(circular_stress, x0, args=(D,), jac=circular_stress_gradient,
                       method="L-BFGS-B",
                       options={"maxiter": max_iter, "gtol": grad_tol})
        if best is None or res.fun < best.fun:
            best = res

    grad_inf = float(np.max(np.abs(circular_stress_gradient(best.x, D))))
    return AngleSolution(
        thetas=_fix_gauge(best.x),
        objective=float(best.fun),
        restarts_used=max(restarts, 1),
        converged=grad_inf <= max(grad_tol, 1e-5) or bool(best.success),
    )


def circular_mean(angles: np.ndarray) -> float:
    """Mean direction of a set of angles via the unit-vector average."""
    angles = np.asarray(angles, dtype=float)
    return float(np.mod(np.arctan2(np.sin(angles).mean(), np.cos(angles).mean()), TWO_PI))


def allocate_sectors(clusters: dict, thetas: dict, padding: float = np.deg2rad(2.0)) -> SectorAllocation:
    """Split the circle among clusters, spans proportional to cluster sizes.

    ``clusters`` maps cluster id -> member ids, ``thetas`` maps member id ->
    angle. Clusters are ordered by their circular mean angle so adjacency on
    the circle mirrors semantic adjacency; ``padding`` radians are reserved
    at each boundary between sectors.
    """
    ids = list(clusters.keys())
    if not ids:
        return SectorAllocation({}, ())
    means = {cid: circular_mean(np.array([thetas[m] for m in clusters[cid]])) for cid in ids}
    order = tuple(sorted(ids, key=lambda cid: (means[cid], str(cid))))

    n_total = sum(len(clusters[cid]) for cid in ids)
    n_boundaries = len(ids) if len(ids) > 1 else 0
    usable = TWO_PI - padding * n_boundaries

    sectors = {}
    start = means[order[0]] if len(ids) > 1 else 0.0
    # anchor the first sector at its cluster's mean so the layout stays
    # near the optimizer's angles
    cursor = start
    for cid in order:
        span = usable * len(clusters[cid]) / n_total
        sectors[cid] = (cursor, cursor + span)
        cursor += span + (padding if n_boundaries else 0.0)
    return SectorAllocation(sectors, order)
