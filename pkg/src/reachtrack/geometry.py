"""Distance and intersection primitives for capsules, boxes, spheres, cones.

Point-vs-set routines have batch variants operating on (n, 3) arrays; these
are the hot path for occupancy-grid queries.
"""

from __future__ import annotations

import numpy as np


def point_segment_distance(points: np.ndarray, a, b) -> np.ndarray:
    """Distances from points (n, 3) or (3,) to the segment a-b."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    dd = float(d @ d)
    if dd < 1e-18:
        diff = pts - a
    else:
        t = np.clip((pts - a) @ d / dd, 0.0, 1.0)
        diff = pts - (a + t[:, None] * d)
    dist = np.sqrt(diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2)
    return dist if np.ndim(points) == 2 else float(dist[0])


def segment_segment_distance(p1, q1, p2, q2) -> float:
    """Minimum distance between segments p1-q1 and p2-q2 (clamped closest-point)."""
    p1 = np.asarray(p1, dtype=float)
    q1 = np.asarray(q1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    q2 = np.asarray(q2, dtype=float)
    d1 = q1 - p1
    d2 = q2 - p2
    r = p1 - p2
    a = d1 @ d1
    e = d2 @ d2
    f = d2 @ r
    eps = 1e-14
    if a <= eps and e <= eps:
        return float(np.linalg.norm(r))
    if a <= eps:
        s = 0.0
        t = np.clip(f / e, 0.0, 1.0)
    else:
        c = d1 @ r
        if e <= eps:
            t = 0.0
            s = np.clip(-c / a, 0.0, 1.0)
        else:
            b = d1 @ d2
            denom = a * e - b * b
            s = np.clip((b * f - c * e) / denom, 0.0, 1.0) if denom > eps else 0.0
            t = (b * s + f) / e
            if t < 0.0:
                t = 0.0
                s = np.clip(-c / a, 0.0, 1.0)
            elif t > 1.0:
                t = 1.0
                s = np.clip((b - c) / a, 0.0, 1.0)
    closest1 = p1 + s * d1
    closest2 = p2 + t * d2
    return float(np.linalg.norm(closest1 - closest2))


def point_aabb_distance(points: np.ndarray, lo, hi) -> np.ndarray:
    """Distances from points (n, 3) or (3,) to an axis-aligned box [lo, hi]
    (0 inside)."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    d = np.maximum(np.maximum(lo - pts, pts - hi), 0.0)
    dist = np.sqrt(d[:, 0] ** 2 + d[:, 1] ** 2 + d[:, 2] ** 2)
    return dist if np.ndim(points) == 2 else float(dist[0])


def segment_aabb_intersects(a, b, lo, hi) -> bool:
    """Slab test: does segment a-b meet the closed box [lo, hi]?"""
    a = np.asarray(a, dtype=float)
    d = np.asarray(b, dtype=float) - a
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    tmin, tmax = 0.0, 1.0
    for i in range(3):
        if abs(d[i]) < 1e-14:
            if a[i] < lo[i] or a[i] > hi[i]:
                return False
        else:
            t1 = (lo[i] - a[i]) / d[i]
            t2 = (hi[i] - a[i]) / d[i]
            if t1 > t2:
                t1, t2 = t2, t1
            tmin = max(tmin, t1)
            tmax = min(tmax, t2)
            if tmin > tmax:
                return False
    return True


def segment_aabb_distance(a, b, lo, hi, tol: float = 1e-10) -> float:
    """Minimum distance from segment a-b to the box [lo, hi].

    dist(p(t), box) is convex in t, so golden-section search converges to
    the global minimum.
    """
    if segment_aabb_intersects(a, b, lo, hi):
        return 0.0
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    def f(t):
        return point_aabb_distance(a + t * (b - a), lo, hi)

    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    t_lo, t_hi = 0.0, 1.0
    t1 = t_hi - inv_phi * (t_hi - t_lo)
    t2 = t_lo + inv_phi * (t_hi - t_lo)
    f1, f2 = f(t1), f(t2)
    while t_hi - t_lo > tol:
        if f1 <= f2:
            t_hi, t2, f2 = t2, t1, f1
            t1 = t_hi - inv_phi * (t_hi - t_lo)
            f1 = f(t1)
        else:
            t_lo, t1, f1 = t1, t2, f2
            t2 = t_lo + inv_phi * (t_hi - t_lo)
            f2 = f(t2)
    return float(min(f1, f2))


def signed_point_cone_distance(points, apex, axis, length: float,
                               base_radius: float) -> np.ndarray:
    """Signed distance from points to a finite solid cone.

    The cone has its apex at `apex`, extends along unit `axis` for `length`
    meters and is capped by a flat base disk of radius `base_radius`.
    Negative values are penetration depths (distance to the nearest boundary
    surface, i.e. the lateral surface or the base disk).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    apex = np.asarray(apex, dtype=float)
    axis = np.asarray(axis, dtype=float)
    rel = pts - apex
    # Fixed-order elementwise arithmetic: batch and per-point calls must
    # produce bit-identical values (the grid queries are oracle-checked
    # against per-voxel scans for exact equality).
    x = rel[:, 0] * axis[0] + rel[:, 1] * axis[1] + rel[:, 2] * axis[2]
    rx = rel[:, 0] - x * axis[0]
    ry = rel[:, 1] - x * axis[1]
    rz = rel[:, 2] - x * axis[2]
    rho = np.sqrt(rx * rx + ry * ry + rz * rz)

    # 2D formulation in (x, rho): the solid is the triangle 0<=x<=length,
    # rho <= base_radius*x/length; its boundary is the lateral edge
    # (0,0)-(length, base_radius) and the base edge (length,0)-(length, base_radius).
    d_lat = _dist2d_to_segment(x, rho, 0.0, 0.0, length, base_radius)
    d_base = _dist2d_to_segment(x, rho, length, 0.0, length, base_radius)
    d_boundary = np.minimum(d_lat, d_base)
    inside = (x >= 0.0) & (x <= length) & (rho * length <= base_radius * x)
    signed = np.where(inside, -d_boundary, d_boundary)
    return signed if np.ndim(points) == 2 else float(signed[0])


def _dist2d_to_segment(px, py, ax, ay, bx, by):
    dx, dy = bx - ax, by - ay
    dd = dx * dx + dy * dy
    if dd < 1e-18:
        ex, ey = px - ax, py - ay
        return np.sqrt(ex * ex + ey * ey)
    t = np.clip(((px - ax) * dx + (py - ay) * dy) / dd, 0.0, 1.0)
    ex = px - (ax + t * dx)
    ey = py - (ay + t * dy)
    return np.sqrt(ex * ex + ey * ey)


def capsules_intersect(a1, b1, r1, a2, b2, r2) -> bool:
    return segment_segment_distance(a1, b1, a2, b2) < r1 + r2


def segment_sphere_intersects(a, b, center, radius: float) -> bool:
    return point_segment_distance(np.asarray(center, dtype=float), a, b) <= radius
