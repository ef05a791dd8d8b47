"""Exact planar convex geometry: hulls, margins, closest pairs, certificates.

All predicates (turns, containment, segment crossing) use the sign of double
precision cross products with no epsilon; the only tolerance in this module
is the 1e-12 hull-distance floor below which separation is declared
infeasible.  Degenerate hulls (segments and single points) flow through the
same vertex/edge scans as proper polygons.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    EmptyClass,
    EmptyInput,
    InfeasibleCertificate,
    NoOffsetControl,
    NonFinitePoint,
    ZeroDirection,
)

FEASIBILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class PlanarHull:
    """Convex hull as counterclockwise vertices; collinear points are dropped,
    so degenerate inputs yield a 2-vertex segment or a single point."""

    vertices: np.ndarray  # (h, 2)

    @property
    def size(self) -> int:
        return self.vertices.shape[0]

    def edges(self) -> np.ndarray:
        """(h, 2, 2) array of directed boundary edges; a single point yields
        one zero-length edge and a segment yields one forward edge."""
        v = self.vertices
        if self.size == 1:
            return np.stack([v, v], axis=1)
        if self.size == 2:
            return np.stack([v[:1], v[1:2]], axis=1)
        return np.stack([v, np.roll(v, -1, axis=0)], axis=1)


@dataclass(frozen=True)
class SeparationCertificate:
    """Outcome of the exact binary separation test.

    When feasible, ``theta_star`` is the unit closest-pair direction, the
    margin equals the hull distance, and ``diameter`` bounds the Lipschitz
    constant of the directional margin (used by the quantization check).
    """

    feasible: bool
    margin: float  # m* (0 when infeasible)
    diameter: float  # M = max cross-pair distance
    theta_star: np.ndarray | None = None  # unit 2-vector
    u_star: np.ndarray | None = None
    v_star: np.ndarray | None = None


@dataclass(frozen=True)
class QuantizationCheck:
    certified: bool
    margin_bound: float


def _as_points(points, what: str) -> np.ndarray:
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise EmptyInput(f"{what}: need at least one point")
    if pts.shape[1] != 2:
        raise NonFinitePoint(f"{what}: expected 2-D points, got shape {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise NonFinitePoint(f"{what}: non-finite coordinates")
    return pts


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull(points) -> PlanarHull:
    """Monotone-chain hull in O(n log n), counterclockwise, no collinear vertices."""
    pts = _as_points(points, "convex_hull")
    uniq = np.unique(pts, axis=0)  # lexicographic sort on (x, y)
    if uniq.shape[0] == 1:
        return PlanarHull(uniq)

    def build(chain_pts):
        chain: list[np.ndarray] = []
        for p in chain_pts:
            while len(chain) >= 2 and _cross(chain[-2], chain[-1], p) <= 0.0:
                chain.pop()
            chain.append(p)
        return chain

    lower = build(uniq)
    upper = build(uniq[::-1])
    verts = lower[:-1] + upper[:-1]
    if len(verts) < 2:  # all points collinear: keep the two extremes
        verts = [uniq[0], uniq[-1]]
    return PlanarHull(np.asarray(verts, dtype=np.float64))


def _on_segment(p, a, b) -> bool:
    """p collinear-with and between a, b (closed, exact sign tests)."""
    if _cross(a, b, p) != 0.0:
        return False
    return (
        min(a[0], b[0]) <= p[0] <= max(a[0], b[0])
        and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])
    )


def point_in_hull(point, hull: PlanarHull) -> bool:
    """Closed containment test (boundary counts as inside)."""
    p = np.asarray(point, dtype=np.float64)
    v = hull.vertices
    if hull.size == 1:
        return bool(p[0] == v[0, 0] and p[1] == v[0, 1])
    if hull.size == 2:
        return _on_segment(p, v[0], v[1])
    for i in range(hull.size):
        if _cross(v[i], v[(i + 1) % hull.size], p) < 0.0:
            return False
    return True


def _segments_intersect(p1, p2, q1, q2) -> bool:
    """Closed segment intersection via orientation signs plus collinear overlap."""
    d1 = _cross(q1, q2, p1)
    d2 = _cross(q1, q2, p2)
    d3 = _cross(p1, p2, q1)
    d4 = _cross(p1, p2, q2)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and (
        (d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)
    ):
        return True
    if d1 == 0.0 and _on_segment(p1, q1, q2):
        return True
    if d2 == 0.0 and _on_segment(p2, q1, q2):
        return True
    if d3 == 0.0 and _on_segment(q1, p1, p2):
        return True
    if d4 == 0.0 and _on_segment(q2, p1, p2):
        return True
    return False


def hulls_intersect(a: PlanarHull, b: PlanarHull) -> bool:
    """Whether the closed hulls share any point (touching counts)."""
    for p in a.vertices:
        if point_in_hull(p, b):
            return True
    for q in b.vertices:
        if point_in_hull(q, a):
            return True
    for e in a.edges():
        for f in b.edges():
            if _segments_intersect(e[0], e[1], f[0], f[1]):
                return True
    return False


def _point_segment_closest(p, a, b) -> tuple[float, np.ndarray]:
    ab = b - a
    denom = float(ab @ ab)
    if denom == 0.0:
        return float(np.hypot(*(p - a))), a
    t = float((p - a) @ ab) / denom
    t = min(1.0, max(0.0, t))
    q = a + t * ab
    return float(np.hypot(*(p - q))), q


def closest_pair_hulls(a: PlanarHull, b: PlanarHull) -> tuple[float, np.ndarray, np.ndarray]:
    """Closest points between two disjoint convex hulls by vertex/edge scan.

    For disjoint convex polygons the minimum is attained at a vertex of one
    hull against an edge (or vertex) of the other, so the double scan is
    exhaustive.  Returns (distance, point_on_a, point_on_b).
    """
    best = (np.inf, a.vertices[0], b.vertices[0])
    for p in a.vertices:
        for f in b.edges():
            d, q = _point_segment_closest(p, f[0], f[1])
            if d < best[0]:
                best = (d, p, q)
    for q in b.vertices:
        for e in a.edges():
            d, p = _point_segment_closest(q, e[0], e[1])
            if d < best[0]:
                best = (d, p, q)
    return best


def directional_margin(theta, s_plus, s_minus) -> float:
    """m(theta) = min_+ theta.z - max_- theta.z (hull extrema sit at points)."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.shape != (2,) or (theta[0] == 0.0 and theta[1] == 0.0):
        raise ZeroDirection("direction must be a nonzero 2-vector")
    sp = _as_points(s_plus, "S+")
    sm = _as_points(s_minus, "S-")
    return float((sp @ theta).min() - (sm @ theta).max())


def cloud_diameter(hull_plus: PlanarHull, hull_minus: PlanarHull) -> float:
    """M = max cross-pair distance; attained at hull vertices of each side."""
    diff = hull_plus.vertices[:, None, :] - hull_minus.vertices[None, :, :]
    return float(np.sqrt((diff * diff).sum(axis=2)).max())


def minkowski_difference(s_plus, s_minus) -> np.ndarray:
    """All pairwise differences u - v; conv() of these is the difference hull."""
    sp = _as_points(s_plus, "S+")
    sm = _as_points(s_minus, "S-")
    return (sp[:, None, :] - sm[None, :, :]).reshape(-1, 2)


def separation_certificate(s_plus, s_minus, method: str = "exact") -> SeparationCertificate:
    """Closest-pair separation test between the two lifted point clouds.

    ``method="exact"`` runs the polygon vertex/edge scan (the test oracle);
    ``method="qp"`` runs the shared convex-QP back-end at cap 1 (the path the
    fitting cascade uses).  Both start from an exact hull-intersection test,
    so touching or overlapping hulls are infeasible regardless of back-end.
    """
    sp = _as_points(s_plus, "S+")
    sm = _as_points(s_minus, "S-")
    if sp.shape[0] == 0 or sm.shape[0] == 0:
        raise EmptyClass("both classes must be nonempty")
    hull_p = convex_hull(sp)
    hull_m = convex_hull(sm)
    diameter = cloud_diameter(hull_p, hull_m)
    if hulls_intersect(hull_p, hull_m):
        return SeparationCertificate(feasible=False, margin=0.0, diameter=diameter)
    if method == "exact":
        dist, u, v = closest_pair_hulls(hull_p, hull_m)
    elif method == "qp":
        from .qpsolvers import rch_closest_point

        sol = rch_closest_point(sp, sm, 1.0, 1.0)
        if not sol.certified_separating:
            return SeparationCertificate(feasible=False, margin=0.0, diameter=diameter)
        dist, u, v = sol.distance, sol.u_star, sol.v_star
    else:
        raise ValueError(f"unknown method {method!r}")
    if dist <= FEASIBILITY_FLOOR:
        return SeparationCertificate(feasible=False, margin=0.0, diameter=diameter)
    return SeparationCertificate(
        feasible=True,
        margin=dist,
        diameter=diameter,
        theta_star=(u - v) / dist,
        u_star=np.asarray(u, dtype=np.float64),
        v_star=np.asarray(v, dtype=np.float64),
    )


def eta_for_zero_threshold(theta, s_plus, s_minus, b: float, B: float) -> float:
    """Constant-term coefficient placing the separated score interval around zero.

    eta = (-(l+ + h-)/2 - (1 - beta) b) / B with l+ the minimum positive-cloud
    projection and h- the maximum negative-cloud projection along theta.
    """
    if B == 0.0:
        raise NoOffsetControl("B = 0: eta cannot shift binary scores")
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    sp = _as_points(s_plus, "S+")
    sm = _as_points(s_minus, "S-")
    l_plus = float((sp @ theta).min())
    h_minus = float((sm @ theta).max())
    beta = float(theta[1])
    return (-(l_plus + h_minus) / 2.0 - (1.0 - beta) * b) / B


def quantization_check(cert: SeparationCertificate, theta_hat) -> QuantizationCheck:
    """Certify that a rounded direction keeps every calibration decision.

    Certified iff ||theta_hat - theta*|| < m*/M (strict); the returned bound
    m* - M ||delta|| lower-bounds the margin at the rounded direction.
    """
    if not cert.feasible:
        raise InfeasibleCertificate("quantization check needs a feasible certificate")
    delta = float(np.hypot(*(np.asarray(theta_hat, dtype=np.float64) - cert.theta_star)))
    bound = cert.margin - cert.diameter * delta
    certified = delta < cert.margin / cert.diameter
    return QuantizationCheck(certified=certified, margin_bound=bound)
