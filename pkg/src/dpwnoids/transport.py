"""Holomorphic transport of frames along paths, and monodromy.

The Cauchy problem d Phi = Phi xi is integrated over the truncated coefficient
vector (2 x 2 x (2N+1) complex numbers) with an embedded Dormand-Prince 5(4)
pair, adaptive steps, and relative tolerance ode_tol.  Paths are piecewise
lines and circular arcs; they must keep clear of the active potential's
singular set.

The rescaled monodromy divides log M by t (lambda-1)^2 / (4 lambda).  The
division is synthetic (two deflations at lambda = 1 after a shift), and both
the deflation remainders and the reconstruction residual are checked: failure
signals a violation of the closing conditions, not noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import (
    InvalidInputError,
    MonodromyStructureError,
    TransportError,
)
from .loops import LoopMatrix, loop_log
from .potential import PotentialSpec
from .weierstrass import NoidParams, period_loops

__all__ = [
    "PathSpec",
    "integrate",
    "integrate_with_info",
    "monodromy",
    "m_tilde",
    "m_tilde_at_zero",
    "DeviationPotential",
    "deviation_transport",
    "rescaled_monodromy_from_deviation",
    "end_loop",
    "route",
]

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200,
                187 / 2100, 1 / 40])


@dataclass(frozen=True)
class PathSpec:
    """Piecewise-smooth curve: ('line', a, b) and ('arc', center, r, th0, th1)."""

    segments: tuple

    def __post_init__(self):
        if not self.segments:
            raise InvalidInputError("a path needs at least one segment")
        object.__setattr__(self, "segments", tuple(self.segments))

    @staticmethod
    def line(a, b) -> "PathSpec":
        return PathSpec((("line", complex(a), complex(b)),))

    @staticmethod
    def polyline(points) -> "PathSpec":
        pts = [complex(p) for p in points]
        if len(pts) < 2:
            raise InvalidInputError("polyline needs at least two points")
        return PathSpec(tuple(("line", a, b) for a, b in zip(pts[:-1], pts[1:])))

    @staticmethod
    def circle(center, radius, start_angle=0.0, turns=1.0) -> "PathSpec":
        th0 = float(start_angle)
        return PathSpec((("arc", complex(center), float(radius),
                          th0, th0 + 2 * np.pi * float(turns)),))

    @staticmethod
    def keyhole(base, center, radius, turns=1.0) -> "PathSpec":
        """base -> circle entry -> full loop -> back; closed at base."""
        base, center = complex(base), complex(center)
        d = center - base
        if abs(d) <= radius:
            raise InvalidInputError("keyhole base lies inside the circle")
        th0 = float(np.angle(-d))
        entry = center + radius * np.exp(1j * th0)
        return PathSpec((
            ("line", base, entry),
            ("arc", center, float(radius), th0, th0 + 2 * np.pi * float(turns)),
            ("line", entry, base),
        ))

    @property
    def start(self) -> complex:
        return self._endpoint(self.segments[0], 0.0)

    @property
    def end(self) -> complex:
        return self._endpoint(self.segments[-1], 1.0)

    @staticmethod
    def _endpoint(seg, s):
        if seg[0] == "line":
            return seg[1] + (seg[2] - seg[1]) * s
        _, c, r, th0, th1 = seg
        return c + r * np.exp(1j * (th0 + (th1 - th0) * s))

    def is_closed(self, tol=1e-14) -> bool:
        return abs(self.start - self.end) <= tol

    def point(self, k, s):
        return self._endpoint(self.segments[k], s)

    def velocity(self, k, s):
        seg = self.segments[k]
        if seg[0] == "line":
            return seg[2] - seg[1]
        _, c, r, th0, th1 = seg
        return 1j * r * (th1 - th0) * np.exp(1j * (th0 + (th1 - th0) * s))

    def dense_points(self, per_segment=256) -> np.ndarray:
        s = np.linspace(0.0, 1.0, per_segment)
        return np.concatenate([
            np.array([self._endpoint(seg, v) for v in s]) for seg in self.segments])

    def min_clearance(self, points) -> float:
        """Exact distance to the nearest of the given points.

        Lines use the point-to-segment formula (dense sampling can miss a
        collinear pole entirely); arcs use the radial distance within the
        swept sector and endpoint distances outside it.
        """
        pts = np.asarray(points, dtype=complex).ravel()
        if pts.size == 0:
            return np.inf
        best = np.inf
        for seg in self.segments:
            if seg[0] == "line":
                a, b = seg[1], seg[2]
                d = b - a
                den = abs(d) ** 2
                if den == 0:
                    dist = np.abs(pts - a)
                else:
                    s = ((pts - a) * np.conj(d)).real / den
                    s = np.clip(s, 0.0, 1.0)
                    dist = np.abs(a + s * d - pts)
            else:
                _, c, r, th0, th1 = seg
                rel = pts - c
                ang = np.angle(rel)
                lo, hi = min(th0, th1), max(th0, th1)
                # smallest representative angle within [lo, lo + 2 pi)
                k = np.floor((ang - lo) / (2 * np.pi))
                ang_in = ang - 2 * np.pi * k
                inside = ang_in <= hi
                radial = np.abs(np.abs(rel) - r)
                ends = np.minimum(np.abs(pts - self._endpoint(seg, 0.0)),
                                  np.abs(pts - self._endpoint(seg, 1.0)))
                dist = np.where(inside, radial, ends)
            best = min(best, float(np.min(dist)))
        return best

    def reversed(self) -> "PathSpec":
        segs = []
        for seg in self.segments[::-1]:
            if seg[0] == "line":
                segs.append(("line", seg[2], seg[1]))
            else:
                _, c, r, th0, th1 = seg
                segs.append(("arc", c, r, th1, th0))
        return PathSpec(tuple(segs))

    def length(self) -> float:
        total = 0.0
        for seg in self.segments:
            if seg[0] == "line":
                total += abs(seg[2] - seg[1])
            else:
                total += abs(seg[4] - seg[3]) * seg[2]
        return total


def _segment_distance(a, b, pts):
    """Exact point-to-segment distances and projections for an array of points."""
    d = b - a
    den = abs(d) ** 2
    if den == 0:
        return np.abs(pts - a), np.full(len(pts), a)
    s = np.clip(((pts - a) * np.conj(d)).real / den, 0.0, 1.0)
    proj = a + s * d
    return np.abs(proj - pts), proj


def route(z0, z1, obstacles, clearance) -> PathSpec:
    """Straight segment from z0 to z1, bent around obstacles if necessary.

    The offending segment gets a detour vertex pushed away from the nearest
    obstacle; good enough for the benign geometry of spread-out poles.
    """
    pts = [complex(z0), complex(z1)]
    obs = np.asarray(obstacles, dtype=complex).ravel()
    if obs.size == 0:
        return PathSpec.line(z0, z1)
    for _ in range(40):
        worst = (np.inf, None, None, None)  # distance, segment, obstacle, projection
        for si, (a, b) in enumerate(zip(pts[:-1], pts[1:])):
            dist, proj = _segment_distance(a, b, obs)
            k = int(np.argmin(dist))
            if dist[k] < worst[0]:
                worst = (dist[k], si, obs[k], proj[k])
        if worst[0] >= clearance:
            return PathSpec.polyline(pts)
        _, seg, obstacle, proj = worst
        tangent = pts[seg + 1] - pts[seg]
        tangent = tangent / abs(tangent)
        away = proj - obstacle
        if abs(away) < 1e-12:  # obstacle sits on the path: sidestep it
            away = 1j * tangent
        away = away / abs(away)
        pts.insert(seg + 1, obstacle + away * 3.0 * clearance)
    raise TransportError("could not route a path clear of the singular set")


def _rhs(y, xi_arr):
    """(Phi xi) on coefficient arrays; truncated matrix Cauchy product."""
    n = (y.shape[2] - 1) // 2
    out = np.empty_like(y)
    for i in range(2):
        for j in range(2):
            acc = np.convolve(y[i, 0], xi_arr[0, j])
            acc += np.convolve(y[i, 1], xi_arr[1, j])
            out[i, j] = acc[n:-n] if n else acc
    return out


def integrate_with_info(xi: PotentialSpec, path: PathSpec, phi_start: LoopMatrix,
                        rtol: float = defaults.ODE_TOL,
                        check_clearance: bool = True):
    """Transport phi_start along the path; returns (LoopMatrix, info dict)."""
    if check_clearance:
        gap = path.min_clearance(xi.singular_points())
        if gap < defaults.PATH_CLEARANCE:
            raise TransportError(
                f"path comes within {gap:.2e} of the singular set")
    n = max(phi_start.degree, xi.degree)
    y = np.array(phi_start.pad_to(n).array, dtype=complex)
    xi_mass = 0.0
    atol = 1e-14
    steps = rejected = 0
    for k in range(len(path.segments)):
        s = 0.0
        h_prop = 0.05
        f_left = None
        while s < 1.0 - 1e-15:
            clipped = h_prop > 1.0 - s
            h = min(h_prop, 1.0 - s)
            if h < 1e-13:
                raise TransportError("step size underflow near the singular set",
                                     location=path.point(k, s))
            if f_left is None:
                arr, m0 = xi.coeff_array_at(path.point(k, s))
                xi_mass = max(xi_mass, m0)
                f_left = _rhs(y, arr) * path.velocity(k, s)
            ks = [f_left]
            for stage in range(1, 7):
                ys = y + h * sum(a * f for a, f in zip(_A[stage], ks))
                if stage == 6:
                    y_new = ys  # b-row equals the last a-row (first-same-as-last)
                arr, _ = xi.coeff_array_at(path.point(k, s + _C[stage] * h))
                ks.append(_rhs(ys, arr) * path.velocity(k, s + _C[stage] * h))
            err = h * sum((b5 - b4) * f for b5, b4, f in zip(_B5, _B4, ks))
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
            ratio = np.sqrt(np.mean((np.abs(err) / scale) ** 2))
            factor = float(np.clip(0.9 * (ratio + 1e-300) ** -0.2, 0.2, 5.0))
            if ratio <= 1.0:
                s += h
                y = y_new
                f_left = ks[6]  # FSAL
                steps += 1
                h_prop = max(h_prop, h * factor) if clipped else h * factor
            else:
                rejected += 1
                h_prop = h * factor
        # segment boundary: velocity changes discontinuously
        f_left = None
    tail = phi_start.tail + xi_mass * path.length() * float(np.max(np.abs(y)))
    out = LoopMatrix(phi_start.rho, y, det_tag=phi_start.det_tag, tail=tail)
    info = {"steps": steps, "rejected": rejected, "det_defect": out.det_defect()}
    return out, info


def integrate(xi: PotentialSpec, path: PathSpec, phi_start: LoopMatrix,
              rtol: float = defaults.ODE_TOL, check_clearance: bool = True) -> LoopMatrix:
    phi, _ = integrate_with_info(xi, path, phi_start, rtol, check_clearance)
    return phi


def monodromy(xi: PotentialSpec, loop_path: PathSpec, phi0: LoopMatrix,
              rtol: float = defaults.ODE_TOL) -> LoopMatrix:
    """M = Phi(end) Phi(start)^{-1} along a closed path based where phi0 lives."""
    if not loop_path.is_closed(1e-12):
        raise InvalidInputError("monodromy requires a closed path")
    phi_end = integrate(xi, loop_path, phi0, rtol=rtol)
    return phi_end @ phi0.inverse()


def end_loop(x: NoidParams, i: int, z0, radius_factor: float = 4.0) -> PathSpec:
    """Generator of the fundamental group around the i-th end, based at z0."""
    from .weierstrass import period_contour_radius

    cp = x.central()
    eps = period_contour_radius(cp)
    return PathSpec.keyhole(z0, cp.p[i], radius_factor * eps)


def _deflate_at_one(p: np.ndarray) -> tuple[np.ndarray, complex]:
    """Divide an ascending-coefficient polynomial by (lambda - 1)."""
    d = p.shape[0] - 1
    q = np.zeros(d, dtype=complex)
    acc = 0.0j
    for k in range(d - 1, -1, -1):
        acc = p[k + 1] + acc
        q[k] = acc
    rem = p[0] + q[0]
    return q, rem


def _divide_shifted_square(u: np.ndarray, div_tol: float, scale: float) -> np.ndarray:
    """Coefficients of (lambda u) / (lambda - 1)^2 for one entry array u.

    Certifies that u and its derivative vanish at lambda = 1 within div_tol,
    removes that certified-zero affine component exactly, and deflates twice.
    Returns the quotient in the same [-n, n] layout.
    """
    n = (u.shape[0] - 1) // 2
    powers = np.arange(-n, n + 1)
    val1 = u.sum()
    der1 = (powers * u).sum()
    if max(abs(val1), abs(der1)) > div_tol * scale:
        raise MonodromyStructureError(
            f"loop is not flat at lambda=1: value {abs(val1):.2e}, "
            f"derivative {abs(der1):.2e} (closing conditions violated)")
    # the stored array read as an ascending polynomial is p = lambda^n u,
    # so p(1) = val1 and p'(1) = n val1 + der1
    p = np.array(u)
    b_lin = n * val1 + der1
    p[0] -= val1 - b_lin
    p[1] -= b_lin
    q1, _ = _deflate_at_one(p)
    q2, _ = _deflate_at_one(q1)
    out = np.zeros_like(u)
    out[1: 2 * n] = q2
    return out


def m_tilde(t: float, m: LoopMatrix,
            div_tol: float = 1e-9) -> LoopMatrix:
    """(4 lambda / (t (lambda-1)^2)) log M, checked for exact divisibility.

    The value and first derivative of log M at lambda = 1 are certified to be
    below div_tol and then removed exactly (they vanish identically for a
    valid monodromy); dividing them instead of removing them would smear the
    certified defect over every power, amplified by 4/t.
    """
    if t == 0.0:
        raise InvalidInputError("use m_tilde_at_zero for the t = 0 limit")
    logm = loop_log(m)
    scale = 1.0 + float(np.max(np.abs(logm.array)))
    arr = np.zeros_like(logm.array)
    for i in range(2):
        for j in range(2):
            arr[i, j] = _divide_shifted_square(logm.array[i, j], div_tol, scale)
    out = LoopMatrix(logm.rho, arr * (4.0 / t), det_tag=False, tail=logm.tail)
    # reconstruction residual: (lambda - 2 + 1/lambda) times the division
    # result must reproduce log M
    back_full = -2.0 * arr
    back_full[:, :, :-1] += arr[:, :, 1:]      # * lambda^{-1}
    back_full[:, :, 1:] += arr[:, :, :-1]      # * lambda
    resid = float(np.max(np.abs(back_full - logm.array)))
    if resid > div_tol * scale:
        raise MonodromyStructureError(
            f"rescaled monodromy does not reconstruct log M: residual {resid:.2e}")
    return out


def m_tilde_at_zero(x: NoidParams, i: int, degree: int | None = None,
                    quad_tol: float = defaults.QUAD_TOL) -> LoopMatrix:
    """Limit of the rescaled monodromy at t = 0: the loop-valued period matrix."""
    p0, p1, p2 = period_loops(x, i, degree=degree, quad_tol=quad_tol)
    return LoopMatrix.from_entries([[p1, p2], [-p0, -p1]])


class DeviationPotential:
    """Conjugated coupling for the variation-of-constants frame.

    The flow splits as Phi = V Phi_0 with Phi_0 the closed-form solution of
    the lower-triangular part (single valued in z), so the monodromy is
    carried entirely by V = I + t W.  W solves  dW = xihat + t W xihat  with
    the t-independent

        xihat = (lambda-1)^2/(4 lambda) omega [[g, g^2], [-1, -g]],

    whose entries are pole-free away from the ends (the gauge zeros are
    apparent here).  Transporting W instead of Phi removes the 1/t error
    amplification from the rescaled monodromy.
    """

    def __init__(self, x: NoidParams, degree: int | None = None):
        from .potential import NnoidPotential

        self.x = x
        self.inner = NnoidPotential(1.0, x, degree)  # samplers only; t unused
        self.rho = x.rho
        self.degree = self.inner.degree
        self.grid = self.inner.grid
        self._ends = self.inner._ends

    def singular_points(self):
        return self._ends

    def coeff_array_at(self, z):
        from .loops import coeffs_from_samples, grid_points

        k = self.grid
        lams = grid_points(k)
        a_v, b_v, _, _, prod = self.inner._rational_samples(z, k)
        q = 0.25 * (lams - 1.0) ** 2 / lams / prod
        out = np.empty((2, 2, k), dtype=complex)
        out[0, 0] = q * a_v * b_v
        out[0, 1] = q * a_v * a_v
        out[1, 0] = -q * b_v * b_v
        out[1, 1] = -q * a_v * b_v
        arr, alias = coeffs_from_samples(out, self.degree)
        n = self.degree
        stray = float(np.max(np.abs(arr[:, :, : n - 1])))
        arr[:, :, : n - 1] = 0.0  # all entries have minimal power -1
        return arr, alias + stray


def deviation_transport(dev: DeviationPotential, path: PathSpec, t: float,
                        rtol: float = defaults.ODE_TOL) -> LoopMatrix:
    """Integrate dW = xihat + t W xihat along the path, from W = 0.

    The result W gives the frame deviation V = I + t W; for a closed path
    based at the start frame's point, the monodromy is M = I + t W(end).
    """
    gap = path.min_clearance(dev.singular_points())
    if gap < defaults.PATH_CLEARANCE:
        raise TransportError(f"path comes within {gap:.2e} of the singular set")
    n = dev.degree
    w = np.zeros((2, 2, 2 * n + 1), dtype=complex)
    atol = 1e-14
    for k in range(len(path.segments)):
        s = 0.0
        h_prop = 0.05
        f_left = None
        while s < 1.0 - 1e-15:
            clipped = h_prop > 1.0 - s
            h = min(h_prop, 1.0 - s)
            if h < 1e-13:
                raise TransportError("step size underflow near the singular set",
                                     location=path.point(k, s))
            if f_left is None:
                arr, _ = dev.coeff_array_at(path.point(k, s))
                f_left = (arr + t * _rhs(w, arr)) * path.velocity(k, s)
            ks = [f_left]
            for stage in range(1, 7):
                ys = w + h * sum(a * f for a, f in zip(_A[stage], ks))
                if stage == 6:
                    w_new = ys
                arr, _ = dev.coeff_array_at(path.point(k, s + _C[stage] * h))
                ks.append((arr + t * _rhs(ys, arr)) * path.velocity(k, s + _C[stage] * h))
            err = h * sum((b5 - b4) * f for b5, b4, f in zip(_B5, _B4, ks))
            scale = atol + rtol * np.maximum(np.abs(w), np.abs(w_new))
            ratio = np.sqrt(np.mean((np.abs(err) / scale) ** 2))
            factor = float(np.clip(0.9 * (ratio + 1e-300) ** -0.2, 0.2, 5.0))
            if ratio <= 1.0:
                s += h
                w = w_new
                f_left = ks[6]
                h_prop = max(h_prop, h * factor) if clipped else h * factor
            else:
                h_prop = h * factor
        f_left = None
    return LoopMatrix(dev.rho, w)


def rescaled_monodromy_from_deviation(t: float, w: LoopMatrix,
                                      div_tol: float = 1e-9) -> LoopMatrix:
    """M-tilde from the deviation: (4 lambda/(lambda-1)^2) log(I + t W)/t.

    log(I + t W)/t is summed as W - t W^2/2 + t^2 W^3/3 - ..., which stays
    O(1)-conditioned for small t; the division certifies flatness at
    lambda = 1 exactly as in m_tilde.
    """
    term = w
    series = w
    for k in range(2, 40):
        term = (term @ w) * (-t * (k - 1) / k)
        series = series + term
        if term.norm() < 1e-16 * max(1.0, series.norm()):
            break
    scale = 1.0 + float(np.max(np.abs(series.array)))
    arr = np.zeros_like(series.array)
    for i in range(2):
        for j in range(2):
            arr[i, j] = _divide_shifted_square(series.array[i, j], div_tol, scale)
    return LoopMatrix(w.rho, 4.0 * arr, det_tag=False, tail=series.tail)
