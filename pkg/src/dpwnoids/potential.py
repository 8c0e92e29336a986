"""DPW potentials and gauges.

A potential spec evaluates, for z off its singular set, the dz-coefficient of
a traceless 2x2 loop 1-form.  The (1,2) entry may carry one negative lambda
power; every other entry lives in W^{>=0}.  Internally everything is sampled
pointwise on a uniform circle grid in lambda and folded back to coefficients,
which keeps gauging and composition cheap and exact up to aliasing.

Gauges are holomorphic maps into the positive loop subgroup; their action is
xi . G = G^{-1} xi G + G^{-1} dG, with dG computed analytically for every
closed form used here (product/inverse rules cover compositions).
"""

from __future__ import annotations

import numpy as np

from . import defaults
from .errors import (
    GaugeError,
    InvalidBasepointError,
    InvalidInputError,
    PoleError,
)
from .loops import (
    LaurentLoop,
    LoopMatrix,
    coeffs_from_samples,
    constant_loop,
    grid_points,
    grid_size,
    samples_from_coeffs,
)
from .weierstrass import NoidParams

__all__ = [
    "PotentialSpec",
    "NnoidPotential",
    "DelaunayPotential",
    "GaugedPotential",
    "ShiftedPotential",
    "PulledBackPotential",
    "GaugeSpec",
    "RegularityGauge",
    "EndGauge",
    "MoebiusGauge",
    "ConstantGauge",
    "ComposedGauge",
    "InverseGauge",
    "xi_nnoid",
    "initial_condition",
    "gauge_apply",
    "regularity_gauge",
    "xi_delaunay",
    "rs_solve",
    "rs_derivative",
    "end_gauge",
    "default_basepoint",
    "SqrtBranch",
]


def _batch_inv(mats):
    """Pointwise inverse of an array shaped (2, 2, K)."""
    return np.linalg.inv(mats.transpose(2, 0, 1)).transpose(1, 2, 0)


class _Sampler:
    """Circle-grid samples of a family of loops, lazily cached per grid size."""

    def __init__(self, coeff_rows: np.ndarray):
        self.rows = np.asarray(coeff_rows, dtype=complex)  # (m, 2N+1)
        self._cache: dict[int, np.ndarray] = {}

    def at(self, k: int) -> np.ndarray:
        got = self._cache.get(k)
        if got is None:
            got = samples_from_coeffs(self.rows, k)
            self._cache[k] = got
        return got


def _fold(samples, degree, min_power_12=-1, shape_tol=1e-7):
    """Samples (2, 2, K) -> coefficient array with the potential shape enforced.

    Coefficients below the allowed minimal power are zeroed; if their mass is
    large relative to the entry this is a structural error, not noise.
    """
    arr, alias = coeffs_from_samples(samples, degree)
    n = degree
    scale = 1.0 + float(np.max(np.abs(arr)))
    spurious = 0.0
    for i in range(2):
        for j in range(2):
            cut = n + min_power_12 if (i, j) == (0, 1) else n
            mass = float(np.sum(np.abs(arr[i, j, :cut])))
            spurious = max(spurious, mass)
            arr[i, j, :cut] = 0.0
    if spurious > shape_tol * scale:
        raise GaugeError(
            f"potential violates the lambda-power shape: stray mass {spurious:.3e}")
    return arr, alias + spurious


class PotentialSpec:
    """Base class; concrete specs fill in sampling and the singular set."""

    rho: float
    degree: int
    grid: int

    def sample_at(self, z, lams) -> np.ndarray:
        raise NotImplementedError

    def singular_points(self) -> np.ndarray:
        raise NotImplementedError

    def singular_kinds(self) -> list[str]:
        return ["end"] * len(self.singular_points())

    def clearance(self, z) -> float:
        pts = self.singular_points()
        if len(pts) == 0:
            return np.inf
        return float(np.min(np.abs(np.asarray(pts) - z)))

    def guard(self, z):
        pts = self.singular_points()
        if len(pts) == 0:
            return
        d = np.abs(np.asarray(pts) - z)
        k = int(np.argmin(d))
        if d[k] < defaults.POLE_CLEARANCE:
            raise PoleError(f"sample z={z} within {d[k]:.2e} of a pole",
                            location=pts[k], kind=self.singular_kinds()[k])

    def coeff_array_at(self, z) -> tuple[np.ndarray, float]:
        self.guard(z)
        samples = self.sample_at(z, grid_points(self.grid))
        return _fold(samples, self.degree)

    def matrix_at(self, z) -> LoopMatrix:
        arr, tail = self.coeff_array_at(z)
        return LoopMatrix(self.rho, arr, det_tag=False, tail=tail)

    def beta_zero(self, z) -> complex:
        """lambda^{-1} coefficient of the (1,2) entry; its zeros are branch points."""
        arr, _ = self.coeff_array_at(z)
        return complex(arr[0, 1, self.degree - 1])


class NnoidPotential(PotentialSpec):
    """Family deforming a minimal n-noid: off-diagonal with t (lambda-1)^2 / lambda."""

    def __init__(self, t: float, x: NoidParams, degree: int | None = None):
        self.t = float(t)
        self.x = x
        self.rho = x.rho
        self.degree = degree if degree is not None else max(x.degree, 2)
        if self.degree < x.degree:
            raise InvalidInputError("potential truncation below the parameter degree")
        self.grid = grid_size(self.degree)
        pad = lambda loops: np.stack([l.pad_to(self.degree).coeffs for l in loops])
        self._a = _Sampler(pad(x.a))
        self._b = _Sampler(pad(x.b))
        self._p = _Sampler(pad(x.p))
        central = x.central()
        self._ends = np.array(central.p)
        self._b_roots = central.b_roots()
        self._n = x.n

    def singular_points(self) -> np.ndarray:
        return np.concatenate([self._ends, self._b_roots])

    def singular_kinds(self):
        return ["end"] * len(self._ends) + ["gauge-zero"] * len(self._b_roots)

    def _rational_samples(self, z, k, origin=None):
        """A, B, dA, dB, prod (z-p_i)^2 on the k-point lambda grid.

        With origin = index i, z is an offset from the central value of the
        i-th end; the factor z - p_i is then formed without cancellation.
        """
        n = self._n
        a_s, b_s, p_s = self._a.at(k), self._b.at(k), self._p.at(k)
        zz = z if origin is None else z + self._ends[origin]
        powers = [1.0]
        for _ in range(n - 1):
            powers.append(powers[-1] * zz)
        a_v = sum(a_s[i] * powers[n - 1 - i] for i in range(n))
        b_v = sum(b_s[i] * powers[n - 1 - i] for i in range(n))
        da_v = sum((n - 1 - i) * a_s[i] * powers[n - 2 - i] for i in range(n - 1))
        db_v = sum((n - 1 - i) * b_s[i] * powers[n - 2 - i] for i in range(n - 1))
        prod = np.ones(k, dtype=complex)
        for j in range(n):
            if origin is not None and j == origin:
                factor = z - (p_s[j] - self._ends[origin])
            else:
                factor = zz - p_s[j]
            prod = prod * factor ** 2
        return a_v, b_v, da_v, db_v, prod

    def sample_at(self, z, lams, origin=None) -> np.ndarray:
        k = len(lams)
        a_v, b_v, da_v, db_v, prod = self._rational_samples(z, k, origin)
        omega = b_v * b_v / prod
        dg = (da_v * b_v - a_v * db_v) / (b_v * b_v)
        out = np.zeros((2, 2, k), dtype=complex)
        out[0, 1] = (0.25 * self.t) * (lams - 1.0) ** 2 / lams * omega
        out[1, 0] = dg
        return out

    def beta_zero(self, z) -> complex:
        self.guard(z)
        cp = self.x.at_lambda(0.0)
        return 0.25 * self.t * complex(cp.omega(z))


class ShiftedPotential(PotentialSpec):
    """View of an n-noid potential in the chart centered at one end.

    Coordinates are offsets from the central end position, so samples can
    approach the end to ~1e-13 without catastrophic cancellation.
    """

    def __init__(self, base: NnoidPotential, end_index: int):
        if not isinstance(base, NnoidPotential):
            raise InvalidInputError("shifted charts exist for n-noid potentials only")
        self.base = base
        self.end = int(end_index)
        self.rho = base.rho
        self.degree = base.degree
        self.grid = base.grid

    def singular_points(self) -> np.ndarray:
        return self.base.singular_points() - self.base._ends[self.end]

    def singular_kinds(self):
        return self.base.singular_kinds()

    def sample_at(self, z, lams) -> np.ndarray:
        return self.base.sample_at(z, lams, origin=self.end)


def rs_solve(u: float) -> tuple[float, float, str]:
    """Solve r+s = 1/2, rs = u, r < s.  Returns (r, s, kind).

    kind is "interior" for u < 1/16 and "boundary" at the double root, where
    the r < s normal form fails.
    """
    u = float(u)
    disc = 1.0 - 16.0 * u
    if disc < -1e-14:
        raise InvalidInputError(f"no real Delaunay parameters for u={u} > 1/16")
    if abs(disc) <= 1e-14:
        return 0.25, 0.25, "boundary"
    root = np.sqrt(disc)
    return (1.0 - root) / 4.0, (1.0 + root) / 4.0, "interior"


def rs_derivative(u: float) -> tuple[float, float]:
    """d(r, s)/du along the interior branch."""
    disc = 1.0 - 16.0 * u
    if disc <= 0:
        raise InvalidInputError("derivative undefined at or past the boundary u = 1/16")
    return 2.0 / np.sqrt(disc), -2.0 / np.sqrt(disc)


class DelaunayPotential(PotentialSpec):
    """Standard Delaunay potential: constant residue matrix over dz/z."""

    def __init__(self, t: float, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION):
        self.t = float(t)
        self.rho = rho
        self.degree = degree
        self.grid = grid_size(degree)
        self.r, self.s, self.kind = rs_solve(t)

    def residue(self) -> LoopMatrix:
        zero = constant_loop(0.0, self.rho, self.degree)
        up = LaurentLoop(self.rho, _mono(-1, self.r, self.degree) + _mono(0, self.s, self.degree))
        lo = LaurentLoop(self.rho, _mono(+1, self.r, self.degree) + _mono(0, self.s, self.degree))
        return LoopMatrix.from_entries([[zero, up], [lo, zero]])

    def singular_points(self) -> np.ndarray:
        return np.array([0.0j])

    def sample_at(self, z, lams) -> np.ndarray:
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 1] = (self.r / lams + self.s) / z
        out[1, 0] = (self.r * lams + self.s) / z
        return out

    def beta_zero(self, z) -> complex:
        self.guard(z)
        return self.r / z


def _mono(power, value, degree):
    c = np.zeros(2 * degree + 1, dtype=complex)
    c[power + degree] = value
    return c


# -- gauges -----------------------------------------------------------------

class GaugeSpec:
    """Holomorphic map into the positive loop subgroup, with analytic derivative."""

    rho: float
    degree: int
    grid: int

    def sample_at(self, z, lams) -> np.ndarray:
        raise NotImplementedError

    def d_sample_at(self, z, lams) -> np.ndarray:
        raise NotImplementedError

    def matrix_at(self, z) -> LoopMatrix:
        samples = self.sample_at(z, grid_points(self.grid))
        arr, mass = coeffs_from_samples(samples, self.degree)
        return LoopMatrix(self.rho, arr, det_tag=True, tail=mass)

    def inverse(self) -> "GaugeSpec":
        return InverseGauge(self)

    def compose(self, other: "GaugeSpec") -> "GaugeSpec":
        return ComposedGauge(self, other)


class RegularityGauge(GaugeSpec):
    """Removes the apparent singularity at zeros of the gauss-map denominator."""

    def __init__(self, x: NoidParams, degree: int | None = None):
        self.x = x
        self.rho = x.rho
        self.degree = degree if degree is not None else max(x.degree, 2)
        self.grid = grid_size(self.degree)
        pad = lambda loops: np.stack([l.pad_to(self.degree).coeffs for l in loops])
        self._a = _Sampler(pad(x.a))
        self._b = _Sampler(pad(x.b))
        self._n = x.n

    def _g_and_dg(self, z, k):
        n = self._n
        a_s, b_s = self._a.at(k), self._b.at(k)
        powers = [1.0]
        for _ in range(n - 1):
            powers.append(powers[-1] * z)
        a_v = sum(a_s[i] * powers[n - 1 - i] for i in range(n))
        b_v = sum(b_s[i] * powers[n - 1 - i] for i in range(n))
        da_v = sum((n - 1 - i) * a_s[i] * powers[n - 2 - i] for i in range(n - 1))
        db_v = sum((n - 1 - i) * b_s[i] * powers[n - 2 - i] for i in range(n - 1))
        if np.min(np.abs(a_v)) < 1e-12 * (1 + float(np.max(np.abs(a_v)))):
            raise GaugeError(f"regularity gauge undefined where the gauss map vanishes (z={z})")
        g = a_v / b_v
        dg = (da_v * b_v - a_v * db_v) / (b_v * b_v)
        return g, dg

    def sample_at(self, z, lams):
        g, _ = self._g_and_dg(z, len(lams))
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = 1.0 / g
        out[0, 1] = -1.0
        out[1, 1] = g
        return out

    def d_sample_at(self, z, lams):
        g, dg = self._g_and_dg(z, len(lams))
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = -dg / g ** 2
        out[1, 1] = dg
        return out


class SqrtBranch:
    """sqrt with the cut rotated away from the angular span of a path."""

    def __init__(self, cut_angle: float = np.pi):
        self.cut = float(cut_angle)

    def __call__(self, w):
        w = np.asarray(w, dtype=complex)
        theta = np.angle(w * np.exp(-1j * (self.cut + np.pi))) + self.cut + np.pi
        return np.sqrt(np.abs(w)) * np.exp(0.5j * theta)

    @staticmethod
    def avoiding(angles) -> "SqrtBranch":
        """Place the cut in the widest angular gap of the given directions."""
        a = np.sort(np.mod(np.asarray(angles, dtype=float), 2 * np.pi))
        if a.size == 0:
            return SqrtBranch()
        gaps = np.diff(np.concatenate([a, [a[0] + 2 * np.pi]]))
        k = int(np.argmax(gaps))
        if gaps[k] < np.pi / 8:
            raise InvalidInputError("path directions leave no room for a branch cut")
        return SqrtBranch(a[k] + gaps[k] / 2.0)


class EndGauge(GaugeSpec):
    """Upper-triangular gauge normalizing a simple pole to the Delaunay residue.

    k is the loop sqrt(r lambda + s) (a constant works too); the sqrt(w)
    branch must be kept away from the path, which the caller controls.
    """

    def __init__(self, k, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION,
                 branch: SqrtBranch | None = None):
        if isinstance(k, LaurentLoop):
            self.rho = k.rho
            self.degree = max(k.degree, 2)
            self._k = _Sampler(k.coeffs[None, :])
        else:
            if k == 0:
                raise InvalidInputError("gauge scale k must be invertible")
            self.rho = rho
            self.degree = degree
            self._k = None
            self._k_const = complex(k)
        self.grid = grid_size(self.degree)
        self.branch = branch if branch is not None else SqrtBranch()

    def _k_at(self, k_grid):
        if self._k is None:
            return np.full(k_grid, self._k_const)
        vals = self._k.at(k_grid)[0]
        if np.min(np.abs(vals)) < 1e-13:
            raise InvalidInputError("gauge scale k must be invertible on the circle")
        return vals

    def sample_at(self, w, lams):
        if w == 0:
            raise GaugeError("end gauge undefined at w = 0")
        kv = self._k_at(len(lams))
        rw = self.branch(w)
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = kv / rw
        out[0, 1] = -1.0 / (2.0 * kv * rw)
        out[1, 1] = rw / kv
        return out

    def d_sample_at(self, w, lams):
        kv = self._k_at(len(lams))
        rw = self.branch(w)
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = -kv / (2.0 * w * rw)
        out[0, 1] = 1.0 / (4.0 * kv * w * rw)
        out[1, 1] = 1.0 / (2.0 * kv * rw)
        return out


class MoebiusGauge(GaugeSpec):
    """Gauge paired with the chart z -> z/(pz+q); the identity at z = 0."""

    def __init__(self, p, q, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION):
        if q == 0:
            raise InvalidInputError("q must be nonzero")
        self.p, self.q = complex(p), complex(q)
        self.rho, self.degree = rho, degree
        self.grid = grid_size(degree)

    def _scalar(self, z):
        ratio = self.p * z / self.q
        if abs(ratio) >= 1.0:
            raise GaugeError("moebius gauge sampled outside its chart")
        # branch fixed by G(0) = I: sqrt(q(pz+q)) = q sqrt(1 + pz/q)
        return self.q * np.sqrt(1.0 + ratio)

    def sample_at(self, z, lams):
        f = 1.0 / self._scalar(z)
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = f * (self.p * z + self.q)
        out[0, 1] = f * (self.p * z)
        out[1, 1] = f * self.q
        return out

    def d_sample_at(self, z, lams):
        f = 1.0 / self._scalar(z)
        half = self.p / (2.0 * (self.p * z + self.q))
        out = np.zeros((2, 2, len(lams)), dtype=complex)
        out[0, 0] = f * (self.p - half * (self.p * z + self.q))
        out[0, 1] = f * (self.p - half * self.p * z)
        out[1, 1] = f * (-half * self.q)
        return out

    def chart(self, z):
        return z / (self.p * z + self.q)

    def d_chart(self, z):
        return self.q / (self.p * z + self.q) ** 2


class ConstantGauge(GaugeSpec):
    def __init__(self, mat, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION):
        self.mat = np.asarray(mat, dtype=complex)
        self.rho, self.degree = rho, degree
        self.grid = grid_size(degree)

    def sample_at(self, z, lams):
        return np.repeat(self.mat[:, :, None], len(lams), axis=2)

    def d_sample_at(self, z, lams):
        return np.zeros((2, 2, len(lams)), dtype=complex)


class ComposedGauge(GaugeSpec):
    def __init__(self, first: GaugeSpec, second: GaugeSpec):
        if first.rho != second.rho:
            raise InvalidInputError("mixed weights in gauge composition")
        self.first, self.second = first, second
        self.rho = first.rho
        self.degree = max(first.degree, second.degree)
        self.grid = max(first.grid, second.grid)

    def sample_at(self, z, lams):
        a = self.first.sample_at(z, lams).transpose(2, 0, 1)
        b = self.second.sample_at(z, lams).transpose(2, 0, 1)
        return (a @ b).transpose(1, 2, 0)

    def d_sample_at(self, z, lams):
        a = self.first.sample_at(z, lams).transpose(2, 0, 1)
        b = self.second.sample_at(z, lams).transpose(2, 0, 1)
        da = self.first.d_sample_at(z, lams).transpose(2, 0, 1)
        db = self.second.d_sample_at(z, lams).transpose(2, 0, 1)
        return (da @ b + a @ db).transpose(1, 2, 0)


class InverseGauge(GaugeSpec):
    def __init__(self, base: GaugeSpec):
        self.base = base
        self.rho, self.degree, self.grid = base.rho, base.degree, base.grid

    def sample_at(self, z, lams):
        return _batch_inv(self.base.sample_at(z, lams))

    def d_sample_at(self, z, lams):
        inv = _batch_inv(self.base.sample_at(z, lams)).transpose(2, 0, 1)
        d = self.base.d_sample_at(z, lams).transpose(2, 0, 1)
        return (-inv @ d @ inv).transpose(1, 2, 0)


class GaugedPotential(PotentialSpec):
    """xi . G = G^{-1} xi G + G^{-1} dG.

    For the regularity gauge acting on its own n-noid potential the action is
    evaluated in closed form, [[0, mu A^2/prod], [(A'B - AB')/A^2, 0]]: the
    generic pointwise product would cancel the pole at the B-roots only up to
    roundoff, which is exactly where this potential needs to be evaluated.
    """

    def __init__(self, base: PotentialSpec, gauge: GaugeSpec):
        if base.rho != gauge.rho:
            raise InvalidInputError("potential and gauge weights differ")
        self.base, self.gauge = base, gauge
        self.rho = base.rho
        self.degree = max(base.degree, gauge.degree)
        self.grid = max(base.grid, gauge.grid)
        self._closed_form = (isinstance(base, NnoidPotential)
                             and isinstance(gauge, RegularityGauge)
                             and gauge.x is base.x)

    def singular_points(self) -> np.ndarray:
        if self._closed_form:
            central = self.base.x.central()
            a_roots = np.roots(central.a) if self.base._n > 1 else np.array([])
            return np.concatenate([self.base._ends, np.atleast_1d(a_roots)])
        return self.base.singular_points()

    def singular_kinds(self):
        if self._closed_form:
            n_roots = len(self.singular_points()) - len(self.base._ends)
            return ["end"] * len(self.base._ends) + ["gauge-zero"] * n_roots
        return self.base.singular_kinds()

    def guard(self, z):
        pass  # the whole point of gauging is evaluation near removable poles

    def sample_at(self, z, lams):
        if self._closed_form:
            k = len(lams)
            a_v, b_v, da_v, db_v, prod = self.base._rational_samples(z, k)
            out = np.zeros((2, 2, k), dtype=complex)
            out[0, 1] = (0.25 * self.base.t) * (lams - 1.0) ** 2 / lams * (a_v * a_v / prod)
            out[1, 0] = (da_v * b_v - a_v * db_v) / (a_v * a_v)
            return out
        xi = self.base.sample_at(z, lams).transpose(2, 0, 1)
        g = self.gauge.sample_at(z, lams).transpose(2, 0, 1)
        dg = self.gauge.d_sample_at(z, lams).transpose(2, 0, 1)
        ginv = np.linalg.inv(g)
        return (ginv @ xi @ g + ginv @ dg).transpose(1, 2, 0)


class PulledBackPotential(PotentialSpec):
    """Potential in a new coordinate: xi(h(v)) h'(v), for scalar charts h."""

    def __init__(self, base: PotentialSpec, h, dh, singular=()):
        self.base = base
        self.h, self.dh = h, dh
        self.rho, self.degree, self.grid = base.rho, base.degree, base.grid
        self._singular = np.asarray(singular, dtype=complex)

    def singular_points(self) -> np.ndarray:
        return self._singular

    def guard(self, z):
        pass

    def sample_at(self, v, lams):
        return self.base.sample_at(self.h(v), lams) * self.dh(v)


# -- module-level operations -------------------------------------------------

def xi_nnoid(t: float, x: NoidParams, z) -> LoopMatrix:
    return NnoidPotential(t, x).matrix_at(z)


def initial_condition(x: NoidParams, z0, degree: int | None = None) -> LoopMatrix:
    """Start frame [[g(z0, .), 1], [-1, 0]]; unimodular by construction."""
    deg = degree if degree is not None else max(x.degree, 2)
    pot = NnoidPotential(0.0, x, deg)
    if pot.clearance(z0) < 100 * defaults.POLE_CLEARANCE:
        raise InvalidBasepointError(f"base point {z0} sits on the singular set")
    k = grid_size(deg)
    a_v, b_v, _, _, _ = pot._rational_samples(z0, k)
    gc, mass = coeffs_from_samples(a_v / b_v, deg)
    arr = np.zeros((2, 2, 2 * deg + 1), dtype=complex)
    arr[0, 0] = gc
    arr[0, 1, deg] = 1.0
    arr[1, 0, deg] = -1.0
    return LoopMatrix(x.rho, arr, det_tag=True, tail=mass)


def gauge_apply(xi: PotentialSpec, gauge: GaugeSpec) -> GaugedPotential:
    return GaugedPotential(xi, gauge)


def regularity_gauge(x: NoidParams, z) -> LoopMatrix:
    return RegularityGauge(x).matrix_at(z)


def xi_delaunay(t: float, z, rho: float = defaults.RHO,
                degree: int = defaults.TRUNCATION) -> LoopMatrix:
    return DelaunayPotential(t, rho, degree).matrix_at(z)


def end_gauge(w, k, branch: SqrtBranch | None = None) -> LoopMatrix:
    return EndGauge(k, branch=branch).matrix_at(w)


def default_basepoint(x: NoidParams) -> tuple[complex, bool]:
    """z0 = 0 when it clears the singular set, else a nudged centroid.

    The second value flags that the fallback was used, so reports can say so.
    """
    from .weierstrass import period_contour_radius

    pot = NnoidPotential(0.0, x)
    cp = x.central()
    eps = period_contour_radius(cp)
    if pot.clearance(0.0) > eps:
        return 0.0 + 0.0j, False
    z = complex(np.mean(cp.p))
    step = 0.37 * eps
    for k in range(64):
        if pot.clearance(z) > eps:
            return z, True
        z += step * np.exp(0.61803398875j * 2 * np.pi * k)
    raise InvalidBasepointError("could not find a clear base point")
