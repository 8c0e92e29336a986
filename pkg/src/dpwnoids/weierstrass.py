"""Weierstrass data of minimal n-noids: periods, flux, non-degeneracy.

The Gauss map is g = A(z)/B(z) with A, B polynomials of degree n-1 whose
coefficients (together with the end positions p_i) form the parameter vector.
Parameters may be loop-valued (entries of W^{>=0}); most of the number
crunching happens on constant snapshots x(lambda).

Periods P_{i,k} = contour integral of g^k omega around the i-th end are
computed by the trapezoid rule on circles, with node doubling until two
successive estimates agree to quad_tol.  That is spectrally accurate because
the integrands are analytic on the contours.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .errors import (
    ConstructionError,
    InvalidInputError,
    PoleError,
    QuadratureError,
)
from .loops import LaurentLoop, constant_loop, plus_value

__all__ = [
    "NoidParams",
    "ConstantParams",
    "PeriodTable",
    "eval_g",
    "eval_omega",
    "periods",
    "period_contour_radius",
    "contour_integrals",
    "nondegeneracy_rank",
    "jorge_meeks",
    "gauss_direction",
]


@dataclass(frozen=True)
class ConstantParams:
    """One lambda-snapshot of the parameters: plain complex vectors."""

    a: np.ndarray
    b: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        for name in ("a", "b", "p"):
            v = np.asarray(getattr(self, name), dtype=complex)
            v.flags.writeable = False
            object.__setattr__(self, name, v)
        if not (len(self.a) == len(self.b) == len(self.p)):
            raise InvalidInputError("a, b, p must have equal length n")

    @property
    def n(self) -> int:
        return len(self.p)

    # polynomial evaluations; all accept scalars or arrays in z
    def A(self, z):
        return np.polyval(self.a, z)

    def B(self, z):
        return np.polyval(self.b, z)

    def dA(self, z):
        return np.polyval(np.polyder(self.a), z)

    def dB(self, z):
        return np.polyval(np.polyder(self.b), z)

    def g(self, z):
        return self.A(z) / self.B(z)

    def dg(self, z):
        b = self.B(z)
        return (self.dA(z) * b - self.A(z) * self.dB(z)) / b ** 2

    def end_product(self, z):
        """prod (z - p_i)^2, evaluated by factors (no cancellation surprises)."""
        z = np.asarray(z)
        acc = np.ones_like(z, dtype=complex)
        for pi in self.p:
            acc = acc * (z - pi) ** 2
        return acc

    def omega(self, z):
        return self.B(z) ** 2 / self.end_product(z)

    def b_roots(self) -> np.ndarray:
        lead = np.flatnonzero(np.abs(self.b) > 1e-14)
        if lead.size == 0 or lead[0] == self.n - 1:
            return np.array([], dtype=complex)
        return np.roots(self.b[lead[0]:])

    def validate(self):
        n = self.n
        if n < 3:
            raise InvalidInputError("need at least three ends")
        dist = np.abs(self.p[:, None] - self.p[None, :]) + np.eye(n)
        if np.min(dist) < 1e-8:
            raise InvalidInputError("end positions must be pairwise distinct")
        if abs(self.a[0]) < 1e-14 and abs(self.b[0]) < 1e-14:
            raise InvalidInputError("gauss map must have degree n-1 (a1 or b1 nonzero)")
        roots_a = np.roots(self.a) if np.any(np.abs(self.a[:-1]) > 1e-14) else np.array([])
        roots_b = self.b_roots()
        if roots_a.size and roots_b.size:
            gap = np.min(np.abs(roots_a[:, None] - roots_b[None, :]))
            if gap < 1e-8:
                raise InvalidInputError("A and B share a root; the gauss map degenerates")
        for pi in self.p:
            if abs(self.A(pi)) < 1e-12 or abs(self.B(pi)) < 1e-12:
                raise InvalidInputError("gauss map must avoid 0 and infinity at the ends")


@dataclass(frozen=True)
class NoidParams:
    """Loop-valued parameter vector (a_i, b_i, p_i), i = 1..n.

    The first three end positions are Moebius-frozen and never move under
    solver updates.
    """

    n: int
    a: tuple
    b: tuple
    p: tuple
    frozen: tuple = (0, 1, 2)

    def __post_init__(self):
        if len(self.a) != self.n or len(self.b) != self.n or len(self.p) != self.n:
            raise InvalidInputError("parameter lists must have length n")
        object.__setattr__(self, "a", tuple(self.a))
        object.__setattr__(self, "b", tuple(self.b))
        object.__setattr__(self, "p", tuple(self.p))
        object.__setattr__(self, "frozen", tuple(self.frozen))
        self.at_lambda(0.0).validate()

    @staticmethod
    def from_constants(a, b, p, rho=defaults.RHO, degree=defaults.TRUNCATION) -> "NoidParams":
        mk = lambda v: constant_loop(complex(v), rho=rho, degree=degree)
        return NoidParams(len(p), tuple(map(mk, a)), tuple(map(mk, b)), tuple(map(mk, p)))

    @property
    def rho(self) -> float:
        return self.a[0].rho

    @property
    def degree(self) -> int:
        return max(l.degree for l in self.a + self.b + self.p)

    def at_lambda(self, lam) -> ConstantParams:
        val = lambda loop: plus_value(loop, lam)
        return ConstantParams([val(l) for l in self.a],
                              [val(l) for l in self.b],
                              [val(l) for l in self.p])

    def central(self) -> ConstantParams:
        return self.at_lambda(0.0)

    def sample_grid(self, lams: np.ndarray) -> list[ConstantParams]:
        powers = np.vstack([lam ** np.arange(0, self.a[0].pad_to(self.degree).degree + 1)
                            for lam in lams])

        def sample(loop: LaurentLoop) -> np.ndarray:
            c = loop.pad_to(self.degree).coeffs
            ndeg = (c.size - 1) // 2
            return powers @ c[ndeg:]

        a = np.stack([sample(l) for l in self.a])   # (n, K)
        b = np.stack([sample(l) for l in self.b])
        p = np.stack([sample(l) for l in self.p])
        return [ConstantParams(a[:, j], b[:, j], p[:, j]) for j in range(len(lams))]

    def free_indices(self) -> list[tuple[str, int]]:
        """Solver unknowns in a fixed order: all a, all b, unfrozen p."""
        idx = [("a", i) for i in range(self.n)] + [("b", i) for i in range(self.n)]
        idx += [("p", i) for i in range(self.n) if i not in self.frozen]
        return idx

    def replace_free(self, loops: list[LaurentLoop]) -> "NoidParams":
        a, b, p = list(self.a), list(self.b), list(self.p)
        for (kind, i), loop in zip(self.free_indices(), loops):
            {"a": a, "b": b, "p": p}[kind][i] = loop
        return NoidParams(self.n, a, b, p, self.frozen)

    def free_loops(self) -> list[LaurentLoop]:
        pick = {"a": self.a, "b": self.b, "p": self.p}
        return [pick[kind][i] for kind, i in self.free_indices()]


def period_contour_radius(cp: ConstantParams) -> float:
    """Domain scale: 1/8 of the minimal pairwise end distance."""
    n = cp.n
    dist = np.abs(cp.p[:, None] - cp.p[None, :]) + 1e18 * np.eye(n)
    return float(np.min(dist)) / 8.0


def eval_g(x, z, lam=0.0):
    """Gauss map at z; callers route around B-roots through the gauge."""
    cp = x.at_lambda(lam) if isinstance(x, NoidParams) else x
    bz = cp.B(z)
    if abs(bz) < defaults.POLE_CLEARANCE:
        raise PoleError(f"gauss map pole at z={z}", location=z, kind="gauge-zero")
    return cp.A(z) / bz


def eval_omega(x, z, lam=0.0):
    """dz-coefficient of the height differential at z."""
    cp = x.at_lambda(lam) if isinstance(x, NoidParams) else x
    gap = np.min(np.abs(z - cp.p))
    if gap < defaults.POLE_CLEARANCE:
        raise PoleError(f"omega has a double pole at the end nearest z={z}",
                        location=z, kind="end")
    return cp.omega(z)


def contour_integrals(fns, center, radius,
                      quad_tol=defaults.QUAD_TOL,
                      min_nodes=defaults.QUAD_MIN_NODES,
                      max_nodes=defaults.QUAD_MAX_NODES):
    """(1/2 pi i) contour integrals of callables over a circle, adaptively refined.

    fns maps an array of z-nodes to a tuple/array of integrand values; the
    trapezoid estimate of each component is refined by node doubling until the
    worst change is below quad_tol.
    """
    m = min_nodes
    prev, change = None, np.inf
    while m <= max_nodes:
        theta = 2.0 * np.pi * np.arange(m) / m
        z = center + radius * np.exp(1j * theta)
        dz = 1j * radius * np.exp(1j * theta)
        vals = np.asarray(fns(z))
        est = (vals * dz).sum(axis=-1) / (1j * m)
        if prev is not None:
            change = np.max(np.abs(est - prev))
            scale = 1.0 + np.max(np.abs(est))
            if change <= quad_tol * scale:
                return est, change, m
        prev = est
        m *= 2
    raise QuadratureError(
        f"contour quadrature did not converge below {quad_tol} with {max_nodes} nodes",
        estimate=prev, error=change)


@dataclass(frozen=True)
class PeriodTable:
    """Periods of the first n-1 ends plus flux data for all n ends."""

    P: np.ndarray          # (n-1, 3) complex, columns k = 0, 1, 2
    Q: np.ndarray          # (n-1, 3) complex
    flux: np.ndarray       # (n, 3) real
    necksizes: np.ndarray  # (n,)
    P_all: np.ndarray = field(default=None)  # (n, 3): used by the sum identity
    quad_error: float = 0.0
    nodes: int = 0


def _qi_from_p(prow: np.ndarray) -> np.ndarray:
    p0, p1, p2 = prow
    return np.array([0.5 * (p0 - p2), 0.5j * (p0 + p2), p1])


def periods(x, quad_tol=defaults.QUAD_TOL, radius_factor=4.0) -> PeriodTable:
    """Period table of a parameter snapshot (NoidParams are read at lambda=0)."""
    cp = x.central() if isinstance(x, NoidParams) else x
    cp.validate()
    n = cp.n
    eps = period_contour_radius(cp)
    radius = radius_factor * eps
    p_all = np.zeros((n, 3), dtype=complex)
    worst, nodes = 0.0, 0
    for i in range(n):

        def integrand(z):
            # g^k omega written pole-free away from the ends:
            # omega = B^2/prod, g omega = A B/prod, g^2 omega = A^2/prod
            av, bv = cp.A(z), cp.B(z)
            prod = cp.end_product(z)
            return np.stack([bv * bv, av * bv, av * av]) / prod

        est, err, m = contour_integrals(integrand, cp.p[i], radius, quad_tol=quad_tol)
        p_all[i] = 2j * np.pi * est
        worst = max(worst, err)
        nodes = max(nodes, m)
    q = np.stack([_qi_from_p(p_all[i]) for i in range(n)])
    flux = -q.imag
    necks = np.linalg.norm(flux, axis=1) / (2.0 * np.pi)
    return PeriodTable(P=p_all[: n - 1], Q=q[: n - 1], flux=flux, necksizes=necks,
                       P_all=p_all, quad_error=worst, nodes=nodes)


def gauss_direction(g_value: complex) -> np.ndarray:
    """Unit normal of the minimal surface determined by the gauss map value."""
    gg = abs(g_value) ** 2
    return np.array([2 * g_value.real, 2 * g_value.imag, gg - 1.0]) / (gg + 1.0)


def period_loops(x: NoidParams, i: int, degree: int | None = None,
                 quad_tol: float = defaults.QUAD_TOL,
                 radius_factor: float = 4.0):
    """Loop-valued periods of loop-valued parameters around the i-th end.

    Returns the three LaurentLoops  lambda -> P_{i,k}(x(lambda)), k = 0, 1, 2,
    sampled on a circle grid in lambda and folded back to coefficients.  The
    z-contour is the fixed circle around the central end position, refined by
    node doubling jointly for all lambda.
    """
    from .loops import coeffs_from_samples as _cfs, grid_points as _gp, grid_size as _gs

    deg = degree if degree is not None else x.degree
    k_grid = _gs(deg)
    lams = _gp(k_grid)
    n = x.n
    pad = lambda loops: np.stack([l.pad_to(deg).coeffs for l in loops])
    from .loops import samples_from_coeffs as _sfc
    a_s = _sfc(pad(x.a), k_grid)   # (n, K)
    b_s = _sfc(pad(x.b), k_grid)
    p_s = _sfc(pad(x.p), k_grid)
    center = complex(plus_value(x.p[i], 0.0))
    eps = period_contour_radius(x.central())
    radius = radius_factor * eps

    def estimates(m):
        theta = 2.0 * np.pi * np.arange(m) / m
        z = center + radius * np.exp(1j * theta)       # (M,)
        dz = 1j * radius * np.exp(1j * theta)
        zp = np.vander(z, n, increasing=True).T        # (n, M): z^0 .. z^{n-1}
        a_v = np.einsum("ik,im->km", a_s, zp[::-1])    # (K, M)
        b_v = np.einsum("ik,im->km", b_s, zp[::-1])
        prod = np.ones((k_grid, m), dtype=complex)
        for j in range(n):
            prod *= (z[None, :] - p_s[j][:, None]) ** 2
        stack = np.stack([b_v * b_v, a_v * b_v, a_v * a_v]) / prod
        return (stack * dz).sum(axis=-1) / (1j * m)    # (3, K)

    m = defaults.QUAD_MIN_NODES
    prev, change = None, np.inf
    while m <= defaults.QUAD_MAX_NODES:
        est = estimates(m)
        if prev is not None:
            change = float(np.max(np.abs(est - prev)))
            if change <= quad_tol * (1.0 + float(np.max(np.abs(est)))):
                break
        prev = est
        m *= 2
    else:
        raise QuadratureError("loop-period quadrature did not converge",
                              estimate=prev, error=change)
    vals = 2j * np.pi * est                            # (3, K)
    out = []
    for k in range(3):
        c, mass = _cfs(vals[k], deg)
        out.append(LaurentLoop(x.rho, c, mass))
    return tuple(out)


def _free_constants(cp: ConstantParams, frozen) -> list[tuple[str, int]]:
    idx = [("a", i) for i in range(cp.n)] + [("b", i) for i in range(cp.n)]
    idx += [("p", i) for i in range(cp.n) if i not in frozen]
    return idx


def _with_entry(cp: ConstantParams, kind: str, i: int, value: complex) -> ConstantParams:
    a, b, p = np.array(cp.a), np.array(cp.b), np.array(cp.p)
    {"a": a, "b": b, "p": p}[kind][i] = value
    return ConstantParams(a, b, p)


def period_jacobian(cp: ConstantParams, frozen=(0, 1, 2),
                    fd_step=defaults.FD_STEP, quad_tol=defaults.QUAD_TOL) -> np.ndarray:
    """d P / d x at a constant snapshot, by central differences.

    Rows: ends 1..n-1 with components k = 0, 1, 2 (end-major); columns follow
    the free-parameter order of NoidParams.free_indices().  The map is
    holomorphic, so real-direction differences give the complex derivative.
    """
    free = _free_constants(cp, frozen)
    n = cp.n
    jac = np.zeros((3 * (n - 1), len(free)), dtype=complex)
    for col, (kind, i) in enumerate(free):
        base = {"a": cp.a, "b": cp.b, "p": cp.p}[kind][i]
        h = fd_step * (1.0 + abs(base))
        tp = periods(_with_entry(cp, kind, i, base + h), quad_tol=quad_tol)
        tm = periods(_with_entry(cp, kind, i, base - h), quad_tol=quad_tol)
        deriv = (tp.P - tm.P) / (2.0 * h)
        jac[:, col] = deriv.reshape(-1)
    return jac


def nondegeneracy_rank(x0, rank_tol=defaults.RANK_TOL,
                       fd_step=defaults.FD_STEP) -> tuple[int, np.ndarray]:
    """Complex rank of the period differential over the 3n-3 free parameters."""
    cp = x0.central() if isinstance(x0, NoidParams) else x0
    frozen = x0.frozen if isinstance(x0, NoidParams) else (0, 1, 2)
    jac = period_jacobian(cp, frozen=frozen, fd_step=fd_step)
    sv = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(sv > rank_tol * sv[0]))
    return rank, sv


def jorge_meeks(n: int, scale: float = 1.0,
                rho: float = defaults.RHO,
                degree: int = defaults.TRUNCATION) -> NoidParams:
    """Most symmetric n-noid data: ends at roots of unity, g ~ z^{n-1}.

    The gauss-map scale is calibrated by bisection until the period problem
    closes (Re Q_i = 0); the result is validated, not assumed.
    """
    if n < 3:
        raise InvalidInputError("need n >= 3")
    if scale <= 0:
        raise InvalidInputError("scale must be positive")
    p = np.exp(2j * np.pi * np.arange(n) / n)
    b = np.zeros(n, dtype=complex)
    b[-1] = np.sqrt(scale)

    def mismatch(kappa):
        a = np.zeros(n, dtype=complex)
        a[0] = kappa
        table = periods(ConstantParams(a, b, p), quad_tol=1e-12)
        return (table.P[0, 2] - np.conj(table.P[0, 0])).imag, table

    lo, hi = 0.25, 4.0
    s_lo, _ = mismatch(lo)
    s_hi, _ = mismatch(hi)
    if s_lo * s_hi > 0:
        raise ConstructionError("gauss-map scale bracket does not straddle the period condition")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        s_mid, table = mismatch(mid)
        if s_lo * s_mid <= 0:
            hi = mid
        else:
            lo, s_lo = mid, s_mid
        if hi - lo < 1e-14 * mid:
            break
    kappa = 0.5 * (lo + hi)
    a = np.zeros(n, dtype=complex)
    a[0] = kappa
    table = periods(ConstantParams(a, b, p), quad_tol=1e-12)
    res = np.max(np.abs(table.Q.real))
    if res > 1e-10:
        raise ConstructionError(f"period validation failed: max |Re Q| = {res:.3e}")
    return NoidParams.from_constants(a, b, p, rho=rho, degree=degree)
