"""Newton continuation for the monodromy problem.

The unknowns are the 3n-3 free parameters, each a truncated W^{>=0} loop
(coefficients for powers 0..N).  A configuration solves the problem when the
rescaled monodromies sit in the unitary loop algebra, equivalently when the
residual blocks

    F_i^+ = 0,  Re(F_i^0) = 0,  G_i^+ = 0,  G_i^{-*} = 0,  G_i^0 = 0

vanish, where F_i = Mt_{i,11} + Mt_{i,11}^* and G_i = Mt_{i,12} + Mt_{i,21}^*.

At t = 0 the differential of this system block-diagonalizes over lambda
powers, each block the period Jacobian dP; Newton steps reuse that structure
(an automorphism per positive power, plus an underdetermined real block at
power zero solved by least squares).  For the small |t| of interest the exact
Jacobian is an O(t) perturbation, so the chord iteration with the t = 0
blocks converges linearly with a small rate; Armijo backtracking guards the
occasional overshoot.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import defaults
from .errors import ContinuationError, ConvergenceError, InvalidInputError
from .loops import LaurentLoop, LoopMatrix, star
from .potential import default_basepoint
from .transport import (
    DeviationPotential,
    deviation_transport,
    end_loop,
    m_tilde_at_zero,
    rescaled_monodromy_from_deviation,
)
from .weierstrass import NoidParams, nondegeneracy_rank, period_jacobian

__all__ = [
    "ResidualVector",
    "MonodromyProblem",
    "ContinuationConfig",
    "SolutionStep",
    "residual",
    "solve",
    "jacobian",
]


@dataclass(frozen=True)
class ResidualVector:
    """Projected residual blocks per end; flattens to a real vector."""

    f_plus: tuple        # per end: (N,) complex, powers 1..N
    f0_re: tuple         # per end: float
    g_plus: tuple        # per end: (N,) complex
    g_minus_star: tuple  # per end: (N,) complex
    g0: tuple            # per end: complex
    tail: float = 0.0    # mass beyond the solved truncation (diagnostic)

    @property
    def ends(self) -> int:
        return len(self.f0_re)

    def max_norm(self) -> float:
        worst = 0.0
        for i in range(self.ends):
            worst = max(worst,
                        float(np.max(np.abs(self.f_plus[i]), initial=0.0)),
                        abs(self.f0_re[i]),
                        float(np.max(np.abs(self.g_plus[i]), initial=0.0)),
                        float(np.max(np.abs(self.g_minus_star[i]), initial=0.0)),
                        abs(self.g0[i]))
        return worst

    def to_real(self) -> np.ndarray:
        parts = []
        for i in range(self.ends):
            parts.append([self.f0_re[i], self.g0[i].real, self.g0[i].imag])
            block = np.stack([self.f_plus[i], self.g_plus[i], self.g_minus_star[i]])
            parts.append(block.T.reshape(-1).view(float))
        return np.concatenate([np.asarray(p, dtype=float).ravel() for p in parts])


def _split_residual(mt: LoopMatrix, degree: int):
    f = mt.entry(0, 0) + star(mt.entry(0, 0))
    g = mt.entry(0, 1) + star(mt.entry(1, 0))
    n = f.degree
    f_plus = np.array(f.coeffs[n + 1: n + 1 + degree])
    g_plus = np.array(g.coeffs[n + 1: n + 1 + degree])
    gms = np.conj(np.array(g.coeffs[:n][::-1])[:degree])  # conj G_{-m}, m = 1..N
    return f_plus, float(f.coeff(0).real), g_plus, gms, complex(g.coeff(0)), f.tail + g.tail


class MonodromyProblem:
    """Geometry, paths and Newton blocks for one family of configurations."""

    def __init__(self, x0: NoidParams, degree: int | None = None,
                 z0: complex | None = None,
                 ode_tol: float = defaults.ODE_TOL,
                 solver_tol: float = defaults.SOLVER_TOL,
                 quad_tol: float = defaults.QUAD_TOL,
                 check_rank: bool = True):
        self.x0 = x0
        self.degree = degree if degree is not None else x0.degree
        if self.degree < x0.degree:
            raise InvalidInputError("solver truncation below the parameter degree")
        self.ode_tol = ode_tol
        self.solver_tol = solver_tol
        self.quad_tol = quad_tol
        if z0 is None:
            z0, fallback = default_basepoint(x0)
            self.basepoint_fallback = fallback
        else:
            self.basepoint_fallback = False
        self.z0 = complex(z0)
        self.n = x0.n
        self.paths = tuple(end_loop(x0, i, self.z0) for i in range(self.n - 1))
        self.rank = None
        if check_rank:
            rank, sv = nondegeneracy_rank(x0)
            self.rank = rank
            self.singular_values = sv
            if rank != 3 * self.n - 3:
                raise InvalidInputError(
                    f"central configuration is degenerate: rank {rank} < {3 * self.n - 3}")
        self._blocks = None

    # -- residual ----------------------------------------------------------

    def deviations(self, t: float, x: NoidParams) -> list[LoopMatrix]:
        """Transported deviation frames W_i; the monodromy is I + t W_i."""
        dev = DeviationPotential(x, degree=self.degree)
        return [deviation_transport(dev, path, t, rtol=self.ode_tol)
                for path in self.paths]

    def rescaled_monodromies(self, t: float, x: NoidParams) -> list[LoopMatrix]:
        if t == 0.0:
            return [m_tilde_at_zero(x, i, degree=self.degree, quad_tol=self.quad_tol)
                    for i in range(self.n - 1)]
        return [rescaled_monodromy_from_deviation(t, w) for w in self.deviations(t, x)]

    def raw_monodromies(self, t: float, x: NoidParams) -> list[LoopMatrix]:
        eye = LoopMatrix.identity(x.rho, self.degree)
        return [eye + w * t for w in self.deviations(t, x)]

    def residual(self, t: float, x: NoidParams) -> ResidualVector:
        f_plus, f0, g_plus, gms, g0 = [], [], [], [], []
        tail = 0.0
        for mt in self.rescaled_monodromies(t, x):
            fp, f0i, gp, gm, g0i, tl = _split_residual(mt, self.degree)
            f_plus.append(fp)
            f0.append(f0i)
            g_plus.append(gp)
            gms.append(gm)
            g0.append(g0i)
            tail += tl
        return ResidualVector(tuple(f_plus), tuple(f0), tuple(g_plus),
                              tuple(gms), tuple(g0), tail)

    # -- Newton blocks from the period Jacobian ------------------------------

    def newton_blocks(self):
        """(J_plus, J0): the per-power complex block and the real zero block."""
        if self._blocks is not None:
            return self._blocks
        cp = self.x0.central()
        dp = period_jacobian(cp, frozen=self.x0.frozen, quad_tol=self.quad_tol)
        nm1 = self.n - 1
        free = dp.shape[1]
        j_plus = np.zeros((3 * nm1, free), dtype=complex)
        for i in range(nm1):
            j_plus[3 * i + 0] = dp[3 * i + 1]        # F row:  dP_{i,1}
            j_plus[3 * i + 1] = dp[3 * i + 2]        # G+ row: dP_{i,2}
            j_plus[3 * i + 2] = -dp[3 * i + 0]       # G-* row: -dP_{i,0}
        j0 = np.zeros((3 * nm1, 2 * free))
        for col in range(free):
            for part, vec in enumerate((np.eye(free)[col], 1j * np.eye(free)[col])):
                d1 = dp[1::3] @ vec
                d2 = dp[2::3] @ vec
                d0 = dp[0::3] @ vec
                rows = np.empty(3 * nm1)
                rows[0::3] = 2.0 * d1.real
                g0c = d2 - np.conj(d0)
                rows[1::3] = g0c.real
                rows[2::3] = g0c.imag
                j0[:, 2 * col + part] = rows
        self._blocks = (j_plus, j0)
        return self._blocks

    def newton_step(self, res: ResidualVector) -> list[LaurentLoop]:
        """Correction loops for the free parameters, min-norm in the zero block."""
        j_plus, j0 = self.newton_blocks()
        nm1 = self.n - 1
        free = j_plus.shape[1]
        deltas = np.zeros((free, self.degree + 1), dtype=complex)
        # power 0: underdetermined real system, least squares
        rhs0 = np.empty(3 * nm1)
        for i in range(nm1):
            rhs0[3 * i + 0] = -res.f0_re[i]
            rhs0[3 * i + 1] = -res.g0[i].real
            rhs0[3 * i + 2] = -res.g0[i].imag
        sol0 = np.linalg.lstsq(j0, rhs0, rcond=None)[0]
        deltas[:, 0] = sol0[0::2] + 1j * sol0[1::2]
        # powers 1..N: one square complex solve per power
        rhs = np.empty((3 * nm1, self.degree), dtype=complex)
        for i in range(nm1):
            rhs[3 * i + 0] = -res.f_plus[i]
            rhs[3 * i + 1] = -res.g_plus[i]
            rhs[3 * i + 2] = -res.g_minus_star[i]
        deltas[:, 1:] = np.linalg.solve(j_plus, rhs)
        rho = self.x0.rho
        out = []
        for row in deltas:
            c = np.zeros(2 * self.degree + 1, dtype=complex)
            c[self.degree:] = row
            out.append(LaurentLoop(rho, c))
        return out

    def apply_step(self, x: NoidParams, step: list[LaurentLoop], damping: float) -> NoidParams:
        moved = [loop + (d * damping).pad_to(loop.degree) if d.degree <= loop.degree
                 else loop.pad_to(d.degree) + d * damping
                 for loop, d in zip(x.free_loops(), step)]
        return x.replace_free(moved)

    def newton_solve(self, t: float, x_init: NoidParams,
                     max_iter: int = 30) -> tuple[NoidParams, float, int]:
        x = x_init
        res = self.residual(t, x)
        norm = res.max_norm()
        for it in range(max_iter):
            if norm <= self.solver_tol:
                return x, norm, it
            step = self.newton_step(res)
            damping = 1.0
            while True:
                x_try = self.apply_step(x, step, damping)
                res_try = self.residual(t, x_try)
                norm_try = res_try.max_norm()
                if norm_try <= (1.0 - 1e-4 * damping) * norm:
                    break
                damping *= 0.5
                if damping < 1.0 / 64:
                    raise ConvergenceError(
                        f"newton stalled at t={t}: residual {norm:.3e}",
                        residual=norm)
            x, res, norm = x_try, res_try, norm_try
        if norm <= self.solver_tol:
            return x, norm, max_iter
        raise ConvergenceError(
            f"newton did not reach {self.solver_tol} at t={t}: residual {norm:.3e}",
            residual=norm)

    # -- verification of the closing conditions on raw monodromies ---------

    def closing_report(self, t: float, x: NoidParams) -> dict:
        out = {"unitary_defect": [], "center_defect": [], "derivative_defect": []}
        for m in self.raw_monodromies(t, x):
            out["unitary_defect"].append(m.unitary_defect())
            m1 = m.at(1.0)
            out["center_defect"].append(min(float(np.max(np.abs(m1 - np.eye(2)))),
                                            float(np.max(np.abs(m1 + np.eye(2))))))
            out["derivative_defect"].append(float(np.max(np.abs(m.d_lambda_at(1.0)))))
        return out


@dataclass(frozen=True)
class ContinuationConfig:
    dt_init: float = 1e-4
    dt_floor: float = 1e-7
    growth: float = 2.0
    shrink: float = 0.5
    newton_max_iter: int = 30
    easy_iters: int = 4


@dataclass(frozen=True)
class SolutionStep:
    t: float
    x: NoidParams
    residual_norm: float
    iterations: int
    is_target: bool = False
    dt_after: float = 0.0   # continuation state, lets a resume replay exactly


def residual(t: float, x: NoidParams, problem: MonodromyProblem | None = None) -> ResidualVector:
    problem = problem if problem is not None else MonodromyProblem(x, check_rank=False)
    return problem.residual(t, x)


def solve(t_target, x0: NoidParams, problem: MonodromyProblem | None = None,
          config: ContinuationConfig = ContinuationConfig(),
          start: SolutionStep | None = None) -> list[SolutionStep]:
    """Continuation from (0, x0) to the target t (or list of targets).

    All targets must share a sign; the path through intermediate accepted
    steps is returned, targets marked.  Newton failures shrink the t step;
    below the floor a ContinuationError carries the last good point.  With
    `start` (a step from an earlier run) the walk resumes there with the
    recorded step size, replaying exactly what an uninterrupted run does.
    """
    targets = sorted({float(t) for t in np.atleast_1d(t_target)}, key=abs)
    if any(t * targets[-1] < 0 for t in targets):
        raise InvalidInputError("continuation targets must share one sign")
    problem = problem if problem is not None else MonodromyProblem(x0)
    if start is None:
        steps = [SolutionStep(0.0, x0, problem.residual(0.0, x0).max_norm(), 0,
                              is_target=(targets[0] == 0.0), dt_after=config.dt_init)]
        t_cur, x_cur, dt = 0.0, x0, config.dt_init
    else:
        steps = []
        t_cur, x_cur = start.t, start.x
        dt = start.dt_after if start.dt_after > 0 else config.dt_init
    targets = [t for t in targets if abs(t) > abs(t_cur)]
    if not targets:
        return steps
    sign = np.sign(targets[-1])
    pending = list(targets)
    while pending:
        t_next = t_cur + sign * dt
        if abs(t_next) > abs(pending[0]) - 1e-15:
            t_next = pending[0]
        try:
            x_new, norm, iters = problem.newton_solve(t_next, x_cur,
                                                      config.newton_max_iter)
        except ConvergenceError as err:
            dt *= config.shrink
            if dt < config.dt_floor:
                raise ContinuationError(
                    f"continuation stalled at t={t_cur}: {err}",
                    t_last=t_cur, x_last=x_cur) from err
            continue
        hit = pending and t_next == pending[0]
        if hit:
            pending.pop(0)
        if iters <= config.easy_iters:
            dt *= config.growth
        steps.append(SolutionStep(t_next, x_new, norm, iters, is_target=hit,
                                  dt_after=dt))
        t_cur, x_cur = t_next, x_new
    return steps


def jacobian(t: float, x: NoidParams, problem: MonodromyProblem,
             fd_step: float = defaults.FD_STEP) -> tuple[np.ndarray, float]:
    """Finite-difference Jacobian of the flattened real residual.

    Returns (matrix, condition number).  Columns follow the free-parameter
    order, coefficient-major (power 0..N), real part then imaginary part.
    Expensive: meant for diagnostics and small truncations.
    """
    loops = x.free_loops()
    cols = []
    for j, loop in enumerate(loops):
        for m in range(problem.degree + 1):
            scale = fd_step * (1.0 + abs(loop.coeff(m)))
            for direction in (1.0, 1.0j):
                bump = np.zeros(2 * loop.degree + 1, dtype=complex)
                bump[m + loop.degree] = scale * direction
                up = list(loops)
                up[j] = LaurentLoop(loop.rho, loop.coeffs + bump)
                dn = list(loops)
                dn[j] = LaurentLoop(loop.rho, loop.coeffs - bump)
                r_up = problem.residual(t, x.replace_free(up)).to_real()
                r_dn = problem.residual(t, x.replace_free(dn)).to_real()
                cols.append((r_up - r_dn) / (2.0 * scale))
    jac = np.stack(cols, axis=1)
    sv = np.linalg.svd(jac, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    return jac, cond
