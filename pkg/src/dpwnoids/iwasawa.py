"""Numerical Iwasawa factorization Phi = F B and the infinitesimal splitting.

F is unitary on the unit circle, B extends holomorphically to the disk with
B(0) upper triangular and positive diagonal.  The factorization is computed
by spectral factorization of the positive loop P = Phi* Phi on a circle grid:
Newton updates B <- (I + W) B where W solves the linearized equation
W + W* = B^{-*} P B^{-1} - I restricted to the positive/upper normal form.
Damping halves the update whenever the residual fails to decrease.
"""

from __future__ import annotations

import numpy as np

from . import defaults
from .errors import ConvergenceError, InvalidInputError
from .loops import (
    LoopMatrix,
    Su2Vector,
    coeffs_from_samples,
    grid_size,
    samples_from_coeffs,
    su2_to_vec,
)

__all__ = ["iwasawa", "uni_split", "pos_split", "sym_point", "normal_point",
           "unitary_factor_2x2"]


def unitary_factor_2x2(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """QR-style splitting of one invertible 2x2 matrix: m = q r.

    q is unitary (special unitary when det m = 1), r upper triangular with
    positive diagonal.
    """
    m = np.asarray(m, dtype=complex)
    a, c = m[0, 0], m[1, 0]
    s = np.sqrt(abs(a) ** 2 + abs(c) ** 2)
    if s == 0.0:
        raise InvalidInputError("singular matrix has no unitary factor")
    q = np.array([[a, -np.conj(c)], [c, np.conj(a)]], dtype=complex) / s
    r = np.conj(q.T) @ m
    # strip the roundoff in the lower-left and the phases on the diagonal
    r[1, 0] = 0.0
    phases = r.diagonal() / np.abs(r.diagonal())
    q = q * phases[None, :]
    r = np.conj(phases)[:, None] * r
    return q, r


def _upper_cholesky(p: np.ndarray) -> np.ndarray:
    """Upper-triangular r with r^H r = p, for one hermitian 2x2 positive matrix."""
    p00 = p[0, 0].real
    if p00 <= 0:
        raise InvalidInputError("positive loop is not positive at a circle sample")
    r11 = np.sqrt(p00)
    r12 = p[0, 1] / r11
    rest = p[1, 1].real - abs(r12) ** 2
    if rest <= 0:
        raise InvalidInputError("positive loop is numerically singular")
    return np.array([[r11, r12], [0.0, np.sqrt(rest)]], dtype=complex)


def _plus_upper_part(h_coeffs: np.ndarray) -> np.ndarray:
    """Solve W + W* = H for W in the positive/upper normal form.

    h_coeffs has shape (2, 2, K) in fft bin order and represents a loop that
    is hermitian on the circle.  Returns W in the same layout: positive
    powers of H kept, zero mode replaced by its upper part with half real
    diagonal.
    """
    k = h_coeffs.shape[2]
    w = np.zeros_like(h_coeffs)
    half = (k - 1) // 2
    w[:, :, 1: half + 1] = h_coeffs[:, :, 1: half + 1]
    h0 = h_coeffs[:, :, 0]
    w[0, 0, 0] = 0.5 * h0[0, 0].real
    w[1, 1, 0] = 0.5 * h0[1, 1].real
    w[0, 1, 0] = h0[0, 1]
    return w


def iwasawa(phi: LoopMatrix,
            tol: float = defaults.IWASAWA_TOL,
            max_iter: int = defaults.IWASAWA_MAX_ITER) -> tuple[LoopMatrix, LoopMatrix]:
    """Split phi into (F, B): F unitary on the circle, B positive.

    Raises ConvergenceError (carrying the residual) if the Newton sweep
    stalls, InvalidInputError if phi is singular at a circle sample.
    """
    n = phi.degree
    k = grid_size(2 * n)  # B may carry powers up to 2n
    phi_vals = samples_from_coeffs(phi.array, k).transpose(2, 0, 1)
    dets = np.linalg.det(phi_vals)
    if np.min(np.abs(dets)) < 1e-12 * (1 + np.max(np.abs(phi_vals))):
        raise InvalidInputError("phi is singular at a circle sample")

    p_vals = np.conj(phi_vals).transpose(0, 2, 1) @ phi_vals
    p_norm = float(np.max(np.abs(p_vals)))

    # init: constant upper Cholesky of the circle average of P
    b_vals = np.broadcast_to(_upper_cholesky(np.mean(p_vals, axis=0)), (k, 2, 2)).copy()

    def residual_of(bv):
        return float(np.max(np.abs(np.conj(bv).transpose(0, 2, 1) @ bv - p_vals))) / p_norm

    res = residual_of(b_vals)
    for _ in range(max_iter):
        if res <= tol:
            break
        b_inv = np.linalg.inv(b_vals)
        h = np.conj(b_inv).transpose(0, 2, 1) @ p_vals @ b_inv
        h[:, 0, 0] -= 1.0
        h[:, 1, 1] -= 1.0
        h_coeffs = np.fft.fft(h.transpose(1, 2, 0), axis=2) / k
        w_coeffs = _plus_upper_part(h_coeffs)
        w_vals = np.fft.ifft(w_coeffs, axis=2).transpose(2, 0, 1) * k
        step = 1.0
        while True:
            trial = b_vals + step * (w_vals @ b_vals)
            trial_res = residual_of(trial)
            if trial_res < res or step < 1.0 / 64:
                break
            step *= 0.5  # damped fall-back sweep when the full step overshoots
        if trial_res >= res and res > tol:
            raise ConvergenceError(
                f"spectral factorization stalled at residual {res:.3e}", residual=res)
        b_vals, res = trial, trial_res
    else:
        if res > tol:
            raise ConvergenceError(
                f"spectral factorization did not reach {tol} in {max_iter} iterations",
                residual=res)

    # pin the normalization: B(0) diagonal real positive
    b_coeffs = np.fft.fft(b_vals.transpose(1, 2, 0), axis=2) / k
    b0 = b_coeffs[:, :, 0]
    phases = b0.diagonal() / np.abs(b0.diagonal())
    d = np.conj(phases)
    b_vals = d[None, :, None] * b_vals
    f_vals = phi_vals @ np.linalg.inv(b_vals)

    f_arr, f_mass = coeffs_from_samples(f_vals.transpose(1, 2, 0), n)
    b_arr, b_mass = coeffs_from_samples(b_vals.transpose(1, 2, 0), 2 * n)
    rho = phi.rho
    f = LoopMatrix(rho, f_arr, det_tag=phi.det_tag, tail=phi.tail + f_mass)
    b = LoopMatrix(rho, b_arr, det_tag=phi.det_tag, tail=phi.tail + b_mass)
    return f, b


def uni_split(m: LoopMatrix) -> LoopMatrix:
    """Anti-hermitian component of a traceless loop matrix (closed formula)."""
    _require_traceless(m)
    n = m.degree
    arr = np.zeros_like(m.array)
    a0 = m.array[0, 0, n]
    c0 = m.array[1, 0, n]
    arr[0, 0, n] = 1j * a0.imag
    arr[1, 1, n] = -1j * a0.imag
    arr[0, 1, n] = -np.conj(c0)
    arr[1, 0, n] = c0
    neg = m.array[:, :, :n]                              # powers -n..-1
    arr[:, :, :n] += neg
    flipped = np.conj(neg[:, :, ::-1]).transpose(1, 0, 2)  # (M_m)^H at powers 1..n
    arr[:, :, n + 1:] -= flipped
    return LoopMatrix(m.rho, arr, False, m.tail)


def pos_split(m: LoopMatrix) -> LoopMatrix:
    """Positive/upper component; uni_split + pos_split reproduces m exactly."""
    _require_traceless(m)
    n = m.degree
    arr = np.zeros_like(m.array)
    a0 = m.array[0, 0, n]
    b0 = m.array[0, 1, n]
    c0 = m.array[1, 0, n]
    arr[0, 0, n] = a0.real
    arr[1, 1, n] = -a0.real
    arr[0, 1, n] = b0 + np.conj(c0)
    arr[:, :, n + 1:] += m.array[:, :, n + 1:]
    neg = m.array[:, :, :n]
    arr[:, :, n + 1:] += np.conj(neg[:, :, ::-1]).transpose(1, 0, 2)
    return LoopMatrix(m.rho, arr, False, m.tail)


def _require_traceless(m: LoopMatrix):
    if not m.is_traceless(1e-9):
        raise InvalidInputError("splitting requires a traceless loop matrix")


def sym_point(f: LoopMatrix, check: bool = True) -> Su2Vector:
    """Surface point of a unitary frame: -2i dF/dlambda(1) F(1)^{-1}."""
    if check and not f.is_unitary_on_circle(1e-6):
        raise InvalidInputError("frame is not unitary on the circle")
    f1 = f.at(1.0)
    df1 = f.d_lambda_at(1.0)
    mat = -2j * df1 @ np.linalg.inv(f1)
    # remove the hermitian residue left by truncation before reading coordinates
    return Su2Vector(su2_to_vec(mat, check=False))


def normal_point(f: LoopMatrix, check: bool = True) -> Su2Vector:
    """Unit normal of a unitary frame: -i F(1) diag(-1, 1) F(1)^{-1}."""
    if check and not f.is_unitary_on_circle(1e-6):
        raise InvalidInputError("frame is not unitary on the circle")
    f1 = f.at(1.0)
    mat = -1j * f1 @ np.diag([-1.0, 1.0]) @ np.linalg.inv(f1)
    v = su2_to_vec(mat, check=False)
    return Su2Vector(v / np.linalg.norm(v))
