"""Truncated weighted Wiener-algebra arithmetic.

Scalars are Laurent series in the circle variable lambda, truncated to powers
[-N, N], with norm  sum_i |f_i| rho^|i|  for a fixed weight rho > 1.  Loop
matrices are 2x2 arrays of such scalars.  All values are immutable; every
operation returns a new object, so everything here is safe to call from any
number of workers.

Products are truncated back to [-N, N]; the Wiener mass of the dropped
coefficients is accumulated in a `tail` diagnostic so truncation error stays
observable downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import defaults
from .errors import (
    BranchError,
    DomainError,
    InvalidInputError,
    InvalidOperandError,
    NotNearIdentityError,
)

__all__ = [
    "LaurentLoop",
    "LoopMatrix",
    "loop_from_coeffs",
    "constant_loop",
    "monomial",
    "zero_loop",
    "mul",
    "star",
    "project",
    "wiener_norm",
    "loop_eval",
    "plus_value",
    "loop_reciprocal",
    "loop_sqrt",
    "loop_exp",
    "loop_log",
    "vec_to_su2",
    "su2_to_vec",
    "su2_basis",
    "grid_points",
    "coeffs_from_samples",
    "samples_from_coeffs",
]


def _as_index(n):
    m = int(n)
    if m != n or m < 1:
        raise InvalidInputError(f"truncation degree must be a positive integer, got {n!r}")
    return m


@dataclass(frozen=True)
class LaurentLoop:
    """One truncated Laurent series; coefficient of lambda^i sits at coeffs[i + N]."""

    rho: float
    coeffs: np.ndarray
    tail: float = 0.0

    def __post_init__(self):
        if self.rho <= 1.0:
            raise InvalidInputError(f"weight rho must exceed 1, got {self.rho}")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1 or c.size < 3:
            raise InvalidInputError("coefficient array must be 1-d, odd length >= 3")
        c = np.array(c, copy=True)
        c.flags.writeable = False
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coeff(self, i: int) -> complex:
        n = self.degree
        if -n <= i <= n:
            return complex(self.coeffs[i + n])
        return 0.0j

    def pad_to(self, n: int) -> "LaurentLoop":
        n = _as_index(n)
        if n < self.degree:
            raise InvalidInputError("pad_to cannot shrink; use truncate")
        extra = n - self.degree
        c = np.pad(self.coeffs, (extra, extra))
        return LaurentLoop(self.rho, c, self.tail)

    def truncate(self, n: int) -> "LaurentLoop":
        n = _as_index(n)
        if n >= self.degree:
            return self.pad_to(n) if n > self.degree else self
        k = self.degree - n
        dropped = np.concatenate([self.coeffs[:k], self.coeffs[-k:]])
        idx = np.concatenate([np.arange(-self.degree, -n), np.arange(n + 1, self.degree + 1)])
        mass = float(np.sum(np.abs(dropped) * self.rho ** np.abs(idx)))
        return LaurentLoop(self.rho, self.coeffs[k:-k], self.tail + mass)

    # -- arithmetic -------------------------------------------------------

    def __add__(self, other):
        a, b = _align(self, _coerce(other, self))
        return LaurentLoop(a.rho, a.coeffs + b.coeffs, a.tail + b.tail)

    __radd__ = __add__

    def __sub__(self, other):
        a, b = _align(self, _coerce(other, self))
        return LaurentLoop(a.rho, a.coeffs - b.coeffs, a.tail + b.tail)

    def __rsub__(self, other):
        return _coerce(other, self) - self

    def __neg__(self):
        return LaurentLoop(self.rho, -self.coeffs, self.tail)

    def __mul__(self, other):
        if isinstance(other, LaurentLoop):
            return mul(self, other)
        z = complex(other)
        return LaurentLoop(self.rho, self.coeffs * z, self.tail * abs(z))

    __rmul__ = __mul__

    def __call__(self, lam):
        return loop_eval(self, lam)

    def dump(self) -> str:
        """Text rows "i real imag", one per stored coefficient (test fixtures)."""
        n = self.degree
        rows = [f"{i - n} {float(self.coeffs[i].real)!r} {float(self.coeffs[i].imag)!r}"
                for i in range(self.coeffs.size)]
        return "\n".join(rows)

    @staticmethod
    def parse(text: str, rho: float) -> "LaurentLoop":
        entries = {}
        for line in text.strip().splitlines():
            i_s, re_s, im_s = line.split()
            entries[int(i_s)] = float(re_s) + 1j * float(im_s)
        n = max(1, max(abs(i) for i in entries))
        return loop_from_coeffs(entries, rho=rho, degree=n)


def _coerce(value, template: LaurentLoop) -> LaurentLoop:
    if isinstance(value, LaurentLoop):
        return value
    return constant_loop(complex(value), rho=template.rho, degree=template.degree)


def _align(a: LaurentLoop, b: LaurentLoop):
    if a.rho != b.rho:
        raise InvalidOperandError(f"mixed weights rho={a.rho} vs rho={b.rho}")
    n = max(a.degree, b.degree)
    return a.pad_to(n), b.pad_to(n)


def loop_from_coeffs(entries, rho: float = defaults.RHO, degree: int | None = None) -> LaurentLoop:
    """Build a loop from {power: coefficient} or from a [-N..N] array."""
    if isinstance(entries, dict):
        n = degree if degree is not None else max(1, max((abs(i) for i in entries), default=1))
        n = _as_index(n)
        c = np.zeros(2 * n + 1, dtype=complex)
        for i, v in entries.items():
            if abs(i) > n:
                raise InvalidInputError(f"power {i} exceeds truncation degree {n}")
            c[i + n] = v
        return LaurentLoop(rho, c)
    c = np.asarray(entries, dtype=complex)
    loop = LaurentLoop(rho, c)
    if degree is not None:
        loop = loop.pad_to(degree) if degree > loop.degree else loop.truncate(degree)
    return loop


def constant_loop(value, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION) -> LaurentLoop:
    return loop_from_coeffs({0: complex(value)}, rho=rho, degree=degree)


def monomial(power: int, coefficient=1.0, rho: float = defaults.RHO,
             degree: int | None = None) -> LaurentLoop:
    n = degree if degree is not None else max(abs(power), 1)
    return loop_from_coeffs({power: complex(coefficient)}, rho=rho, degree=n)


def zero_loop(rho: float = defaults.RHO, degree: int = defaults.TRUNCATION) -> LaurentLoop:
    return LaurentLoop(rho, np.zeros(2 * _as_index(degree) + 1, dtype=complex))


def mul(a: LaurentLoop, b: LaurentLoop) -> LaurentLoop:
    """Truncated Cauchy product. Submultiplicative in the Wiener norm."""
    a, b = _align(a, b)
    n = a.degree
    full = np.convolve(a.coeffs, b.coeffs)  # powers [-2n, 2n]
    kept = full[n:-n] if n > 0 else full
    dropped = np.concatenate([full[:n], full[-n:]])
    idx = np.concatenate([np.arange(-2 * n, -n), np.arange(n + 1, 2 * n + 1)])
    mass = float(np.sum(np.abs(dropped) * a.rho ** np.abs(idx)))
    tail = mass + a.tail * wiener_norm(b) + b.tail * wiener_norm(a) + a.tail * b.tail
    return LaurentLoop(a.rho, kept, tail)


def star(f: LaurentLoop) -> LaurentLoop:
    """(f*)_i = conj(f_{-i}); the involution fixing real-on-circle loops."""
    return LaurentLoop(f.rho, np.conj(f.coeffs[::-1]), f.tail)


def project(f: LaurentLoop, part: str) -> LaurentLoop:
    """Component of f in the direct sum W^<0 + W^0 + W^>0."""
    n = f.degree
    c = np.zeros_like(f.coeffs)
    if part == "minus":
        c[:n] = f.coeffs[:n]
    elif part == "zero":
        c[n] = f.coeffs[n]
    elif part == "plus":
        c[n + 1:] = f.coeffs[n + 1:]
    else:
        raise InvalidInputError(f"part must be minus|zero|plus, got {part!r}")
    return LaurentLoop(f.rho, c, f.tail)


def wiener_norm(f: LaurentLoop) -> float:
    n = f.degree
    idx = np.abs(np.arange(-n, n + 1))
    return float(np.sum(np.abs(f.coeffs) * f.rho ** idx))


def plus_value(f: LaurentLoop, lam) -> complex:
    """Evaluate a W^{>=0} loop anywhere in the disk |lambda| < rho.

    Negative powers must vanish (up to roundoff); they are ignored, which is
    what makes evaluation at lambda = 0 (the central value) legal.
    """
    lam = complex(lam)
    if abs(lam) >= f.rho:
        raise DomainError(f"|lambda|={abs(lam)} outside the disk of radius {f.rho}")
    n = f.degree
    acc = 0.0j
    for i in range(2 * n, n - 1, -1):
        acc = acc * lam + f.coeffs[i]
    return acc


def loop_eval(f: LaurentLoop, lam) -> complex:
    """Sum f_i lam^i by Horner on the split halves; lam must sit in the annulus."""
    lam = complex(lam)
    r = abs(lam)
    if not (1.0 / f.rho < r < f.rho):
        raise DomainError(f"|lambda|={r} outside annulus (1/{f.rho}, {f.rho})")
    n = f.degree
    plus = 0.0j
    for i in range(2 * n, n - 1, -1):  # powers n .. 0
        plus = plus * lam + f.coeffs[i]
    minus = 0.0j
    ilam = 1.0 / lam
    for i in range(0, n):              # powers -n .. -1
        minus = minus * ilam + f.coeffs[i]
    return plus + minus * ilam


# -- circle-grid helpers ---------------------------------------------------

def grid_size(degree: int, factor: int = 4, minimum: int = 64) -> int:
    k = 1
    need = max(minimum, factor * degree + 4)
    while k < need:
        k *= 2
    return k


def grid_points(k: int) -> np.ndarray:
    return np.exp(2j * np.pi * np.arange(k) / k)


def samples_from_coeffs(coeffs: np.ndarray, k: int) -> np.ndarray:
    """Values on the k-point circle grid of the [-N..N] coefficient array."""
    n = (coeffs.shape[-1] - 1) // 2
    if k < coeffs.shape[-1]:
        raise InvalidInputError("grid too small for the coefficient array")
    buf = np.zeros(coeffs.shape[:-1] + (k,), dtype=complex)
    buf[..., : n + 1] = coeffs[..., n:]
    if n > 0:
        buf[..., -n:] = coeffs[..., :n]
    return np.fft.ifft(buf, axis=-1) * k


def coeffs_from_samples(samples: np.ndarray, degree: int) -> tuple[np.ndarray, float]:
    """Fold k-point circle samples to [-N..N] coefficients plus dropped mass.

    The dropped mass is reported unweighted (rho weighting is applied by the
    caller when it matters); it is an aliasing diagnostic, not a bound.
    """
    k = samples.shape[-1]
    c = np.fft.fft(samples, axis=-1) / k
    n = degree
    out = np.zeros(samples.shape[:-1] + (2 * n + 1,), dtype=complex)
    out[..., n:] = c[..., : n + 1]
    if n > 0:
        out[..., :n] = c[..., -n:]
    hi = k // 2
    keep = min(n, hi)
    dropped = c[..., keep + 1: k - keep] if k - 2 * keep - 1 > 0 else c[..., :0]
    mass = float(np.max(np.sum(np.abs(dropped), axis=-1))) if dropped.size else 0.0
    return out, mass


def loop_reciprocal(f: LaurentLoop, degree: int | None = None) -> LaurentLoop:
    """1/f by pointwise inversion on a circle grid; f must not vanish there."""
    n = degree if degree is not None else f.degree
    k = grid_size(max(n, f.degree))
    vals = samples_from_coeffs(f.coeffs, k)
    small = np.min(np.abs(vals))
    if small < 1e-14 * (1 + np.max(np.abs(vals))):
        raise InvalidInputError("loop vanishes on the unit circle; not invertible")
    c, mass = coeffs_from_samples(1.0 / vals, n)
    return LaurentLoop(f.rho, c, mass)


def loop_sqrt(f: LaurentLoop, degree: int | None = None) -> LaurentLoop:
    """Square root of a loop that does not vanish or wind around 0 on the circle.

    The branch is continuous along the circle and anchored at the principal
    value at lambda = 1.
    """
    n = degree if degree is not None else f.degree
    k = grid_size(max(n, f.degree))
    vals = samples_from_coeffs(f.coeffs, k)
    if np.min(np.abs(vals)) < 1e-14 * (1 + np.max(np.abs(vals))):
        raise InvalidInputError("loop vanishes on the unit circle; no square root")
    ang = np.angle(vals)
    phase = np.unwrap(ang)
    closing = ang[0] - phase[-1]
    closing -= 2 * np.pi * np.round(closing / (2 * np.pi))
    winding = round((phase[-1] + closing - phase[0]) / (2 * np.pi))
    if winding != 0:
        raise BranchError(f"loop winds {winding}x around zero; square root has no branch")
    root = np.sqrt(np.abs(vals)) * np.exp(0.5j * phase)
    c, mass = coeffs_from_samples(root, n)
    return LaurentLoop(f.rho, c, mass)


# -- 2x2 loop matrices -----------------------------------------------------

@dataclass(frozen=True)
class LoopMatrix:
    """2x2 matrix of truncated loops, stored as one complex array (2, 2, 2N+1)."""

    rho: float
    array: np.ndarray
    det_tag: bool = False
    tail: float = 0.0

    def __post_init__(self):
        a = np.asarray(self.array, dtype=complex)
        if a.shape[:2] != (2, 2) or a.ndim != 3 or a.shape[2] % 2 != 1 or a.shape[2] < 3:
            raise InvalidInputError("loop matrix array must have shape (2, 2, 2N+1), N >= 1")
        a = np.array(a, copy=True)
        a.flags.writeable = False
        object.__setattr__(self, "array", a)

    # construction ---------------------------------------------------------

    @staticmethod
    def from_entries(entries, det_tag: bool = False) -> "LoopMatrix":
        loops = [[e if isinstance(e, LaurentLoop) else None for e in row] for row in entries]
        flat = [e for row in entries for e in row if isinstance(e, LaurentLoop)]
        if not flat:
            raise InvalidInputError("at least one entry must be a LaurentLoop")
        rho = flat[0].rho
        n = max(e.degree for e in flat)
        arr = np.zeros((2, 2, 2 * n + 1), dtype=complex)
        tail = 0.0
        for i in range(2):
            for j in range(2):
                e = entries[i][j]
                if not isinstance(e, LaurentLoop):
                    e = constant_loop(complex(e), rho=rho, degree=n)
                if e.rho != rho:
                    raise InvalidOperandError("mixed weights in loop matrix")
                arr[i, j] = e.pad_to(n).coeffs
                tail += e.tail
        return LoopMatrix(rho, arr, det_tag, tail)

    @staticmethod
    def identity(rho: float = defaults.RHO, degree: int = defaults.TRUNCATION) -> "LoopMatrix":
        arr = np.zeros((2, 2, 2 * _as_index(degree) + 1), dtype=complex)
        arr[0, 0, degree] = 1.0
        arr[1, 1, degree] = 1.0
        return LoopMatrix(rho, arr, det_tag=True)

    @staticmethod
    def from_constant(m, rho: float = defaults.RHO, degree: int = defaults.TRUNCATION,
                      det_tag: bool = False) -> "LoopMatrix":
        m = np.asarray(m, dtype=complex)
        arr = np.zeros((2, 2, 2 * _as_index(degree) + 1), dtype=complex)
        arr[:, :, degree] = m
        return LoopMatrix(rho, arr, det_tag)

    # views ------------------------------------------------------------------

    @property
    def degree(self) -> int:
        return (self.array.shape[2] - 1) // 2

    def entry(self, i: int, j: int) -> LaurentLoop:
        return LaurentLoop(self.rho, self.array[i, j], self.tail)

    def pad_to(self, n: int) -> "LoopMatrix":
        if n < self.degree:
            raise InvalidInputError("pad_to cannot shrink; use truncate")
        extra = n - self.degree
        if extra == 0:
            return self
        arr = np.pad(self.array, ((0, 0), (0, 0), (extra, extra)))
        return LoopMatrix(self.rho, arr, self.det_tag, self.tail)

    def truncate(self, n: int) -> "LoopMatrix":
        if n >= self.degree:
            return self.pad_to(n)
        k = self.degree - n
        dropped = np.concatenate([self.array[:, :, :k], self.array[:, :, -k:]], axis=2)
        idx = np.concatenate([np.arange(-self.degree, -n), np.arange(n + 1, self.degree + 1)])
        mass = float(np.max(np.sum(np.abs(dropped) * self.rho ** np.abs(idx), axis=2)))
        return LoopMatrix(self.rho, self.array[:, :, k:-k], self.det_tag, self.tail + mass)

    def at(self, lam) -> np.ndarray:
        """Evaluate to a plain 2x2 complex matrix."""
        lam = complex(lam)
        n = self.degree
        powers = lam ** np.arange(-n, n + 1)
        return self.array @ powers

    def d_lambda(self) -> "LoopMatrix":
        """Termwise lambda-derivative (exact at truncation level)."""
        n = self.degree
        weights = np.arange(-n, n + 1)
        arr = np.zeros_like(self.array)
        # d(lambda^i)/dlambda = i lambda^(i-1): shift down by one power
        shifted = self.array * weights
        arr[:, :, :-1] = shifted[:, :, 1:]
        dropped = shifted[:, :, 0]
        mass = float(np.max(np.abs(dropped)) * self.rho ** (n + 1))
        return LoopMatrix(self.rho, arr, False, self.tail + mass)

    def d_lambda_at(self, lam) -> np.ndarray:
        lam = complex(lam)
        n = self.degree
        i = np.arange(-n, n + 1)
        powers = i * lam ** (i - 1)
        return self.array @ powers

    # algebra -----------------------------------------------------------------

    def __add__(self, other):
        a, b = _align_mat(self, other)
        return LoopMatrix(a.rho, a.array + b.array, False, a.tail + b.tail)

    def __sub__(self, other):
        a, b = _align_mat(self, other)
        return LoopMatrix(a.rho, a.array - b.array, False, a.tail + b.tail)

    def __neg__(self):
        return LoopMatrix(self.rho, -self.array, False, self.tail)

    def __mul__(self, scalar):
        if isinstance(scalar, LaurentLoop):
            rows = [[mul(self.entry(i, j), scalar) for j in range(2)] for i in range(2)]
            return LoopMatrix.from_entries(rows)
        z = complex(scalar)
        return LoopMatrix(self.rho, self.array * z, False, self.tail * abs(z))

    __rmul__ = __mul__

    def __matmul__(self, other: "LoopMatrix") -> "LoopMatrix":
        a, b = _align_mat(self, other)
        n = a.degree
        full = np.zeros((2, 2, 4 * n + 1), dtype=complex)
        for i in range(2):
            for j in range(2):
                acc = np.convolve(a.array[i, 0], b.array[0, j])
                acc = acc + np.convolve(a.array[i, 1], b.array[1, j])
                full[i, j] = acc
        kept = full[:, :, n:-n] if n > 0 else full
        dropped = np.concatenate([full[:, :, :n], full[:, :, -n:]], axis=2)
        idx = np.concatenate([np.arange(-2 * n, -n), np.arange(n + 1, 2 * n + 1)])
        mass = float(np.max(np.sum(np.abs(dropped) * a.rho ** np.abs(idx), axis=2)))
        tail = mass + a.tail * b.norm() + b.tail * a.norm() + a.tail * b.tail
        return LoopMatrix(a.rho, kept, a.det_tag and b.det_tag, tail)

    def det(self) -> LaurentLoop:
        a, b = self.entry(0, 0), self.entry(0, 1)
        c, d = self.entry(1, 0), self.entry(1, 1)
        return mul(a, d) - mul(b, c)

    def trace(self) -> LaurentLoop:
        return self.entry(0, 0) + self.entry(1, 1)

    def inverse(self) -> "LoopMatrix":
        """Adjugate divided by the determinant (grid reciprocal)."""
        det = self.det()
        inv_det = loop_reciprocal(det, degree=self.degree)
        a, b = self.entry(0, 0), self.entry(0, 1)
        c, d = self.entry(1, 0), self.entry(1, 1)
        adj = LoopMatrix.from_entries([[d, -b], [-c, a]])
        return adj * inv_det

    def star(self) -> "LoopMatrix":
        """Conjugate transpose on the circle: (M*)_{ij} = (M_{ji})^*."""
        arr = np.conj(self.array[:, :, ::-1]).transpose(1, 0, 2)
        return LoopMatrix(self.rho, arr, self.det_tag, self.tail)

    def norm(self) -> float:
        """Max over entries of the Wiener norm (crude but submultiplicative-ish)."""
        n = self.degree
        idx = np.abs(np.arange(-n, n + 1))
        return float(np.max(np.sum(np.abs(self.array) * self.rho ** idx, axis=2)))

    def circle_operator_norm(self, samples: int = 64) -> float:
        """Max spectral norm over circle samples."""
        vals = samples_from_coeffs(self.array, grid_size(self.degree, minimum=samples))
        mats = vals.transpose(2, 0, 1)
        return float(np.max(np.linalg.norm(mats, ord=2, axis=(1, 2))))

    # predicates ---------------------------------------------------------------

    def is_traceless(self, tol: float = 1e-12) -> bool:
        return wiener_norm(self.trace()) <= tol * max(1.0, self.norm())

    def is_plus(self, tol: float = defaults.DET_TOL) -> bool:
        """Entries in W^{>=0} and the lambda=0 value upper triangular."""
        n = self.degree
        neg = float(np.max(np.sum(np.abs(self.array[:, :, :n]), axis=2))) if n else 0.0
        low = abs(self.array[1, 0, n])
        return neg <= tol and low <= tol

    def is_plus_real(self, tol: float = defaults.DET_TOL) -> bool:
        n = self.degree
        d0, d1 = self.array[0, 0, n], self.array[1, 1, n]
        ok = abs(d0.imag) <= tol and abs(d1.imag) <= tol and d0.real > 0 and d1.real > 0
        return self.is_plus(tol) and ok

    def unitary_defect(self, samples: int = 33) -> float:
        k = grid_size(self.degree, minimum=samples)
        vals = samples_from_coeffs(self.array, k).transpose(2, 0, 1)
        prod = vals @ np.conj(vals).transpose(0, 2, 1)
        return float(np.max(np.abs(prod - np.eye(2))))

    def is_unitary_on_circle(self, tol: float = defaults.UNITARY_TOL) -> bool:
        return self.unitary_defect() <= tol

    def det_defect(self) -> float:
        one = constant_loop(1.0, rho=self.rho, degree=self.degree)
        return wiener_norm(self.det() - one)

    def su2_algebra_defect(self) -> float:
        """Distance from the anti-hermitian loop algebra (trace-free assumed)."""
        a = self.entry(0, 0)
        d1 = wiener_norm(a + star(a))
        d2 = wiener_norm(self.entry(0, 1) + star(self.entry(1, 0)))
        return max(d1, d2)


def _align_mat(a: LoopMatrix, b: LoopMatrix):
    if not isinstance(b, LoopMatrix):
        raise InvalidOperandError(f"expected LoopMatrix, got {type(b).__name__}")
    if a.rho != b.rho:
        raise InvalidOperandError(f"mixed weights rho={a.rho} vs rho={b.rho}")
    n = max(a.degree, b.degree)
    return a.pad_to(n), b.pad_to(n)


# -- matrix exp/log on the circle -------------------------------------------

def _exp2x2_traceless(mats: np.ndarray) -> np.ndarray:
    """exp of traceless 2x2 matrices, batched; uses A^2 = -det(A) I."""
    det = mats[..., 0, 0] * mats[..., 1, 1] - mats[..., 0, 1] * mats[..., 1, 0]
    theta = np.sqrt(-det + 0j)
    small = np.abs(theta) < 1e-6
    cosh = np.cosh(theta)
    sinhc = np.where(small, 1.0 + theta**2 / 6.0 + theta**4 / 120.0,
                     np.sinh(np.where(small, 1.0, theta)) / np.where(small, 1.0, theta))
    eye = np.zeros_like(mats)
    eye[..., 0, 0] = 1.0
    eye[..., 1, 1] = 1.0
    return cosh[..., None, None] * eye + sinhc[..., None, None] * mats


def _log2x2_near_identity(mats: np.ndarray) -> np.ndarray:
    """log of unimodular 2x2 matrices near the identity, batched.

    Writes M = cosh(theta) I + sinhc(theta) A with A traceless and returns A.
    Even functions of theta only, so the sqrt branch cancels.
    """
    q = 0.5 * (mats[..., 0, 0] + mats[..., 1, 1])
    theta = 2.0 * np.arcsinh(np.sqrt(0.5 * (q - 1.0) + 0j))
    small = np.abs(theta) < 1e-6
    factor = np.where(small, 1.0 - theta**2 / 6.0 + 7 * theta**4 / 360.0,
                      np.where(small, 1.0, theta) / np.sinh(np.where(small, 1.0, theta)))
    eye = np.zeros_like(mats)
    eye[..., 0, 0] = 1.0
    eye[..., 1, 1] = 1.0
    return factor[..., None, None] * (mats - q[..., None, None] * eye)


def loop_exp(a: LoopMatrix) -> LoopMatrix:
    """Pointwise 2x2 exponential on a circle grid, re-expanded to coefficients."""
    if not a.is_traceless(1e-10):
        raise InvalidInputError("loop_exp requires a traceless argument")
    k = grid_size(a.degree)
    vals = samples_from_coeffs(a.array, k).transpose(2, 0, 1)
    expd = _exp2x2_traceless(vals).transpose(1, 2, 0)
    c, mass = coeffs_from_samples(expd, a.degree)
    return LoopMatrix(a.rho, c, det_tag=True, tail=a.tail + mass)


def loop_log(m: LoopMatrix, log_radius: float = defaults.LOG_RADIUS) -> LoopMatrix:
    """Inverse of loop_exp near the identity; lands in traceless matrices."""
    gap = (m - LoopMatrix.identity(m.rho, m.degree)).circle_operator_norm()
    if gap >= log_radius:
        raise NotNearIdentityError(
            f"matrix log outside radius: distance {gap:.3e} >= {log_radius}")
    k = grid_size(m.degree)
    vals = samples_from_coeffs(m.array, k).transpose(2, 0, 1)
    logd = _log2x2_near_identity(vals).transpose(1, 2, 0)
    c, mass = coeffs_from_samples(logd, m.degree)
    return LoopMatrix(m.rho, c, det_tag=False, tail=m.tail + mass)


# -- su(2) model of R^3 ------------------------------------------------------

def vec_to_su2(x) -> np.ndarray:
    """Real 3-vector to its anti-hermitian 2x2 image; det(X) = |x|^2."""
    x1, x2, x3 = (float(v) for v in x)
    return -1j * np.array([[-x3, x1 + 1j * x2], [x1 - 1j * x2, x3]], dtype=complex)


def su2_to_vec(mat, check: bool = False) -> np.ndarray:
    """Inverse of vec_to_su2; optionally verifies the matrix is in the image."""
    m = np.asarray(mat, dtype=complex)
    x1 = ((m[0, 1] + m[1, 0]) / (-2j)).real
    x2 = (0.5 * (m[0, 1] - m[1, 0])).real
    x3 = m[0, 0].imag
    if check:
        defect = np.max(np.abs(m - vec_to_su2((x1, x2, x3))))
        if defect > 1e-9 * (1 + np.max(np.abs(m))):
            raise InvalidInputError(f"matrix is not anti-hermitian traceless: defect {defect:.2e}")
    return np.array([x1, x2, x3])


def su2_basis():
    """Images of the canonical basis vectors e1, e2, e3."""
    return vec_to_su2((1, 0, 0)), vec_to_su2((0, 1, 0)), vec_to_su2((0, 0, 1))


@dataclass(frozen=True)
class Su2Vector:
    """A point of R^3 together with its 2x2 anti-hermitian image."""

    x: np.ndarray
    X: np.ndarray = field(default=None)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        x.flags.writeable = False
        object.__setattr__(self, "x", x)
        X = vec_to_su2(x) if self.X is None else np.asarray(self.X, dtype=complex)
        X.flags.writeable = False
        object.__setattr__(self, "X", X)

    @staticmethod
    def from_matrix(mat, check: bool = True) -> "Su2Vector":
        return Su2Vector(su2_to_vec(mat, check=check))

    def norm(self) -> float:
        return float(np.linalg.norm(self.x))
