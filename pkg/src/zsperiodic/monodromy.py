"""Principal solution, monodromy matrix, Floquet discriminant and multiplier.

The ZS system v_x = (-i z s3 + Q) v is integrated in the rotated frame
Y~ = U Y U^-1, U = [[1, 1], [-i, i]], whose generator

    A~(x, z) = [[Re q, z + Im q], [Im q - z, -Re q]]

is real for real z.  Real z therefore gives an exactly real Y~, which makes
the discriminant real to the last bit and lets a complex-step evaluation
(z + i h, h ~ 1e-20) return Delta'(z) alongside Delta(z) from one solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate._ivp import dop853_coefficients as _dop

from .potential import PeriodicPotential

DEFAULT_TOL = 1e-10
CSTEP = 1e-20

U = np.array([[1, 1], [-1j, 1j]])
U_INV = np.linalg.inv(U)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]])
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
_D = np.diag([np.exp(-0.25j * np.pi), np.exp(0.25j * np.pi)])
U_CHECK = U @ _D
U_CHECK_INV = np.linalg.inv(U_CHECK)

_NS = _dop.N_STAGES
_A = np.ascontiguousarray(_dop.A[:_NS, :_NS])
_B = np.ascontiguousarray(_dop.B)
_C = np.ascontiguousarray(_dop.C[:_NS])
_E3 = np.ascontiguousarray(_dop.E3)
_E5 = np.ascontiguousarray(_dop.E5)


class IntegrationError(RuntimeError):
    pass


@njit(cache=True)
def _q_at(x, c, k0, dk):
    # q(x) = sum_n c_n exp(i (k0 + n dk) x)
    w = np.exp(1j * dk * x)
    e = np.exp(1j * k0 * x)
    s = 0j
    for n in range(c.size):
        s += c[n] * e
        e *= w
    return s


@njit(cache=True)
def _rhs(x, y, z, c, k0, dk, shift, out):
    q = _q_at(x, c, k0, dk)
    qr = q.real
    qi = q.imag
    a11 = qr - shift
    a12 = z + qi
    a21 = qi - z
    a22 = -qr - shift
    out[0] = a11 * y[0] + a12 * y[2]
    out[1] = a11 * y[1] + a12 * y[3]
    out[2] = a21 * y[0] + a22 * y[2]
    out[3] = a21 * y[1] + a22 * y[3]


@njit(cache=True)
def _integrate(z, x0, x1, y0, c, k0, dk, shift, rtol, atol, A, B, C, E3, E5, max_steps):
    ns = C.size
    y = y0.copy()
    if x1 == x0:
        return y, 0, 0
    direction = 1.0 if x1 > x0 else -1.0
    span = abs(x1 - x0)
    qmax = 0.0
    for n in range(c.size):
        qmax += abs(c[n])
    rate = abs(z) + qmax + abs(k0) + abs(shift) + 1.0
    h = min(span, 0.5 / rate)
    K = np.empty((ns + 1, 4), dtype=np.complex128)
    ytmp = np.empty(4, dtype=np.complex128)
    x = x0
    _rhs(x, y, z, c, k0, dk, shift, K[0])
    steps = 0
    while True:
        remaining = span - abs(x - x0)
        if remaining <= 1e-15 * span:
            break
        if h > remaining:
            h = remaining
        if h < 1e-14 * span:
            return y, steps, 2
        hs = direction * h
        for s in range(1, ns):
            for i in range(4):
                acc = 0j
                for j in range(s):
                    acc += A[s, j] * K[j, i]
                ytmp[i] = y[i] + hs * acc
            _rhs(x + C[s] * hs, ytmp, z, c, k0, dk, shift, K[s])
        ynew = np.empty(4, dtype=np.complex128)
        for i in range(4):
            acc = 0j
            for j in range(ns):
                acc += B[j] * K[j, i]
            ynew[i] = y[i] + hs * acc
        _rhs(x + hs, ynew, z, c, k0, dk, shift, K[ns])
        e5 = 0.0
        e3 = 0.0
        for i in range(4):
            sc = atol + rtol * max(abs(y[i]), abs(ynew[i]))
            a5 = 0j
            a3 = 0j
            for j in range(ns + 1):
                a5 += E5[j] * K[j, i]
                a3 += E3[j] * K[j, i]
            e5 += (abs(a5) / sc) ** 2
            e3 += (abs(a3) / sc) ** 2
        if e5 == 0.0 and e3 == 0.0:
            err = 0.0
        else:
            err = h * e5 / np.sqrt((e5 + 0.01 * e3) * 4.0)
        if err < 1.0:
            x = x + hs
            for i in range(4):
                y[i] = ynew[i]
                K[0, i] = K[ns, i]
            steps += 1
            if err == 0.0:
                fac = 10.0
            else:
                fac = min(10.0, 0.9 * err ** (-1.0 / 8.0))
            h *= fac
        else:
            h *= max(0.2, 0.9 * err ** (-1.0 / 8.0))
        if steps > max_steps:
            return y, steps, 1
    return y, steps, 0


def _fourier_arrays(p: PeriodicPotential):
    dk = 2.0 * np.pi / p.period
    return np.ascontiguousarray(p.coeffs), -p.n_max * dk, dk


def transformed_solution(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL,
                         x0: float = 0.0, shift: float = 0.0) -> np.ndarray:
    """Y~(x, z) with Y~(x0) = I (x may be below x0).

    With ``shift`` s the result is exp(-s (x - x0)) Y~(x, z); s = |Im z|
    (sign following the direction of integration) removes the exponential
    growth of the dominant solution.
    """
    c, k0, dk = _fourier_arrays(p)
    y0 = np.array([1, 0, 0, 1], dtype=np.complex128)
    max_steps = int(200 + 50 * np.ceil((abs(z) + 1) * abs(x - x0) + 1) * 20)
    y, steps, status = _integrate(complex(z), float(x0), float(x), y0, c, k0, dk, float(shift), tol, tol,
                                  _A, _B, _C, _E3, _E5, max_steps)
    if status == 2:
        raise IntegrationError(f"step size underflow at z = {z!r}")
    if status == 1:
        raise IntegrationError(f"step budget exhausted at z = {z!r}")
    if not np.all(np.isfinite(y)):
        raise IntegrationError(f"non-finite solution at z = {z!r}")
    return y.reshape(2, 2)


def principal_solution(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Y(x, z) with Y(0, z) = I."""
    return U_INV @ transformed_solution(p, z, x, tol) @ U


def to_check(Y: np.ndarray) -> np.ndarray:
    """Y -> U_check Y U_check^-1, the variant for the v1 + i v2 = 0 condition."""
    return U_CHECK @ Y @ U_CHECK_INV


def transformed_with_derivative(p: PeriodicPotential, z: float, x: float, tol: float = DEFAULT_TOL):
    """(Y~(x, z), dY~/dz) for real z by one complex-step solve."""
    h = CSTEP * (1.0 + abs(z))
    Yc = transformed_solution(p, complex(z, h), x, tol)
    return Yc.real.astype(complex), Yc.imag / h


def floquet_multiplier(delta: complex) -> complex:
    """Root of rho^2 - 2 Delta rho + 1 = 0 with the smaller modulus."""
    s = np.sqrt(delta * delta - 1)
    r1, r2 = delta + s, delta - s
    big = r1 if abs(r1) >= abs(r2) else r2
    return 1.0 / big


def multiplier_real_axis(delta: float, ddelta: float) -> complex:
    """rho at real z: the |rho| < 1 root in gaps, the limit from above in bands."""
    if abs(delta) >= 1.0:
        return complex(delta - np.sign(delta) * np.sqrt(delta * delta - 1.0))
    return complex(delta, -np.sign(ddelta) * np.sqrt(1.0 - delta * delta))


@dataclass(frozen=True)
class MonodromyResult:
    z: complex
    M: np.ndarray
    M_tilde: np.ndarray
    M_check: np.ndarray
    delta: complex
    rho: complex
    det_defect: float
    ddelta: complex | None = None
    dM_tilde: np.ndarray | None = None
    branch_ambiguous: bool = False

    @property
    def sqrt_disc(self) -> complex:
        """sqrt(Delta^2 - 1) on the branch tied to |rho| < 1: (1/rho - rho)/2."""
        return 0.5 * (1.0 / self.rho - self.rho)


def monodromy(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> MonodromyResult:
    z = complex(z)
    L = p.period
    if z.imag == 0.0:
        Mt, dMt = transformed_with_derivative(p, z.real, L, tol)
        delta = 0.5 * (Mt[0, 0] + Mt[1, 1]).real
        ddelta = 0.5 * (dMt[0, 0] + dMt[1, 1])
        rho = multiplier_real_axis(delta, ddelta)
        ambiguous = False
    else:
        Mt = transformed_solution(p, z, L, tol)
        dMt = None
        delta = 0.5 * (Mt[0, 0] + Mt[1, 1])
        ddelta = None
        rho = floquet_multiplier(delta)
        ambiguous = abs(abs(rho) - 1.0) < 1e-12
    M = U_INV @ Mt @ U
    return MonodromyResult(
        z=z, M=M, M_tilde=Mt, M_check=to_check(M), delta=complex(delta), rho=complex(rho),
        det_defect=float(abs(np.linalg.det(M) - 1.0)),
        ddelta=None if ddelta is None else complex(ddelta), dM_tilde=dMt,
        branch_ambiguous=ambiguous,
    )


def discriminant(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> complex:
    Mt = transformed_solution(p, z, p.period, tol)
    return 0.5 * (Mt[0, 0] + Mt[1, 1])


def discriminant_real(p: PeriodicPotential, z: float, tol: float = DEFAULT_TOL) -> tuple[float, float]:
    """(Delta(z), Delta'(z)) for real z."""
    Mt, dMt = transformed_with_derivative(p, z, p.period, tol)
    return 0.5 * (Mt[0, 0] + Mt[1, 1]).real, 0.5 * (dMt[0, 0] + dMt[1, 1])


def discriminant_grid(p: PeriodicPotential, z_values, tol: float = DEFAULT_TOL, threads: int = 1) -> np.ndarray:
    zs = [complex(z) for z in z_values]

    def one(iz):
        i, z = iz
        try:
            return discriminant(p, z, tol)
        except IntegrationError as exc:
            raise IntegrationError(f"index {i}: {exc}") from None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(threads) as ex:
            out = list(ex.map(one, enumerate(zs)))
    else:
        out = [one(iz) for iz in enumerate(zs)]
    return np.array(out, dtype=complex)


def scaled_discriminant(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> complex:
    """Delta(z) e^{-|Im z| L}, finite for large Im z."""
    z = complex(z)
    W = transformed_solution(p, z, p.period, tol, shift=abs(z.imag))
    return complex(0.5 * (W[0, 0] + W[1, 1]))


def discriminant_asymptotic_residual(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> float:
    """|2 Delta e^{+-izL} - (1 -+ K0/(2iz))| for z in C+- with K0 = int_0^L |q|^2; O(1/z^2)."""
    from .potential import l2_accumulant

    z = complex(z)
    if z.imag == 0.0:
        raise ValueError("the expansion holds off the real axis")
    th = 1.0 if z.imag > 0 else -1.0
    L = p.period
    lead = 2.0 * scaled_discriminant(p, z, tol) * np.exp(1j * th * z.real * L)
    K0 = l2_accumulant(p, L)
    return float(abs(lead - (1.0 - th * K0 / (2j * z))))
