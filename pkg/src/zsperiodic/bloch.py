"""Normalized Bloch-Floquet solutions, Weyl values and potential recovery.

psi^+ always carries the multiplier rho with |rho| < 1 and psi^- carries
1/rho.  Both have first component 1 at x = 0.  Off the real axis psi^+ is
the decaying solution in the direction of increasing x, so it is
propagated backwards from x = L, where it equals rho psi^+(0); the forward
combination y~1 + c y~2 would cancel catastrophically for large Im z.

Psi = (psi^-, psi^+) in C+ and (psi^+, psi^-) in C-.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import monodromy as mono
from .monodromy import DEFAULT_TOL, U_INV
from .potential import PeriodicPotential, evaluate, evaluate_dx, l2_accumulant


class BlochError(RuntimeError):
    pass


@dataclass(frozen=True)
class BlochPair:
    z: complex
    x: float
    psi_minus: np.ndarray
    psi_plus: np.ndarray
    rho: complex


@dataclass(frozen=True)
class _Weyl:
    s: float  # |Im z|
    rho_scaled: complex  # rho e^{sL}
    c_minus: complex
    c_plus: complex
    W: np.ndarray  # e^{-sL} M~


def scaled_multiplier(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL):
    """(rho e^{sL}, s, e^{-sL} M~) with s = |Im z|; no overflow for large Im z."""
    z = complex(z)
    L = p.period
    s = abs(z.imag)
    W = mono.transformed_solution(p, z, L, tol, shift=s)
    dh = 0.5 * (W[0, 0] + W[1, 1])
    e2 = math.exp(-2.0 * s * L)
    r = np.sqrt(dh * dh - e2)
    big = dh + r if abs(dh + r) >= abs(dh - r) else dh - r
    rho_s = 1.0 / big
    if s == 0.0 and abs(abs(rho_s) - 1) < 1e-12:
        # on the axis keep the limit from above
        rho_s = mono.multiplier_real_axis(*mono.discriminant_real(p, z.real, tol))
    return complex(rho_s), s, W


def _weyl(p: PeriodicPotential, z: complex, tol: float, eps: float = 1e-6) -> _Weyl:
    """Weyl values from the growth-normalized monodromy e^{-sL} M~, s = |Im z|."""
    z = complex(z)
    L = p.period
    rho_s, s, W = scaled_multiplier(p, z, tol)
    w12 = W[0, 1]
    if abs(w12) < eps * max(1.0, abs(W[0, 0]), abs(W[1, 1])):
        raise BlochError(f"z = {z!r} is within tolerance of a Dirichlet eigenvalue (|y12| = {abs(w12):.3g})")
    e2 = math.exp(-2.0 * s * L)
    rho_low = e2 * rho_s  # rho e^{-sL}
    return _Weyl(s, complex(rho_s), (W[1, 1] - rho_low) / w12, (rho_low - W[0, 0]) / w12, W)


def weyl_values(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> tuple[complex, complex]:
    """(psi^-_2(0, z), psi^+_2(0, z))."""
    w = _weyl(p, z, tol)
    return complex(w.c_minus), complex(w.c_plus)


def _normalized(p: PeriodicPotential, z: complex, x: float, w: _Weyl, tol: float):
    """(e^{i th z x} psi^-, e^{-i th z x} psi^+) with th = sgn Im z, for 0 <= x <= L."""
    L = p.period
    s = w.s
    th = 1.0 if z.imag >= 0 else -1.0
    ph = np.exp(1j * th * z.real * x)
    Wf = mono.transformed_solution(p, z, x, tol, shift=s)
    um = ph * (Wf @ np.array([1.0, w.c_minus]))
    Wb = mono.transformed_solution(p, z, x, tol, x0=L, shift=-s)
    up = (w.rho_scaled / ph) * (Wb @ np.array([1.0, w.c_plus]))
    return um, up


def normalized_pair(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL):
    """psi^-, psi^+ with their exponential factors e^{-+i z x} (C+) removed; any real x."""
    z = complex(z)
    w = _weyl(p, z, tol)
    L = p.period
    n, xr = divmod(float(x), L)
    um, up = _normalized(p, z, xr, w, tol)
    if n:
        # shifting by nL multiplies psi^-+ by rho^-+n and the removed factor by e^{+-i th z nL}
        th = 1.0 if z.imag >= 0 else -1.0
        f = np.exp(1j * th * z * n * L)
        rho = w.rho_scaled * math.exp(-w.s * L)
        um = um * (f / rho ** n if w.s * L * n < 600 else np.exp(1j * th * z * n * L - n * np.log(rho)))
        up = up * np.exp(n * np.log(rho) - 1j * th * z * n * L)
    return um, up, w


def bloch_solutions(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL) -> BlochPair:
    z = complex(z)
    um, up, w = normalized_pair(p, z, x, tol)
    th = 1.0 if z.imag >= 0 else -1.0
    e = np.exp(-1j * th * z * x)
    rho = w.rho_scaled * math.exp(-w.s * p.period)
    return BlochPair(z, float(x), um * e, up / e, complex(rho))


def psi_matrix(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL) -> np.ndarray:
    z = complex(z)
    if z.imag == 0.0:
        raise BlochError("Psi is defined off the real axis; use boundary_psi for one-sided values")
    b = bloch_solutions(p, z, x, tol)
    if z.imag > 0:
        return np.column_stack([b.psi_minus, b.psi_plus])
    return np.column_stack([b.psi_plus, b.psi_minus])


def boundary_offset(z: float) -> float:
    # one-sided values carry an O(delta) error; 1e-11 keeps it far below the checks
    return 1e-11 * (1.0 + abs(z))


def boundary_psi(p: PeriodicPotential, z: float, x: float, side: int, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Psi at z + side * i delta, delta = boundary_offset(z)."""
    return psi_matrix(p, complex(z, side * boundary_offset(z)), x, tol)


def det_psi_expected(p: PeriodicPotential, z: complex, tol: float = DEFAULT_TOL) -> complex:
    """-+2 sqrt(Delta^2 - 1)/y~12(L, z) for z in C+-."""
    res = mono.monodromy(p, z, tol)
    s = -1.0 if complex(z).imag > 0 else 1.0
    return complex(s * 2.0 * res.sqrt_disc / res.M_tilde[0, 1])


def quasi_periodicity_residual(p: PeriodicPotential, z: complex, x: float, tol: float = DEFAULT_TOL) -> float:
    b0 = bloch_solutions(p, z, x, tol)
    b1 = bloch_solutions(p, z, x + p.period, tol)
    rm = np.abs(b1.psi_minus - b0.psi_minus / b0.rho).max() / max(1.0, np.abs(b1.psi_minus).max())
    rp = np.abs(b1.psi_plus - b0.psi_plus * b0.rho).max() / max(1.0, np.abs(b0.psi_plus).max())
    return float(max(rm, rp))


def recovery_matrix(p: PeriodicPotential, x: float, z: complex, tol: float = DEFAULT_TOL) -> np.ndarray:
    """i z [s3, U^-1 Psi e^{i z x s3}], whose (1, 2) entry tends to q(x)."""
    z = complex(z)
    if z.imag <= 0:
        raise BlochError("recovery is taken along the upper imaginary direction")
    um, up, _ = normalized_pair(p, z, x, tol)
    X = U_INV @ np.column_stack([um, up])
    S3 = np.diag([1.0, -1.0])
    return 1j * z * (S3 @ X - X @ S3)


@dataclass(frozen=True)
class Reconstruction:
    x: float
    q_hat: complex
    error_estimate: float
    raw: tuple[complex, ...]
    R: tuple[float, ...]
    diverging: bool


def _extrapolate(h: np.ndarray, vals: np.ndarray, degree: int) -> complex:
    V = np.vander(h, degree + 1, increasing=True).astype(complex)
    return complex(np.linalg.lstsq(V, vals, rcond=None)[0][0])


def reconstruct_from_bloch(p: PeriodicPotential, x: float, R_sequence=(20.0, 40.0, 80.0),
                           tol: float = 1e-12) -> Reconstruction:
    """q(x) from the large-z limit along z = iR with Richardson extrapolation.

    The raw values obey q_R = q + a/R + b/R^2 + ...; q is the constant term
    of that model fitted in h = 1/R.  The error estimate compares against
    the one-order-lower fit on the largest R values.
    """
    Rs = np.asarray(sorted(float(r) for r in R_sequence))
    if Rs.size < 2:
        raise ValueError("need at least two R values")
    raw = np.array([recovery_matrix(p, x, 1j * R, tol)[0, 1] for R in Rs])
    h = 1.0 / Rs
    deg = min(Rs.size - 1, 2)
    q_hat = _extrapolate(h, raw, deg)
    q_low = _extrapolate(h[1:], raw[1:], deg - 1)
    diffs = np.abs(np.diff(raw))
    diverging = bool(np.any(diffs[1:] >= diffs[:-1]))
    return Reconstruction(float(x), q_hat, float(abs(q_hat - q_low)), tuple(complex(v) for v in raw),
                          tuple(float(r) for r in Rs), diverging)


def accumulant(p: PeriodicPotential, x: float) -> float:
    """int_0^x |q|^2 for any x >= 0."""
    L = p.period
    n, xr = divmod(float(x), L)
    return n * l2_accumulant(p, L) + l2_accumulant(p, xr)


def _exp_form(which: str, z: complex) -> int:
    # -1: psi ~ e^{-izx}(1, -i) (psi^- in C+, psi^+ in C-); +1: psi ~ e^{izx}(1, i)
    return -1 if (which == "minus") == (complex(z).imag > 0) else 1


def psi_expansion(p: PeriodicPotential, x: float, z: complex, which: str) -> np.ndarray:
    """First-order large-z expansion of psi^- or psi^+, exponential factor included.

    With K = int_0^x |q|^2, the e^{-izx} form is
        (1 - (K + q*(x) - q*(0))/(2iz), -i + (K - q*(x) - q*(0))/(2z))
    and the e^{izx} form is
        (1 + (K + q(x) - q(0))/(2iz),  i + (K - q(x) - q(0))/(2z)).
    The q(0) terms come from the normalization psi_1(0) = 1.
    """
    z = complex(z)
    K = accumulant(p, x)
    q = complex(evaluate(p, x))
    q0 = complex(evaluate(p, 0.0))
    if _exp_form(which, z) < 0:
        qc, q0c = np.conj(q), np.conj(q0)
        v = np.array([1 - (K + qc - q0c) / (2j * z), -1j + (K - qc - q0c) / (2 * z)])
        return np.exp(-1j * z * x) * v
    v = np.array([1 + (K + q - q0) / (2j * z), 1j + (K - q - q0) / (2 * z)])
    return np.exp(1j * z * x) * v


def weyl_expansion(p: PeriodicPotential, z: complex, which: str, order: int = 2) -> complex:
    """Large-z expansion of psi^-_2(0, z) or psi^+_2(0, z) through 1/z^order.

    e^{izx} form:  i - q(0)/z + (q(0)^2 + q_x(0))/(2i z^2)
    e^{-izx} form: the same with q -> q* and i -> -i.
    """
    z = complex(z)
    q0 = complex(evaluate(p, 0.0))
    qx = complex(evaluate_dx(p, 0.0))
    if _exp_form(which, z) < 0:
        q0, qx = np.conj(q0), np.conj(qx)
        terms = [-1j, -q0 / z, -(q0 * q0 + qx) / (2j * z * z)]
    else:
        terms = [1j, -q0 / z, (q0 * q0 + qx) / (2j * z * z)]
    return complex(sum(terms[: order + 1]))
