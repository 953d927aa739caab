"""Riemann-Hilbert data assembled from spectral data.

Conventions (monic normalization):

* f^+(z) = prod_{sigma_k = 1} (z - gamma_k),  f^-(z) = prod_{sigma_k = -1} (z - gamma_k).
* ratio(z) = e^{i pi/4} prod_k (z - E_{2k-1})^{-1/4} (z - E_{2k})^{-1/4}
             prod_{sigma_k = 0} (z - gamma_k)^{1/2},
  every factor a principal power, so the cuts of each factor run left along
  the real axis.  ratio^4 = -P(z) with P the rational function of edges and
  sigma = 0 eigenvalues, which is what the large-z limit of
  y~12^2/(Delta^2 - 1) = -1 forces.
* r = ratio/sqrt(2).  B = i r diag(f^-, f^+) in C+ and
  B = eps conj(r(conj z)) diag(f^+, f^-) in C-, with the constant sign
  eps = (-1)^{g_+ + m(+inf)} that makes the rightmost band jump equal
  (-1)^{n + m} diag(f^-/f^+, f^+/f^-).

The exponential factors of the Hadamard products cancel between numerator
and denominator of the scalar ratio; the remaining linear exponential is
absorbed by the monic normalization, so no Hadamard constants are needed for
B.  f^0 itself does need them and is calibrated against y~12(L, z).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import bloch
from . import monodromy as mono
from .config import DEFAULT, Tolerances
from .potential import PeriodicPotential, l2_accumulant
from .spectra import SpectralData

SQRT2 = math.sqrt(2.0)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
_EIPI4 = complex(math.cos(math.pi / 4), math.sin(math.pi / 4))


class RhpError(RuntimeError):
    pass


@dataclass(frozen=True)
class Calibration:
    """Fitted constants of the Hadamard model of y~12(L, z)/2 = f^0 f^+ f^-."""

    a: complex
    b: complex
    shift_c: float
    label_offset: int
    labels: tuple[int, ...]
    points: tuple[float, float]
    prefactor_slope: complex = 0j
    prefactor: complex = complex("nan")


@dataclass(frozen=True)
class RhpData:
    data: SpectralData
    truncation_J: int = 4096
    calib: Calibration | None = None
    disk_radius: float = 0.0
    potential: PeriodicPotential | None = field(default=None, compare=False)
    tol: Tolerances = DEFAULT

    @property
    def window(self) -> tuple[float, float]:
        return (float(self.data.window[0]), float(self.data.window[1]))

    @property
    def g_plus(self) -> int:
        return max((g.k for g in self.data.gaps), default=-1)

    @property
    def epsilon(self) -> int:
        """Sign relating r in C- to the reflection of r in C+."""
        return -1 if (self.g_plus + counting_m(self.data, math.inf)) % 2 else 1


@dataclass(frozen=True)
class JumpMatrix:
    z: float
    segment_kind: str
    value: np.ndarray
    n: int
    m: int
    t: float | None = None


def _sigma0(data: SpectralData) -> list[float]:
    return sorted(g.gamma for g in data.gaps if g.sigma == 0)


def counting_m(data: SpectralData, z: float) -> int:
    """Number of sigma = 0 eigenvalues between gamma_* (closest to 0) and z."""
    g0 = _sigma0(data)
    if not g0:
        return 0
    gs = min(g0, key=abs)
    if z >= gs:
        return sum(1 for g in g0 if gs <= g <= z)
    return sum(1 for g in g0 if z < g < gs)


def disks(data: SpectralData) -> tuple[tuple[float, ...], float]:
    """Centers of the open-gap disks and their common radius (largest gap width)."""
    if not data.gaps:
        return (), 0.0
    R = max(g.E_right - g.E_left for g in data.gaps)
    return tuple(0.5 * (g.E_left + g.E_right) for g in data.gaps), float(R)


def in_domain(rhp: RhpData, z: complex) -> bool:
    """z in C minus (R union the closed disks)."""
    z = complex(z)
    if z.imag == 0.0:
        return False
    centers, R = disks(rhp.data)
    return all(abs(z - c) > R for c in centers)


# ---------------------------------------------------------------------------
# products

def _fpm(data: SpectralData, z: complex) -> tuple[complex, complex]:
    fp = fm = 1.0 + 0j
    for g in data.gaps:
        if g.sigma == 1:
            fp *= z - g.gamma
        elif g.sigma == -1:
            fm *= z - g.gamma
    return fp, fm


def _ratio_upper(data: SpectralData, z: complex) -> complex:
    # z in the closed upper half-plane; real z means z + i0
    z = complex(z.real, abs(z.imag)) if z.imag != 0.0 else complex(z.real, 0.0)
    r = _EIPI4
    for g in data.gaps:
        r *= (z - g.E_left) ** -0.25 * (z - g.E_right) ** -0.25
        if g.sigma == 0:
            r *= (z - g.gamma) ** 0.5
    return complex(r)


def _check_region(rhp: RhpData, z: complex) -> None:
    lo, hi = rhp.window
    w = hi - lo
    if not (lo + 0.1 * w <= z.real <= hi - 0.1 * w) or abs(z.imag) > 0.4 * w:
        raise RhpError(f"z = {z!r} lies outside the validated region of window {rhp.window}")


def _scaled_ratio(rhp: RhpData, z: complex, side: int) -> complex:
    """r(z) = ratio/sqrt(2) for z in C+ (side 1) or C- (side -1)."""
    if side > 0:
        return _ratio_upper(rhp.data, z) / SQRT2
    return rhp.epsilon * np.conj(_ratio_upper(rhp.data, np.conj(z))) / SQRT2


def _side_of(z: complex, side: int | None) -> int:
    if z.imag > 0:
        return 1
    if z.imag < 0:
        return -1
    if side not in (1, -1):
        raise RhpError("z is real: pass side = +1 or -1 for the boundary value")
    return side


def truncated_products(rhp: RhpData, z: complex, side: int | None = None):
    """(f^0, f^+, f^-, ratio) at z; f^0 is nan when the data are uncalibrated."""
    z = complex(z)
    _check_region(rhp, z)
    fp, fm = _fpm(rhp.data, z)
    s = 1 if z.imag > 0 else (-1 if z.imag < 0 else (side or 1))
    ratio = _scaled_ratio(rhp, z, s) * SQRT2
    f0 = f0_value(rhp, z) if rhp.calib is not None else complex("nan")
    return complex(f0), complex(fp), complex(fm), complex(ratio)


def reduced_f0(data: SpectralData, z: complex) -> complex:
    """prod over sigma = 0 movable eigenvalues of (z - gamma); the part of f^0 left in the ratio."""
    out = 1.0 + 0j
    for g in _sigma0(data):
        out *= z - g
    return complex(out)


def B_matrix(rhp: RhpData, z: complex, side: int | None = None) -> np.ndarray:
    z = complex(z)
    s = _side_of(z, side)
    fp, fm = _fpm(rhp.data, z)
    r = _scaled_ratio(rhp, z, s)
    if s > 0:
        return np.diag([1j * r * fm, 1j * r * fp])
    return np.diag([r * fp, r * fm])


# ---------------------------------------------------------------------------
# jumps

def _segment(rhp: RhpData, z: float) -> tuple[str, int]:
    gaps = sorted(rhp.data.gaps, key=lambda g: g.E_left)
    for g in gaps:
        for E in (g.E_left, g.E_right):
            if abs(z - E) < rhp.tol.eps_edge * (1 + abs(E)):
                raise RhpError(f"z = {z!r} is within the edge tolerance of E = {E!r}")
        if g.E_left < z < g.E_right:
            return "gap", g.k
    for g in gaps:
        if z < g.E_left:
            return "band", g.k
    return "band", rhp.g_plus + 1


def jump_V(rhp: RhpData, x: float, z: float, t: float | None = None) -> JumpMatrix:
    """Closed-form jump with Phi_+ = Phi_- V on the real axis."""
    z = float(z)
    kind, n = _segment(rhp, z)
    m = counting_m(rhp.data, z)
    sgn = -1.0 if (n + m) % 2 else 1.0
    if kind == "band":
        fp, fm = _fpm(rhp.data, complex(z))
        V = sgn * np.diag([fm / fp, fp / fm]).astype(complex)
    else:
        ph = -2j * z * x - (4j * z * z * t if t is not None else 0.0)
        V = sgn * 1j * np.array([[0, np.exp(ph)], [np.exp(-ph), 0]], dtype=complex)
    return JumpMatrix(z, kind, V, n, m, t)


def jump_from_B(rhp: RhpData, x: float, z: float, t: float | None = None) -> np.ndarray:
    """e^{-i theta s3} B_-^{-1} (s1) B_+ e^{i theta s3}, theta = z x + 2 z^2 t."""
    kind, _ = _segment(rhp, z)
    Bp = B_matrix(rhp, complex(z), 1)
    Bm = B_matrix(rhp, complex(z), -1)
    th = z * x + (2 * z * z * t if t is not None else 0.0)
    E = np.diag([np.exp(1j * th), np.exp(-1j * th)])
    Ei = np.diag([np.exp(-1j * th), np.exp(1j * th)])
    mid = np.linalg.inv(Bm) @ (S1 @ Bp if kind == "gap" else Bp)
    return Ei @ mid @ E


@dataclass(frozen=True)
class JumpCheck:
    z: float
    x: float
    segment_kind: str
    psi_residual: float
    v_residual: float
    phi_residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return max(self.psi_residual, self.v_residual, self.phi_residual) <= self.tolerance


def phi_matrix(rhp: RhpData, x: float, z: complex, side: int | None = None) -> np.ndarray:
    """Phi = Psi B e^{i z x s3}, assembled from growth-normalized Bloch columns."""
    z = complex(z)
    s = _side_of(z, side)
    p = _need_potential(rhp)
    zz = z if z.imag != 0 else complex(z.real, s * bloch.boundary_offset(z.real))
    um, up, _ = bloch.normalized_pair(p, zz, x, 1e-12)
    b = np.diag(B_matrix(rhp, z, side))
    # C+: Psi e^{izx s3} = (um, up); C-: (up, um)
    if s > 0:
        return np.column_stack([um * b[0], up * b[1]])
    return np.column_stack([up * b[0], um * b[1]])


def _need_potential(rhp: RhpData) -> PeriodicPotential:
    if rhp.potential is None:
        raise RhpError("this check needs the potential; build the data with build_rhp(p, ...)")
    return rhp.potential


def jump_consistency_check(rhp: RhpData, x: float, z: float, tolerance: float = 1e-6) -> JumpCheck:
    p = _need_potential(rhp)
    kind, _ = _segment(rhp, z)
    Pp = bloch.boundary_psi(p, z, x, 1, 1e-12)
    Pm = bloch.boundary_psi(p, z, x, -1, 1e-12)
    target = Pm @ S1 if kind == "gap" else Pm
    psi_res = float(np.abs(Pp - target).max() / max(1.0, np.abs(Pp).max()))
    V = jump_V(rhp, x, z).value
    VB = jump_from_B(rhp, x, z)
    v_res = float(np.abs(V - VB).max() / max(1.0, np.abs(V).max()))
    Fp = phi_matrix(rhp, x, z, 1)
    Fm = phi_matrix(rhp, x, z, -1)
    phi_res = float(np.abs(Fp - Fm @ V).max() / max(1.0, np.abs(Fp).max()))
    return JumpCheck(float(z), float(x), kind, psi_res, v_res, phi_res, tolerance)


def det_phi_residual(rhp: RhpData, x: float, z: complex) -> float:
    return float(abs(np.linalg.det(phi_matrix(rhp, x, z)) - 1.0))


def normalization_residual(rhp_or_p, x: float, z: complex) -> float:
    """|| U^-1 Psi e^{i z x s3} - I ||_max, which is O(1/z)."""
    p = rhp_or_p.potential if isinstance(rhp_or_p, RhpData) else rhp_or_p
    z = complex(z)
    um, up, _ = bloch.normalized_pair(p, z, x, 1e-12)
    X = np.column_stack([um, up]) if z.imag > 0 else np.column_stack([up, um])
    return float(np.abs(mono.U_INV @ X - np.eye(2)).max())


# ---------------------------------------------------------------------------
# f^0 from a calibrated Hadamard model

def _all_dirichlet(data: SpectralData) -> list[float]:
    return sorted([g.gamma for g in data.gaps] + list(data.fixed_dirichlet))


def _tail_log(calib: Calibration, L: float, J: int, z: complex) -> complex:
    """log prod over labels outside the window of (1 - z/zh_j) e^{z/zh_j}, zh_j = pi j/L + c/j."""
    j = np.concatenate([np.arange(-J, 0), np.arange(1, J + 1)]).astype(float)
    keep = ~np.isin(j, np.asarray(calib.labels, dtype=float))
    j = j[keep]
    zh = math.pi * j / L + calib.shift_c / j
    w = z / zh
    s = np.sum(np.log1p(-w) + w)
    # remainder of -w^2/2 summed over |j| > J
    s += -z * z * L * L / (math.pi ** 2 * (J + 0.5))
    return complex(s)


def _model_log(rhp: RhpData, calib: Calibration, z: complex) -> complex:
    """log of f^+ f^- prod_{sigma=0, fixed}(z - mu) times the tail (no exponential prefactor)."""
    L = rhp.data.period
    s = _tail_log(calib, L, rhp.truncation_J, z)
    for mu in _all_dirichlet(rhp.data):
        s += np.log(complex(z - mu))
    return complex(s)


def f0_value(rhp: RhpData, z: complex) -> complex:
    """f^0(z) = e^{a z + b}/2 prod_{sigma=0, fixed}(z - mu) * tail."""
    c = rhp.calib
    if c is None:
        raise RhpError("f^0 needs a calibrated RhpData")
    z = complex(z)
    fp, fm = _fpm(rhp.data, z)
    return complex(0.5 * np.exp(c.a * z + c.b + _model_log(rhp, c, z)) / (fp * fm))


def _calibrate(p: PeriodicPotential, data: SpectralData, J: int, tol: Tolerances) -> Calibration:
    L = p.period
    mus = _all_dirichlet(data)
    if len(mus) < 4:
        raise RhpError("too few Dirichlet eigenvalues in the window to calibrate f^0")
    idx = np.arange(len(mus))
    off = int(np.round(np.median(np.asarray(mus) * L / math.pi - idx)))
    labels = tuple(int(i + off) for i in idx)
    if 0 not in labels:
        raise RhpError("the window must contain the Dirichlet eigenvalue labelled 0")
    K = l2_accumulant(p, L)
    c = K / (2.0 * math.pi)
    lo, hi = data.window
    # calibration points: midpoints of consecutive eigenvalues near +-40% of the window
    mids = [0.5 * (a + b) for a, b in zip(mus[:-1], mus[1:])]
    z1 = min(mids, key=lambda m: abs(m - (lo + 0.3 * (hi - lo))))
    z2 = min(mids, key=lambda m: abs(m - (lo + 0.7 * (hi - lo))))
    if z1 == z2:
        raise RhpError("window too small to place two calibration points")
    probe = Calibration(0j, 0j, c, off, labels, (z1, z2))
    tmp = RhpData(data, J, probe, 0.0, p, tol)
    logs = []
    for zc in (z1, z2):
        y12 = mono.transformed_solution(p, zc, L, tol.ode_tol)[0, 1].real
        d = np.log(complex(y12)) - _model_log(tmp, probe, complex(zc))
        logs.append(complex(d.real, (d.imag + math.pi) % (2 * math.pi) - math.pi))
    a = (logs[1] - logs[0]) / (z2 - z1)
    b = logs[0] - a * z1
    if abs(a.imag) > 1e-6:
        raise RhpError("Hadamard model sign mismatch between calibration points; labels misaligned")
    return Calibration(complex(a.real, 0.0), complex(b), c, off, labels, (z1, z2))


def _fit_prefactor(rhp: RhpData) -> tuple[complex, complex]:
    """Fit 2 f^0/sqrt(Delta^2 - 1) / (ratio e^{-i pi/4})^2 = exp(a' z + b') at C+ points."""
    p = rhp.potential
    lo, hi = rhp.window
    w = hi - lo
    zs = [complex(lo + 0.5 * w + d, 0.25 * w) for d in (-0.2 * w, 0.0, 0.2 * w)]
    vals = []
    for z in zs:
        res = mono.monodromy(p, z, rhp.tol.ode_tol)
        f0 = f0_value(rhp, z)
        rr = _ratio_upper(rhp.data, z) / _EIPI4
        vals.append(np.log(2.0 * f0 / (res.sqrt_disc * rr * rr)))
    vals = np.asarray(vals)
    vals = vals.real + 1j * np.unwrap(vals.imag)
    Z = np.array(zs)
    V = np.column_stack([Z, np.ones_like(Z)])
    coef = np.linalg.lstsq(V, vals, rcond=None)[0]
    return complex(coef[0]), complex(np.exp(coef[1]))


def build_rhp(p: PeriodicPotential | None, data: SpectralData, truncation_J: int = 4096,
              tol: Tolerances = DEFAULT, calibrate: bool = True) -> RhpData:
    _, R = disks(data)
    if p is None or not calibrate:
        return RhpData(data, truncation_J, None, R, p, tol)
    calib = _calibrate(p, data, truncation_J, tol)
    rhp = RhpData(data, truncation_J, calib, R, p, tol)
    slope, pref = _fit_prefactor(rhp)
    calib = Calibration(calib.a, calib.b, calib.shift_c, calib.label_offset, calib.labels, calib.points,
                        slope, pref)
    return RhpData(data, truncation_J, calib, R, p, tol)


def product_residual(rhp: RhpData, z: float) -> float:
    """|f^0 f^+ f^- / (y~12(L, z)/2) - 1| at a real z."""
    p = _need_potential(rhp)
    f0, fp, fm, _ = truncated_products(rhp, complex(z))
    y12 = mono.transformed_solution(p, z, p.period, rhp.tol.ode_tol)[0, 1].real
    return float(abs(f0 * fp * fm / (0.5 * y12) - 1.0))


# ---------------------------------------------------------------------------
# periodicity certificates

@dataclass(frozen=True)
class Certificate:
    mode: str
    candidate: float
    jump_residual: float
    asymptotic_residuals: tuple[tuple[float, float], ...]  # (|z|, residual)
    decay_order: float
    passed: bool


def _log_rho(p: PeriodicPotential, z: complex, tol: float) -> complex:
    """log rho(z) on the branch whose -i log rho is closest to z L (C+) or conj thereof."""
    rho_s, s, _ = bloch.scaled_multiplier(p, z, tol)
    L = p.period
    lr = complex(np.log(rho_s)) - s * L
    target = 1j * z * L if z.imag >= 0 else -1j * z * L
    n = round((target.imag - lr.imag) / (2 * math.pi))
    return lr + 2j * math.pi * n


def _space_log_r(p: PeriodicPotential, z: complex, a: float, tol: float) -> complex:
    # r = rho^{a} in C+, rho^{-a} in C-
    lr = _log_rho(p, z, tol)
    return a * lr if z.imag >= 0 else -a * lr


def _certificate_rays(R_values, angles):
    return [(R, R * complex(math.cos(t), math.sin(t))) for t in angles for R in R_values]


def _decay_summary(pairs: list[tuple[float, float]]) -> tuple[tuple[tuple[float, float], ...], float]:
    by_R: dict[float, float] = {}
    for R, v in pairs:
        by_R[R] = max(by_R.get(R, 0.0), v)
    Rs = sorted(by_R)
    table = tuple((R, by_R[R]) for R in Rs)
    if len(Rs) < 2 or max(by_R.values()) < 1e-10:
        # nothing to fit: the candidate is exact up to rounding
        return table, float("inf")
    order = -np.polyfit(np.log(Rs), np.log([by_R[R] for R in Rs]), 1)[0]
    return table, float(order)


def _gap_points(data: SpectralData, per_gap: int = 3) -> list[float]:
    pts = []
    for g in data.gaps:
        w = g.E_right - g.E_left
        pts += [g.E_left + w * (i + 1) / (per_gap + 1) for i in range(per_gap)]
    return pts


def periodicity_certificate(rhp: RhpData, period_candidate: float, mode: str = "space",
                            R_values=(10.0, 20.0, 40.0), jump_tol: float = 1e-6,
                            asym_tol: float = 5e-2, time_kwargs: dict | None = None) -> Certificate:
    """Test the natural candidate r built from the Floquet multiplier.

    space: r(z) = rho^{+-L1/L} in C+-; jump r_+ r_- = 1 on gaps and
    r e^{-i z L1} -> 1 along rays.
    time:  r(z) = e^{(+)}(L2, z) for the e^{izx}-type Bloch solution, from
    the time-Floquet factor along the NLS flow; r e^{-2 i z^2 L2} -> 1.
    """
    if not period_candidate > 0:
        raise ValueError("period candidate must be positive")
    p = _need_potential(rhp)
    tol = 1e-12
    angles = (math.pi / 4, math.pi / 2, 3 * math.pi / 4, -math.pi / 4, -math.pi / 2, -3 * math.pi / 4)
    if mode == "space":
        a = period_candidate / p.period

        def log_r(z):
            return _space_log_r(p, z, a, tol)

        def log_ref(z):
            return 1j * z * period_candidate

        jump = 0.0
        for z in _gap_points(rhp.data):
            d = bloch.boundary_offset(z)
            jump = max(jump, abs(np.exp(log_r(complex(z, d)) + log_r(complex(z, -d))) - 1.0))
    elif mode == "time":
        from . import evolution
        path = evolution.FlowPath.build(p, period_candidate, **dict(time_kwargs or {}))

        def log_r(z):
            return path.log_time_factor(z)

        def log_ref(z):
            return 2j * z * z * period_candidate

        # e^+ and e^- are continuous across gaps, so r_+ r_- = e^+ e^- there; the
        # product is evaluated off the axis, where Dirichlet tracks sweeping the
        # gap do not put poles on the integration path
        jump = 0.0
        for g in rhp.data.gaps:
            eta = max(0.25 * (g.E_right - g.E_left), 0.25)
            for z in _gap_points(SpectralData((g,), (), (), 0.0, p.period, rhp.data.window)):
                lp, lm = path.log_e_pm(complex(z, eta))
                jump = max(jump, abs(np.exp(lp + lm) - 1.0))
        angles = (math.pi / 2, -math.pi / 2, math.pi / 3, -math.pi / 3)
        R_values = tuple(R for R in R_values if R <= 20.0) or (5.0, 10.0)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    pairs = []
    for R, z in _certificate_rays(R_values, angles):
        pairs.append((R, float(abs(np.exp(log_r(z) - log_ref(z)) - 1.0))))
    table, order = _decay_summary(pairs)
    last = table[-1][1] if table else float("inf")
    ok = jump < jump_tol and last < asym_tol and order > 0.75
    return Certificate(mode, float(period_candidate), float(jump), table, order, bool(ok))


# ---------------------------------------------------------------------------
# export

def _c(v: complex) -> list[float]:
    return [float(np.real(v)), float(np.imag(v))]


def segments(rhp: RhpData) -> list[dict]:
    lo, hi = rhp.window
    gaps = sorted(rhp.data.gaps, key=lambda g: g.E_left)
    out = []
    left = -math.inf
    for g in gaps:
        out.append({"kind": "band", "a": left, "b": g.E_left, "n": g.k})
        out.append({"kind": "gap", "a": g.E_left, "b": g.E_right, "n": g.k})
        left = g.E_right
    out.append({"kind": "band", "a": left, "b": math.inf, "n": rhp.g_plus + 1})
    return out


def export(rhp: RhpData, nodes) -> dict:
    """Segments plus V entries at (x, t, z) nodes; t may be None."""
    table = []
    for x, t, z in nodes:
        J = jump_V(rhp, x, z, t)
        table.append({"x": x, "t": t, "z": z, "kind": J.segment_kind,
                      "V": [[_c(J.value[i, j]) for j in range(2)] for i in range(2)]})
    segs = [{**s, "a": None if math.isinf(s["a"]) else s["a"], "b": None if math.isinf(s["b"]) else s["b"]}
            for s in segments(rhp)]
    return {
        "window": list(rhp.window),
        "epsilon": rhp.epsilon,
        "disk_radius": rhp.disk_radius,
        "gaps": [{"E": [g.E_left, g.E_right], "gamma": g.gamma, "sigma": g.sigma, "k": g.k}
                 for g in rhp.data.gaps],
        "segments": segs,
        "nodes": table,
    }


def export_json(rhp: RhpData, nodes) -> str:
    return json.dumps(export(rhp, nodes), indent=1)
