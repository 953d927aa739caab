"""Defocusing NLS flow i q_t + q_xx - 2|q|^2 q = 0 and the time dependence of spectral data.

The rotated time generator is A~ = U T U^-1 with
T = -2i z^2 s3 + 2 z Q - i s3 (Q^2 - Q_x), the second half of the Lax pair.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import bloch
from . import monodromy as mono
from .config import DEFAULT, Tolerances
from .potential import PeriodicPotential, evaluate, evaluate_dx, from_fourier, from_samples
from .spectra import BandStructure, dirichlet_signs


class FlowError(RuntimeError):
    pass


class AliasingWarning(RuntimeWarning):
    pass


# ---------------------------------------------------------------------------
# split-step integrator

def _check_modes(n_modes: int) -> None:
    if n_modes < 64 or n_modes & (n_modes - 1):
        raise ValueError(f"n_modes must be a power of two >= 64, got {n_modes}")


def _alias_fraction(qhat: np.ndarray) -> float:
    n = qhat.size
    k = np.fft.fftfreq(n, 1.0 / n)
    tot = float(np.sum(np.abs(qhat) ** 2))
    if tot == 0.0:
        return 0.0
    return float(np.sum(np.abs(qhat[np.abs(k) > n / 3]) ** 2) / tot)


def nls_samples(q: np.ndarray, L: float, dt: float, n_steps: int) -> np.ndarray:
    """Strang split-step on grid samples: half nonlinear, full linear, half nonlinear."""
    n = q.size
    k = 2 * np.pi * np.fft.fftfreq(n, L / n)
    lin = np.exp(-1j * k * k * dt)
    q = q.astype(complex, copy=True)
    for _ in range(n_steps):
        q *= np.exp(-1j * np.abs(q) ** 2 * dt)
        q = np.fft.ifft(lin * np.fft.fft(q))
        q *= np.exp(-1j * np.abs(q) ** 2 * dt)
    return q


def nls_step(p: PeriodicPotential, dt: float, n_steps: int, n_modes: int = 256) -> PeriodicPotential:
    """q(., t + n_steps dt) by Strang splitting on n_modes grid points."""
    _check_modes(n_modes)
    x = np.arange(n_modes) * p.period / n_modes
    q = nls_samples(evaluate(p, x), p.period, dt, n_steps)
    frac = _alias_fraction(np.fft.fft(q))
    if frac > 1e-10:
        warnings.warn(f"top-third Fourier mass {frac:.2e} exceeds 1e-10; increase n_modes", AliasingWarning,
                      stacklevel=2)
    return trim(from_samples(q, p.period))


def trim(p: PeriodicPotential, rel: float = 1e-15) -> PeriodicPotential:
    """Drop outer Fourier modes below rel * max|c|; keeps the ODE right-hand side cheap."""
    c = p.coeffs
    N = p.n_max
    big = np.abs(c) > rel * max(np.abs(c).max(), 1e-300)
    if not big.any():
        return from_fourier([0.0], p.period)
    n = np.arange(-N, N + 1)
    keep = int(np.abs(n[big]).max())
    return from_fourier(c[N - keep: N + keep + 1], p.period)


def plane_wave(A: float, alpha: float, t: float) -> complex:
    return A * np.exp(1j * (alpha - 2 * A * A * t))


# ---------------------------------------------------------------------------
# Lax-pair coefficients

def _q0(p: PeriodicPotential) -> tuple[complex, complex]:
    return complex(evaluate(p, 0.0)), complex(evaluate_dx(p, 0.0))


def c1_coefficient(p: PeriodicPotential, z: complex) -> complex:
    q, qx = _q0(p)
    qc = np.conj(q)
    return complex(-2 * z * z - 1j * z * (qc - q) - abs(q) ** 2 - 0.5 * (qx + np.conj(qx)))


def time_generator(p: PeriodicPotential, x: float, z: complex) -> np.ndarray:
    """A~(x, z) = U T U^-1 with T = -2i z^2 s3 + 2 z Q - i s3 (Q^2 - Q_x)."""
    q = complex(evaluate(p, x))
    qx = complex(evaluate_dx(p, x))
    Q = np.array([[0, q], [np.conj(q), 0]])
    Qx = np.array([[0, qx], [np.conj(qx), 0]])
    S3 = mono.S3
    T = -2j * z * z * S3 + 2 * z * Q - 1j * S3 @ (Q @ Q - Qx)
    return mono.U @ T @ mono.U_INV


def alpha_from_weyl(p: PeriodicPotential, z: complex, w: complex) -> complex:
    """(A~ (1, w))_1 at x = 0 written out.

    z (q + q*) + (i/2)(q_x - q_x*) + (2 z^2 + i z (q* - q) + |q|^2 + (q_x + q_x*)/2) w.
    """
    q, qx = _q0(p)
    qc, qxc = np.conj(q), np.conj(qx)
    return complex(z * (q + qc) + 0.5j * (qx - qxc) - c1_coefficient(p, z) * w)


def alpha_pm(p: PeriodicPotential, z: complex, tol: float = 1e-12) -> tuple[complex, complex]:
    """(alpha^+, alpha^-) from the Weyl values; refuses near Dirichlet points."""
    wm, wp = bloch.weyl_values(p, z, tol)
    return alpha_from_weyl(p, z, wp), alpha_from_weyl(p, z, wm)


def growth_sign(z: complex) -> int:
    """+1 when alpha^+ carries the e^{+2i z^2 t} growth (C+), -1 otherwise."""
    return 1 if complex(z).imag >= 0 else -1


# ---------------------------------------------------------------------------
# flow path and e^{+-}

@dataclass(frozen=True)
class FlowPath:
    """Potentials q(., tau_i) at composite Gauss-Legendre nodes on [0, t_end]."""

    t_end: float
    taus: tuple[float, ...]
    weights: tuple[float, ...]
    potentials: tuple[PeriodicPotential, ...] = field(repr=False)

    @staticmethod
    def build(p0: PeriodicPotential, t_end: float, dt: float = 1e-4, n_modes: int = 256,
              panels: int | None = None, order: int = 8) -> "FlowPath":
        _check_modes(n_modes)
        if t_end <= 0:
            return FlowPath(0.0, (), (), ())
        if panels is None:
            panels = max(2, math.ceil(4 * t_end))
        g, w = np.polynomial.legendre.leggauss(order)
        edges = np.linspace(0.0, t_end, panels + 1)
        taus, weights = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            taus += list(0.5 * (b - a) * g + 0.5 * (a + b))
            weights += list(0.5 * (b - a) * w)
        L = p0.period
        x = np.arange(n_modes) * L / n_modes
        q = evaluate(p0, x)
        t = 0.0
        pots = []
        for tau in taus:
            span = tau - t
            n = int(math.floor(span / dt + 1e-9))
            if n:
                q = nls_samples(q, L, dt, n)
            rest = span - n * dt
            if rest > 1e-15:
                q = nls_samples(q, L, rest, 1)
            t = tau
            pots.append(trim(from_samples(q, L)))
        return FlowPath(float(t_end), tuple(taus), tuple(weights), tuple(pots))

    def log_e_pm(self, z: complex, tol: float = 1e-12) -> tuple[complex, complex]:
        sp = sm = 0j
        for w, p in zip(self.weights, self.potentials):
            ap, am = alpha_pm(p, z, tol)
            sp += w * ap
            sm += w * am
        return complex(sp), complex(sm)

    def log_time_factor(self, z: complex) -> complex:
        """log of e for the e^{izx}-type Bloch solution: e^+ in C+, e^- in C-."""
        lp, lm = self.log_e_pm(z)
        return lp if complex(z).imag >= 0 else lm


def e_pm(path: FlowPath, z: complex) -> tuple[complex, complex]:
    """(e^+(t_end, z), e^-(t_end, z)); a Dirichlet track near z raises BlochError."""
    lp, lm = path.log_e_pm(z)
    return complex(np.exp(lp)), complex(np.exp(lm))


def compatibility_residual(p0: PeriodicPotential, z: complex, x: float, t0: float = 0.02, h: float = 2.5e-4,
                           dt: float = 1e-5, n_modes: int = 128) -> float:
    """|d/dt psi_check - A~ psi_check| / |psi_check| for psi_check^+ = psi^+ e^+ at (x, t0, z).

    The time derivative is a central difference with e^+ carried by
    Gauss quadrature of alpha^+ between t0 - h and t0 + h.
    """
    L = p0.period
    xs = np.arange(n_modes) * L / n_modes
    q = nls_samples(evaluate(p0, xs), L, dt, int(round((t0 - h) / dt)))
    pots = [trim(from_samples(q, L))]
    for _ in range(2):
        q = nls_samples(q, L, dt, int(round(h / dt)))
        pots.append(trim(from_samples(q, L)))
    pa, pm_, pb = pots
    # log e^+ over [t0 - h, t0] and [t0, t0 + h] by 6-point Gauss
    g, w = np.polynomial.legendre.leggauss(6)

    def integral(p_start, span):
        s = 0j
        qq = evaluate(p_start, xs)
        t_prev = 0.0
        for gi, wi in sorted(zip(0.5 * span * (g + 1), 0.5 * span * w)):
            n = int(math.floor((gi - t_prev) / dt))
            if n:
                qq = nls_samples(qq, L, dt, n)
            rest = gi - t_prev - n * dt
            if rest > 1e-15:
                qq = nls_samples(qq, L, rest, 1)
            t_prev = gi
            s += wi * alpha_pm(trim(from_samples(qq, L)), z)[0]
        return s

    la = integral(pa, h)          # from t0 - h to t0
    lb = integral(pm_, h)         # from t0 to t0 + h
    ya = bloch.bloch_solutions(pa, z, x).psi_plus * np.exp(-la)
    y0 = bloch.bloch_solutions(pm_, z, x).psi_plus
    yb = bloch.bloch_solutions(pb, z, x).psi_plus * np.exp(lb)
    dy = (yb - ya) / (2 * h)
    rhs = time_generator(pm_, x, z) @ y0
    return float(np.abs(dy - rhs).max() / max(1.0, np.abs(y0).max(), np.abs(rhs).max()))


# ---------------------------------------------------------------------------
# Dirichlet flow

@dataclass(frozen=True)
class Track:
    gamma: float
    sigma: int
    E_left: float
    E_right: float


@dataclass(frozen=True)
class FlowState:
    t: float
    potential: PeriodicPotential
    dirichlet_tracks: tuple[Track, ...]
    probes: tuple[tuple[complex, complex], ...] = ()
    samples: np.ndarray | None = field(default=None, repr=False, compare=False)


def initial_state(p: PeriodicPotential, band: BandStructure, probes=(), tol: Tolerances = DEFAULT) -> FlowState:
    from .spectra import movable_at
    opened = [g for g in band.gaps if not g.degenerate]
    mus = movable_at(p, band, 0.0, tol)
    sig = dirichlet_signs(p, mus, tol, check=False)
    tracks = tuple(Track(m, s, g.left, g.right) for m, s, g in zip(mus, sig, opened))
    pr = tuple((complex(z), complex(mono.discriminant(p, z, tol.ode_tol))) for z in probes)
    return FlowState(0.0, p, tracks, pr)


def dirichlet_rhs(p: PeriodicPotential, mu: float, tol: float = 1e-12) -> float:
    """c_1(mu) (y~22 - y~11)(L, mu) / y~12'(L, mu), regular through gap edges."""
    Y, dY = mono.transformed_with_derivative(p, mu, p.period, tol)
    c1 = c1_coefficient(p, mu).real
    return float(c1 * (Y[1, 1] - Y[0, 0]).real / dY[0, 1].real)


def dirichlet_rhs_sigma(p: PeriodicPotential, mu: float, sigma: int, tol: float = 1e-12) -> float:
    """The sigma form c_1 sigma (rho - 1/rho)/y~12'; equals dirichlet_rhs with rho the |rho|<1 multiplier."""
    Y, dY = mono.transformed_with_derivative(p, mu, p.period, tol)
    delta = 0.5 * (Y[0, 0] + Y[1, 1]).real
    rho = mono.floquet_multiplier(delta).real
    return float(c1_coefficient(p, mu).real * sigma * (rho - 1.0 / rho) / dY[0, 1].real)


def dirichlet_flow(state: FlowState, t_end: float, dt: float = 1e-4, n_modes: int = 256,
                   tol: Tolerances = DEFAULT, log_every: int = 0, log=None, ode_tol: float = 1e-12) -> FlowState:
    """Advance q by split-step and every movable gamma by RK4 on the Dirichlet ODE."""
    _check_modes(n_modes)
    n = int(round((t_end - state.t) / dt))
    if n < 0:
        raise ValueError("t_end precedes the state time")
    L = state.potential.period
    if state.samples is not None and state.samples.size == n_modes:
        q = state.samples
    else:
        q = evaluate(state.potential, np.arange(n_modes) * L / n_modes)
    p = trim(from_samples(q, L))
    mus = np.array([tr.gamma for tr in state.dirichlet_tracks])
    sig = [tr.sigma for tr in state.dirichlet_tracks]
    t = state.t
    for step in range(1, n + 1):
        qh = nls_samples(q, L, 0.5 * dt, 1)
        q1 = nls_samples(qh, L, 0.5 * dt, 1)
        ph, p1 = trim(from_samples(qh, L)), trim(from_samples(q1, L))
        new = []
        for mu in mus:
            k1 = dirichlet_rhs(p, mu, ode_tol)
            k2 = dirichlet_rhs(ph, mu + 0.5 * dt * k1, ode_tol)
            k3 = dirichlet_rhs(ph, mu + 0.5 * dt * k2, ode_tol)
            k4 = dirichlet_rhs(p1, mu + dt * k3, ode_tol)
            new.append(mu + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4))
        q, p, t = q1, p1, state.t + step * dt
        mus = np.array(new)
        for tr, m in zip(state.dirichlet_tracks, mus):
            pad = tol.eps_gap * (1 + max(abs(tr.E_left), abs(tr.E_right)))
            if not (tr.E_left - pad <= m <= tr.E_right + pad):
                raise FlowError(f"track left its gap [{tr.E_left}, {tr.E_right}] at t = {t}: gamma = {m}")
        sig = dirichlet_signs(p, mus, tol, check=False)
        if log is not None and log_every and step % log_every == 0:
            log(t, p, mus, sig)
    tracks = tuple(Track(float(m), int(s), tr.E_left, tr.E_right)
                   for m, s, tr in zip(mus, sig, state.dirichlet_tracks))
    return FlowState(t, p, tracks, state.probes, q)


# ---------------------------------------------------------------------------
# isospectrality

def default_probes(window: tuple[float, float], n: int = 20) -> list[complex]:
    lo, hi = window
    return [complex(lo + (hi - lo) * (i + 0.5) / n, 0.5) for i in range(n)]


@dataclass(frozen=True)
class IsospectralityReport:
    t_end: float
    max_drift: float
    edge_drift: tuple[float, ...]
    drifts: tuple[float, ...]


def isospectrality_report(q0: PeriodicPotential, t_end: float, probes, dt: float = 1e-4, n_modes: int = 256,
                          band: BandStructure | None = None, tol: Tolerances = DEFAULT) -> IsospectralityReport:
    from .spectra import main_spectrum
    L = q0.period
    q = evaluate(q0, np.arange(n_modes) * L / n_modes)
    n = int(round(t_end / dt))
    q = nls_samples(q, L, dt, n)
    pt = trim(from_samples(q, L))
    drifts = tuple(float(abs(mono.discriminant(pt, z, tol.ode_tol) - mono.discriminant(q0, z, tol.ode_tol)))
                   for z in probes)
    edges: tuple[float, ...] = ()
    if band is not None:
        b1 = main_spectrum(pt, band.window, tol)
        e0 = [v for a, b, _ in band.open_gaps for v in (a, b)]
        e1 = [v for a, b, _ in b1.open_gaps for v in (a, b)]
        if len(e0) != len(e1):
            raise FlowError(f"open-gap count changed under the flow: {len(e0)} -> {len(e1)}")
        edges = tuple(float(abs(a - b)) for a, b in zip(e0, e1))
    return IsospectralityReport(float(t_end), max(drifts, default=0.0), edges, drifts)


def flow_csv_rows(times, gammas, sigmas, drifts) -> list[list]:
    rows = []
    for t, g, s, d in zip(times, gammas, sigmas, drifts):
        row = [t]
        for gi, si in zip(g, s):
            row += [gi, si]
        row.append(d)
        rows.append(row)
    return rows
