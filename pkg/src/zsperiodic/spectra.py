"""Main spectrum, Dirichlet spectra, signs and the spectral data set.

Root localization works on a uniform grid of spacing pi/(16 L) containing
every pi j / L.  Each gap, open or closed, carries exactly one critical point
of Delta, so gaps are found as zeros of Delta' (complex-step derivative) and
their edges as zeros of

    disc(z) = ((m11 - m22)/2)^2 + m12 m21 = Delta^2 - 1

built from the rotated monodromy.  The entries are O(width) near a narrow
gap, so disc resolves gaps far below what Delta -/+ 1 can.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq

from . import monodromy as mono
from .config import DEFAULT, Tolerances
from .potential import PeriodicPotential, scale, shift_base


class SpectralError(RuntimeError):
    pass


@dataclass(frozen=True)
class Gap:
    """A gap (zeta_{2j-1}, zeta_{2j}); degenerate when the two coincide."""

    left: float
    right: float
    j: int
    sign: int  # sign of Delta inside the gap
    degenerate: bool
    critical: float


@dataclass(frozen=True)
class BandStructure:
    gaps: tuple[Gap, ...]
    window: tuple[float, float]
    period: float
    gap_threshold: float
    zero_in_gap: bool

    @property
    def zetas(self) -> list[tuple[int, float, str]]:
        out = []
        for g in self.gaps:
            tag = "double" if g.degenerate else "simple"
            out.append((2 * g.j - 1, g.left, tag))
            out.append((2 * g.j, g.right, tag))
        return out

    @property
    def open_gaps(self) -> list[tuple[float, float, int]]:
        """(E_{2k-1}, E_{2k}, k) with k consecutive over open gaps.

        k = 0 is the first open gap whose right edge is >= 0.
        """
        opened = [g for g in self.gaps if not g.degenerate]
        first = next((i for i, g in enumerate(opened) if g.right >= 0), len(opened))
        return [(g.left, g.right, i - first) for i, g in enumerate(opened)]

    @property
    def genus_indices(self) -> tuple[int, int] | None:
        ks = [k for _, _, k in self.open_gaps]
        return (min(ks), max(ks)) if ks else None

    def in_window(self, z: float) -> bool:
        return self.window[0] <= z <= self.window[1]

    def to_json(self) -> dict:
        return {
            "window": list(self.window),
            "L": self.period,
            "zetas": [{"j": j, "zeta": v, "kind": kind} for j, v, kind in self.zetas],
            "open_gaps": [{"E": [a, b], "k": k} for a, b, k in self.open_gaps],
            "gap_threshold": self.gap_threshold,
            "zero_in_gap": self.zero_in_gap,
        }


@dataclass(frozen=True)
class GapData:
    E_left: float
    E_right: float
    gamma: float
    sigma: int
    k: int


@dataclass(frozen=True)
class SpectralData:
    gaps: tuple[GapData, ...]
    fixed_dirichlet: tuple[float, ...]
    aux_dirichlet: tuple[float, ...]
    base_point: float
    period: float
    window: tuple[float, float]
    band: BandStructure | None = field(default=None, compare=False)

    def to_json(self) -> dict:
        return {
            "window": list(self.window),
            "gaps": [{"E": [g.E_left, g.E_right], "gamma": g.gamma, "sigma": g.sigma} for g in self.gaps],
            "fixed": list(self.fixed_dirichlet),
            "aux": list(self.aux_dirichlet),
            "base_point": self.base_point,
            "L": self.period,
        }

    @staticmethod
    def from_json(d: dict) -> "SpectralData":
        raw = sorted(d["gaps"], key=lambda g: g["E"][0])
        first = next((i for i, g in enumerate(raw) if g["E"][1] >= 0), len(raw))
        gaps = tuple(
            GapData(float(g["E"][0]), float(g["E"][1]), float(g["gamma"]), int(g["sigma"]), i - first)
            for i, g in enumerate(raw)
        )
        return SpectralData(gaps, tuple(map(float, d["fixed"])), tuple(map(float, d["aux"])),
                            float(d["base_point"]), float(d["L"]), tuple(d["window"]))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def _grid(window: tuple[float, float], L: float, pad: float) -> np.ndarray:
    h = math.pi / (16.0 * L)
    lo = math.floor((window[0] - pad) / h)
    hi = math.ceil((window[1] + pad) / h)
    return np.arange(lo, hi + 1) * h


def _disc_from(Mt: np.ndarray) -> float:
    a = 0.5 * (Mt[0, 0] - Mt[1, 1])
    return float((a * a + Mt[0, 1] * Mt[1, 0]).real)


def _traceless_size(Mt: np.ndarray) -> float:
    d = 0.5 * (Mt[0, 0] + Mt[1, 1])
    F = Mt - d * np.eye(2)
    return float(np.max(np.abs(F)))


def _roots_on_grid(f, zs: np.ndarray, vals: np.ndarray, xtol: float) -> list[float]:
    out = []
    for i in range(len(zs) - 1):
        a, b = vals[i], vals[i + 1]
        if a == 0.0:
            out.append(float(zs[i]))
        elif a * b < 0:
            out.append(brentq(f, zs[i], zs[i + 1], xtol=xtol, rtol=1e-15, maxiter=200))
    if vals[-1] == 0.0:
        out.append(float(zs[-1]))
    out.sort()
    dedup = []
    for r in out:
        if not dedup or abs(r - dedup[-1]) > 1e-9 * (1 + abs(r)):
            dedup.append(r)
    return dedup


def main_spectrum(p: PeriodicPotential, window: tuple[float, float], tol: Tolerances = DEFAULT) -> BandStructure:
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi) and hi > lo):
        raise SpectralError(f"invalid window {window!r}")
    L = p.period
    ode = tol.ode_tol
    zs = _grid((lo, hi), L, math.pi / L)

    def dd(z):
        return mono.discriminant_real(p, z, ode)[1]

    def delta(z):
        return mono.discriminant_real(p, z, ode)[0]

    def disc(z):
        return _disc_from(mono.transformed_solution(p, z, L, ode).real)

    vals = np.array([mono.discriminant_real(p, z, ode) for z in zs])
    crit = _roots_on_grid(dd, zs, vals[:, 1], 1e-15)
    # consecutive extrema of equal sign lie in the same gap
    merged: list[tuple[float, float]] = []
    for c in crit:
        D = delta(c)
        if abs(D) < 1.0 - 1e-6:
            raise SpectralError(f"critical point of Delta inside a band at z = {c:.17g} (Delta = {D:.6g})")
        if merged and np.sign(merged[-1][1]) == np.sign(D):
            if abs(D) > abs(merged[-1][1]):
                merged[-1] = (c, D)
            continue
        merged.append((c, D))
    # one zero of Delta per band between consecutive gaps
    mids: list[float | None] = []
    for (c1, D1), (c2, D2) in zip(merged[:-1], merged[1:]):
        mids.append(brentq(delta, c1, c2, xtol=1e-14))
    noise = 1e3 * ode
    raw = []
    for i, (c, D) in enumerate(merged):
        s = int(np.sign(D))
        Mt = mono.transformed_solution(p, c, L, ode).real
        kappa = _traceless_size(Mt)
        left_b = mids[i - 1] if i > 0 else None
        right_b = mids[i] if i < len(mids) else None
        degenerate = kappa < noise or _disc_from(Mt) <= 0.0
        e1 = e2 = c
        if not degenerate:
            if left_b is None or right_b is None:
                continue  # gap cut by the search boundary
            e1 = brentq(disc, left_b, c, xtol=1e-15, rtol=1e-15)
            e2 = brentq(disc, c, right_b, xtol=1e-15, rtol=1e-15)
            if e2 - e1 < tol.eps_gap * (1 + abs(c)):
                degenerate = True
                e1 = e2 = c
        raw.append((e1, e2, s, degenerate, c))
    zero_in_gap = abs(delta(0.0)) >= 1.0 if lo - math.pi / L <= 0.0 <= hi + math.pi / L else False
    # gap index 0: first gap whose right edge is >= 0
    first = next((i for i, g in enumerate(raw) if g[1] >= 0.0), len(raw))
    gaps = tuple(
        Gap(e1, e2, i - first, s, deg, c)
        for i, (e1, e2, s, deg, c) in enumerate(raw)
        if lo <= c <= hi
    )
    return BandStructure(gaps, (lo, hi), L, tol.eps_gap, bool(zero_in_gap))


def dirichlet_function(p: PeriodicPotential, variant: str = "standard"):
    if variant == "standard":
        q = p
    elif variant == "auxiliary":
        q = scale(p, -1j)  # Y_check(q) = Y~(-i q)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return q


def dirichlet_spectrum(p: PeriodicPotential, window: tuple[float, float], variant: str = "standard",
                       tol: Tolerances = DEFAULT) -> list[float]:
    """Real zeros of y~12(L, .) (standard) or y_check12(L, .) (auxiliary) in the window."""
    q = dirichlet_function(p, variant)
    L = p.period
    lo, hi = window
    zs = _grid((lo, hi), L, math.pi / (4 * L))

    def y12(z):
        return float(mono.transformed_solution(q, z, L, tol.ode_tol)[0, 1].real)

    vals = np.array([y12(z) for z in zs])
    roots = _roots_on_grid(y12, zs, vals, 1e-15)
    return [r for r in roots if lo <= r <= hi]


def dirichlet_signs(p: PeriodicPotential, mus, tol: Tolerances = DEFAULT, check: bool = True) -> list[int]:
    out = []
    for mu in mus:
        Mt = mono.transformed_solution(p, mu, p.period, tol.ode_tol).real
        y11, y22 = Mt[0, 0], Mt[1, 1]
        if check and abs(y11 * y22 - 1.0) > 1e-8 * max(1.0, abs(y11 * y22)):
            raise SpectralError(f"reciprocity y22 = 1/y11 fails at mu = {mu:.17g}")
        lg = math.log(abs(y22))
        out.append(0 if abs(lg) < tol.eps_sign else -int(np.sign(lg)))
    return out


def spectral_data(p: PeriodicPotential, window: tuple[float, float], x0: float = 0.0,
                  tol: Tolerances = DEFAULT, band: BandStructure | None = None) -> SpectralData:
    if band is None:
        band = main_spectrum(p, window, tol)
    ps = shift_base(p, x0) if x0 != 0.0 else p
    lo, hi = band.window
    mus = dirichlet_spectrum(ps, (lo - math.pi / (2 * p.period), hi + math.pi / (2 * p.period)), "standard", tol)
    aux = dirichlet_spectrum(ps, band.window, "auxiliary", tol)
    gap_list = []
    fixed = []
    opened = {(a, b): k for a, b, k in band.open_gaps}
    for g in band.gaps:
        pad = tol.eps_edge * (1 + max(abs(g.left), abs(g.right)))
        inside = [m for m in mus if g.left - pad <= m <= g.right + pad]
        if len(inside) == 0 and not g.degenerate:
            inside = _search_gap(ps, g, tol)
        if len(inside) != 1:
            raise SpectralError(
                f"gap [{g.left:.12g}, {g.right:.12g}] holds {len(inside)} Dirichlet eigenvalues; "
                "each gap must hold exactly one")
        mu = inside[0]
        if g.degenerate:
            fixed.append(mu)
            continue
        sigma = dirichlet_signs(ps, [mu], tol)[0]
        gap_list.append(GapData(g.left, g.right, mu, sigma, opened[(g.left, g.right)]))
    return SpectralData(tuple(gap_list), tuple(fixed), tuple(aux), float(x0), p.period, band.window, band)


def _search_gap(p, g: Gap, tol: Tolerances) -> list[float]:
    L = p.period

    def y12(z):
        return float(mono.transformed_solution(p, z, L, tol.ode_tol)[0, 1].real)

    a, b = y12(g.left), y12(g.right)
    if a == 0.0:
        return [g.left]
    if b == 0.0:
        return [g.right]
    if a * b < 0:
        return [brentq(y12, g.left, g.right, xtol=1e-15)]
    # eigenvalue pinned at an edge within root tolerance
    return [g.left] if abs(a) < abs(b) else [g.right]


def movable_at(p: PeriodicPotential, band: BandStructure, x0: float, tol: Tolerances = DEFAULT,
               variant: str = "standard") -> list[float]:
    """One Dirichlet eigenvalue per open gap for the base point x0."""
    q = dirichlet_function(shift_base(p, x0), variant)
    L = p.period

    def y12(z):
        return float(mono.transformed_solution(q, z, L, tol.ode_tol)[0, 1].real)

    out = []
    for g in band.gaps:
        if g.degenerate:
            continue
        a, b = y12(g.left), y12(g.right)
        if a == 0.0:
            out.append(g.left)
        elif b == 0.0:
            out.append(g.right)
        elif a * b < 0:
            out.append(brentq(y12, g.left, g.right, xtol=1e-15))
        else:
            out.append(g.left if abs(a) < abs(b) else g.right)
    return out


# ---------------------------------------------------------------------------
# dense discretization oracle


def _fourier_operator(p: PeriodicPotential, N: int, shift: float) -> np.ndarray:
    L = p.period
    x = np.arange(N) * L / N
    q = p(x)
    k = 2 * np.pi * np.fft.fftfreq(N, d=L / N) + shift
    F = np.fft.fft(np.eye(N), axis=0)
    D = np.fft.ifft((1j * k)[:, None] * F, axis=0)
    H = np.zeros((2 * N, 2 * N), dtype=complex)
    H[:N, :N] = 1j * D
    H[N:, N:] = -1j * D
    H[:N, N:] = np.diag(-1j * q)
    H[N:, :N] = np.diag(1j * np.conj(q))
    return 0.5 * (H + H.conj().T)


def _staggered_dirichlet(p: PeriodicPotential, N: int) -> np.ndarray:
    """Eigenvalues for v1 + v2 = 0 at both ends, second order in h = L/N.

    In the rotated frame w = U v the problem reads T w = z w with the real
    symmetric operator

        T = [[Im q, -d/dx - Re q], [d/dx - Re q, -Im q]],   w1(0) = w1(L) = 0.

    w1 lives on interior integer nodes, w2 on half nodes, so the boundary
    condition is built into the unknowns and the matrix stays symmetric.
    """
    L = p.period
    h = L / N
    xi = np.arange(1, N) * h
    xh = (np.arange(N) + 0.5) * h
    qi_, qh = p(xi), p(xh)
    n1, n2 = N - 1, N
    # half node j sits between interior nodes j - 1 (x = j h) and j (x = (j + 1) h)
    D = np.zeros((n2, n1))  # w1' at half nodes
    r = np.arange(n1)
    D[r + 1, r] -= 1.0 / h
    D[r, r] += 1.0 / h
    Av = np.zeros((n2, n1))  # (w1_i + w1_{i+1})/2 at half node i
    Av[r + 1, r] += 0.5
    Av[r, r] += 0.5
    P = D - qh.real[:, None] * Av
    T = np.zeros((n1 + n2, n1 + n2))
    T[:n1, :n1] = np.diag(qi_.imag)
    T[n1:, n1:] = np.diag(-qh.imag)
    T[n1:, :n1] = P
    T[:n1, n1:] = P.T
    return eigh(T, eigvals_only=True)


def oracle_dense_spectra(p: PeriodicPotential, N: int, bc: str, window: tuple[float, float] | None = None,
                         imag_tol: float = 1e-6) -> np.ndarray:
    """Eigenvalues of i s3 (d/dx - Q) under the requested boundary condition."""
    if N < 64:
        raise ValueError("N must be >= 64")
    if bc == "periodic":
        w = eigh(_fourier_operator(p, N, 0.0), eigvals_only=True)
    elif bc == "antiperiodic":
        w = eigh(_fourier_operator(p, N, math.pi / p.period), eigvals_only=True)
    elif bc == "dirichlet_standard":
        w = _staggered_dirichlet(p, N)
    elif bc == "dirichlet_auxiliary":
        w = _staggered_dirichlet(scale(p, -1j), N)
    else:
        raise ValueError(f"unknown boundary condition {bc!r}")
    w = np.asarray(w)
    if np.iscomplexobj(w):
        w = w[np.abs(w.imag) <= imag_tol * (1 + np.abs(w.real))].real
    w = np.sort(w)
    if window is not None:
        w = w[(w >= window[0]) & (w <= window[1])]
    return w


def richardson_dense(p: PeriodicPotential, N: int, bc: str, window: tuple[float, float]):
    """Second-order extrapolation from N and N/2 for the staggered scheme.

    Returns (extrapolated, fine, error_estimate); eigenvalues matched by order.
    """
    pad = (window[0] - 1.0, window[1] + 1.0)
    fine = oracle_dense_spectra(p, N, bc, pad)
    coarse = oracle_dense_spectra(p, N // 2, bc, pad)
    matched = np.array([coarse[np.argmin(np.abs(coarse - f))] for f in fine])
    extra = (4 * fine - matched) / 3
    keep = (fine >= window[0]) & (fine <= window[1])
    return extra[keep], fine[keep], np.abs(fine - matched)[keep] / 3
