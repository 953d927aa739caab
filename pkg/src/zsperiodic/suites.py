"""Invariant suites run by ``zs verify``.

Each check returns a CheckResult; a check that raises is recorded as a
failure with the exception text instead of aborting the run.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np

from . import bloch, evolution, inverse, rhpdata, spectra
from . import genus0_oracle as g0
from . import monodromy as mono
from . import potential as pot
from .config import DEFAULT, Tolerances


@dataclass(frozen=True)
class CheckResult:
    suite: str
    name: str
    value: float
    limit: float
    passed: bool
    detail: str = ""
    seconds: float = 0.0


def standard_set() -> list[tuple[str, pot.PeriodicPotential, tuple[float, float]]]:
    return [
        ("zero", pot.zero(1.0), (-12.0, 12.0)),
        ("plane-wave", pot.constant(1.0, 0.75 * math.pi, 1.0), (-12.0, 12.0)),
        ("two-gap", two_gap(), (-11.0, 11.0)),
    ]


def two_gap() -> pot.PeriodicPotential:
    """q = 0.5 + 0.25 e^{2 pi i x} on [0, 1): two visibly open gaps, the rest tiny."""
    return pot.from_fourier([0, 0, 0.5, 0.25, 0], 1.0)


def as_genus0(p: pot.PeriodicPotential) -> g0.Genus0Params | None:
    c = p.coeffs
    mid = p.n_max
    others = np.delete(c, mid)
    A = abs(c[mid])
    if A == 0 or (others.size and np.abs(others).max() > 1e-15 * A):
        return None
    return g0.Genus0Params(float(A), float(np.angle(c[mid])), p.period)


def _le(suite, name, value, limit, detail=""):
    value = float(value)
    return CheckResult(suite, name, value, limit, bool(value <= limit), detail)


def _order(vals, Rs) -> float:
    return float(-np.polyfit(np.log(Rs), np.log(vals), 1)[0])


# ---------------------------------------------------------------------------

def potential_checks(p, window, tol):
    s = "potential"
    spec = pot.to_spec(p)
    q2 = pot.make_potential(spec)
    x = np.linspace(0, p.period, 17)
    out = [_le(s, "json round trip", np.abs(pot.evaluate(q2, x) - pot.evaluate(p, x)).max(), 0.0)]
    errs = []
    hs = (1e-2, 5e-3)
    for h in hs:
        fd = (pot.evaluate(p, x + h) - pot.evaluate(p, x - h)) / (2 * h)
        errs.append(np.abs(fd - pot.evaluate_dx(p, x)).max())
    if errs[0] < 1e-12:
        out.append(_le(s, "derivative vs differences", errs[0], 1e-12))
    else:
        o = _order(errs, [1 / h for h in hs])
        out.append(CheckResult(s, "derivative difference order", o, 2.0, abs(o - 2.0) < 0.25))
    return out


def monodromy_checks(p, window, tol):
    s = "monodromy"
    lo, hi = window
    zs = [complex(lo + (hi - lo) * (i + 0.5) / 12, y) for i in range(12) for y in (0.0, 0.7)]
    det = max(mono.monodromy(p, z, tol.ode_tol).det_defect for z in zs)
    out = [_le(s, "det M = 1", det, 1e-8)]
    imag = max(abs(mono.monodromy(p, z.real, tol.ode_tol).delta.imag) for z in zs[::2])
    out.append(_le(s, "Delta real on the axis", imag, 0.0))
    Rs = (20.0, 40.0)
    res = [mono.discriminant_asymptotic_residual(p, 1j * R, tol.ode_tol) for R in Rs]
    if max(res) < 1e-9:
        out.append(_le(s, "Delta asymptotics (exact)", max(res), 1e-9))
    else:
        o = _order(res, Rs)
        out.append(CheckResult(s, "Delta asymptotics order", o, 2.0, abs(o - 2.0) <= 0.5))
    return out


def spectra_checks(p, window, tol):
    s = "spectra"
    band = spectra.main_spectrum(p, window, tol)
    zeta = [v for _, v, _ in band.zetas]
    out = [_le(s, "main spectrum ordered", 0.0 if all(a <= b for a, b in zip(zeta, zeta[1:])) else 1.0, 0.0)]
    d2 = max((abs(mono.discriminant_real(p, v, tol.ode_tol)[0] ** 2 - 1) for v in zeta), default=0.0)
    out.append(_le(s, "Delta^2 = 1 at main spectrum", d2, 1e-8))
    data = spectra.spectral_data(p, window, 0.0, tol, band)
    bad = sum(1 for g in data.gaps if not (g.E_left - 1e-9 <= g.gamma <= g.E_right + 1e-9))
    out.append(_le(s, "one Dirichlet eigenvalue per open gap", bad, 0, f"{len(data.gaps)} open gaps"))
    return out


def bloch_checks(p, window, tol):
    s = "bloch"
    out = []
    qp = max(bloch.quasi_periodicity_residual(p, z, 0.3, 1e-12) for z in (1.3 + 0.8j, -2.1 - 0.6j, 5j))
    out.append(_le(s, "quasi-periodicity", qp, 1e-8))
    Rs = (20.0, 40.0, 80.0)
    w = [abs(bloch.weyl_values(p, 1j * R)[0] - bloch.weyl_expansion(p, 1j * R, "minus", 1)) for R in Rs]
    if max(w) < 1e-9:
        out.append(_le(s, "Weyl expansion (exact)", max(w), 1e-9))
    else:
        o = _order(w, Rs)
        out.append(CheckResult(s, "Weyl expansion order", o, 2.0, abs(o - 2.0) <= 0.5))
    x = 0.37 * p.period
    r = bloch.reconstruct_from_bloch(p, x)
    out.append(_le(s, "recovery of q(x)", abs(r.q_hat - pot.evaluate(p, x)), 1e-3))
    return out


def rhp_checks(p, window, tol):
    s = "rhpdata"
    data = spectra.spectral_data(p, window, 0.0, tol)
    rhp = rhpdata.build_rhp(p, data, tol=tol)
    out = []
    # in gaps narrower than 0.05 every sample sits next to a pole of Psi at gamma
    gaps = sorted((g for g in data.gaps if g.E_right - g.E_left > 0.05), key=lambda g: g.E_left)
    pts = [g.E_left + (g.E_right - g.E_left) * f for g in gaps for f in (1 / 3, 2 / 3)]
    pts += [0.5 * (a.E_right + b.E_left) for a, b in zip(gaps, gaps[1:])]
    if gaps:
        pts += [gaps[0].E_left - 0.3, gaps[-1].E_right + 0.3]
    else:
        pts += [0.3, -1.7]
    worst = max((max(c.psi_residual, c.v_residual, c.phi_residual)
                 for c in (rhpdata.jump_consistency_check(rhp, 0.21, z) for z in pts)), default=0.0)
    out.append(_le(s, "jump consistency", worst, 1e-6, f"{len(pts)} points"))
    lo, hi = window
    zs = [complex(lo + 0.1 * (hi - lo) + 0.8 * (hi - lo) * (i + 0.5) / 10, sgn * 1.5)
          for i in range(10) for sgn in (1, -1)]
    zs = [z for z in zs if rhpdata.in_domain(rhp, z)]
    det = max((rhpdata.det_phi_residual(rhp, 0.4, z) for z in zs), default=0.0)
    out.append(_le(s, "det Phi = 1", det, 1e-8, f"{len(zs)} points"))
    cert = rhpdata.periodicity_certificate(rhp, p.period)
    out.append(CheckResult(s, "space certificate at L", cert.jump_residual, 1e-6, cert.passed,
                           f"decay order {cert.decay_order:.3g}"))
    return out


def evolution_checks(p, window, tol):
    s = "evolution"
    probes = evolution.default_probes(window, 20)
    rep = evolution.isospectrality_report(p, 0.01, probes, dt=1e-4, n_modes=256, tol=tol)
    return [_le(s, "isospectrality drift (t = 0.01)", rep.max_drift, 1e-6)]


def inverse_checks(p, window, tol):
    s = "inverse"
    conv = inverse.calibrate_trace_convention()
    out = [_le(s, "trace calibration residual", conv.residual, 1e-8)]
    rep = inverse.roundtrip_report(p, window, 8, conv, tol=tol)
    out.append(_le(s, "trace roundtrip", rep.trace_error, 1e-3))
    return out


def oracle_checks(p, window, tol):
    s = "genus0"
    prm = as_genus0(p)
    if prm is None:
        return []
    A, L = prm.A, prm.L
    zs = np.linspace(-5, 5, 200)
    zs = zs[np.abs(np.abs(zs) - A) > 1e-3]
    d = max(abs(mono.discriminant_real(p, z, tol.ode_tol)[0] - g0.delta(prm, z).real) for z in zs)
    out = [_le(s, "Delta vs cos(lambda L)", d, 1e-8)]
    band = spectra.main_spectrum(p, window, tol)
    (E1, E2, _), = band.open_gaps
    out.append(_le(s, "edges at -+A", max(abs(E1 + A), abs(E2 - A)), 1e-8))
    data = spectra.spectral_data(p, window, 0.0, tol, band)
    ex = g0.exact_spectrum(prm)
    out.append(_le(s, "mu0 = -A sin(alpha)", abs(data.gaps[0].gamma - ex.mu), 1e-8))
    out.append(_le(s, "sigma0 rule", abs(data.gaps[0].sigma - ex.sigma), 0))
    Mt = mono.transformed_solution(p, ex.mu, L, tol.ode_tol)
    out.append(_le(s, "y22(L, mu0)", abs(Mt[1, 1].real - ex.y22_at_mu), 1e-7))
    rhp = rhpdata.build_rhp(p, data, calibrate=False, tol=tol)
    bz = [0.3 + 1.1j, -0.7 + 2j, 0.2 - 0.9j, 1.5 - 1.5j]
    bres = max(np.abs(rhpdata.B_matrix(rhp, z) - g0.b_matrix(prm, z)).max() for z in bz)
    out.append(_le(s, "B vs closed form", bres, 1e-8))
    vz = [-3.0, -0.5 * A, 0.4 * A, 2.5]
    vres = max(np.abs(rhpdata.jump_V(rhp, 0.3, z).value - g0.jump_matrix(prm, 0.3, z)).max() for z in vz)
    out.append(_le(s, "V vs closed form", vres, 1e-8))
    return out


SUITES = {
    "potential": potential_checks,
    "monodromy": monodromy_checks,
    "spectra": spectra_checks,
    "bloch": bloch_checks,
    "rhpdata": rhp_checks,
    "evolution": evolution_checks,
    "inverse": inverse_checks,
    "genus0": oracle_checks,
}


def run(p, window, tol: Tolerances = DEFAULT, suites=None, label: str = "") -> list[CheckResult]:
    out = []
    for name in suites or SUITES:
        t = time.perf_counter()
        try:
            res = SUITES[name](p, window, tol)
        except Exception as exc:  # a crashing suite is a failed suite
            res = [CheckResult(name, "completed", float("nan"), 0.0, False, f"{type(exc).__name__}: {exc}")]
        dt = time.perf_counter() - t
        out += [CheckResult(r.suite, f"{label}: {r.name}" if label else r.name, r.value, r.limit, r.passed,
                            r.detail, dt) for r in res]
    return out
