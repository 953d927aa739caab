import math
import warnings

import numpy as np
import pytest

from zsperiodic import evolution as ev
from zsperiodic import monodromy as mono
from zsperiodic import potential as pot
from zsperiodic import spectra


def test_plane_wave_is_exact():
    p = pot.constant(0.8, 0.3, 1.0)
    out = ev.nls_step(p, 1e-3, 50, 64)
    x = np.linspace(0, 1, 7)
    assert np.abs(pot.evaluate(out, x) - ev.plane_wave(0.8, 0.3, 0.05)).max() < 1e-13


def test_mass_conserved(two_gap):
    x = np.arange(256) / 256
    q0 = pot.evaluate(two_gap, x)
    q1 = ev.nls_samples(q0, 1.0, 1e-4, 200)
    assert abs(np.sum(np.abs(q1) ** 2) - np.sum(np.abs(q0) ** 2)) < 1e-10 * np.sum(np.abs(q0) ** 2)


def test_split_step_second_order(two_gap):
    x = np.arange(256) / 256
    q0 = pot.evaluate(two_gap, x)
    ref = ev.nls_samples(q0, 1.0, 1e-5, 1000)
    errs = [np.abs(ev.nls_samples(q0, 1.0, dt, int(round(0.01 / dt))) - ref).max() for dt in (1e-3, 5e-4)]
    assert 3.5 < errs[0] / errs[1] < 4.5


@pytest.mark.parametrize("n", [3, 32, 100])
def test_bad_mode_count(two_gap, n):
    with pytest.raises(ValueError):
        ev.nls_step(two_gap, 1e-4, 1, n)


def test_aliasing_warning():
    p = pot.from_fourier(np.ones(61), 1.0)
    with pytest.warns(ev.AliasingWarning):
        ev.nls_step(p, 1e-4, 1, 64)


def test_trim():
    p = pot.from_fourier([1e-20, 0, 1.0, 0.5, 1e-19], 1.0)
    assert ev.trim(p).n_max == 1
    assert ev.trim(pot.zero(1.0)).n_max == 0


def test_time_generator_zero_curvature():
    # v_x = X v and v_t = A v are compatible iff X_t - A_x = [A, X];
    # for the plane wave A_x = 0 and q_t = -2i A^2 q
    A, a = 0.9, 0.4
    p = pot.constant(A, a, 1.0)
    z = 0.7 + 0.3j
    Ta = ev.time_generator(p, 0.2, z)
    X = mono.U @ (-1j * z * mono.S3 + np.array([[0, p_q := A * np.exp(1j * a)], [np.conj(p_q), 0]])) @ mono.U_INV
    qt = -2j * A * A * p_q
    Xt = mono.U @ np.array([[0, qt], [np.conj(qt), 0]]) @ mono.U_INV
    assert np.abs(Xt - (Ta @ X - X @ Ta)).max() < 1e-12


def test_alpha_growth(two_gap):
    for z in (20j, 10 + 10j):
        ap, am = ev.alpha_pm(two_gap, z)
        assert abs(ap / (2j * z * z) - 1) < 2e-3 and abs(am / (2j * z * z) + 1) < 2e-3
    ap, am = ev.alpha_pm(two_gap, -20j)
    assert abs(ap / (2j * 400 * -1) + 1) < 2e-3
    assert ev.growth_sign(1j) == 1 and ev.growth_sign(-1j) == -1


def test_compatibility(two_gap):
    assert ev.compatibility_residual(two_gap, 1.3 + 0.7j, 0.3) < 1e-4


def test_flow_path_plane_wave():
    p = pot.constant(1.0, 0.3, 1.0)
    path = ev.FlowPath.build(p, 0.1, dt=1e-3, n_modes=64)
    assert len(path.taus) == 16 and abs(sum(path.weights) - 0.1) < 1e-14
    for tau, q in zip(path.taus, path.potentials):
        assert abs(pot.evaluate(q, 0.0) - ev.plane_wave(1.0, 0.3, tau)) < 1e-12
    assert ev.FlowPath.build(p, 0.0).taus == ()


def test_dirichlet_rhs_forms_agree(two_gap):
    band = spectra.main_spectrum(two_gap, (-6, 6))
    mus = spectra.movable_at(two_gap, band, 0.0)
    sig = spectra.dirichlet_signs(two_gap, mus)
    for m, s in zip(mus, sig):
        a = ev.dirichlet_rhs(two_gap, m)
        b = ev.dirichlet_rhs_sigma(two_gap, m, s)
        assert abs(a - b) < 1e-6 * max(1.0, abs(a))


def test_tracks_follow_recomputed_spectrum(two_gap):
    band = spectra.main_spectrum(two_gap, (-6, 6))
    st = ev.initial_state(two_gap, band)
    logged = []
    st = ev.dirichlet_flow(st, 0.01, dt=1e-4, log_every=50, log=lambda t, p, m, s: logged.append(t))
    assert logged == pytest.approx([0.005, 0.01])
    direct = spectra.movable_at(st.potential, band, 0.0)
    assert np.abs(np.array([tr.gamma for tr in st.dirichlet_tracks]) - direct).max() < 1e-5
    with pytest.raises(ValueError):
        ev.dirichlet_flow(st, 0.0)


def test_isospectrality_short(two_gap):
    band = spectra.main_spectrum(two_gap, (-6, 6))
    rep = ev.isospectrality_report(two_gap, 0.01, ev.default_probes((-6, 6), 10), band=band)
    assert rep.max_drift < 1e-6
    assert max(rep.edge_drift) < 1e-6
    assert len(rep.drifts) == 10


def test_default_probes():
    pr = ev.default_probes((-2, 2), 4)
    assert pr == [complex(-1.5, 0.5), complex(-0.5, 0.5), complex(0.5, 0.5), complex(1.5, 0.5)]


def test_flow_csv_rows():
    rows = ev.flow_csv_rows([0.0, 0.1], [[1.0, 2.0], [1.1, 2.1]], [[1, -1], [0, -1]], [0.0, 1e-9])
    assert rows[1] == [0.1, 1.1, 0, 2.1, -1, 1e-9]
