import math

import numpy as np
import pytest

from zsperiodic import bloch
from zsperiodic import genus0_oracle as g0
from zsperiodic import monodromy as mono
from zsperiodic import potential as pot

ZS = [0.3 + 0.7j, -1.7 + 0.2j, 2.5 - 1.1j, -0.4 - 0.6j, 4j]


@pytest.mark.parametrize("A,alpha", [(1.0, 0.75 * math.pi), (0.5, 0.0), (2.0, -1.0)])
def test_bloch_matches_genus0(A, alpha):
    prm = g0.Genus0Params(A, alpha, 1.0)
    p = pot.constant(A, alpha, 1.0)
    for z in ZS:
        for x in (0.0, 0.4, 1.3):
            b = bloch.bloch_solutions(p, z, x)
            pm, pp = g0.bloch_pair(prm, z, x)
            assert np.abs(b.psi_minus - pm).max() < 1e-9 * np.abs(pm).max()
            assert np.abs(b.psi_plus - pp).max() < 1e-9 * max(1, np.abs(pp).max())
        assert np.allclose(bloch.weyl_values(p, z), g0.weyl_values(prm, z), atol=1e-9)
        assert np.allclose(bloch.psi_matrix(p, z, 0.4), g0.psi_matrix(prm, z, 0.4), atol=1e-9)


def test_quasi_periodicity(smooth):
    for z in ZS:
        assert bloch.quasi_periodicity_residual(smooth, z, 0.3, 1e-12) < 1e-8


def test_multiplier_inside_unit_disk(smooth):
    for z in ZS:
        assert abs(bloch.bloch_solutions(smooth, z, 0.0).rho) < 1


def test_solves_the_ode(smooth):
    z = 1.1 + 0.5j
    x = 0.35
    b = bloch.bloch_solutions(smooth, z, 0.0)
    Yt = mono.transformed_solution(smooth, z, x)
    assert np.allclose(Yt @ b.psi_minus, bloch.bloch_solutions(smooth, z, x).psi_minus, atol=1e-9)


def test_det_psi(smooth):
    for z in ZS:
        d = np.linalg.det(bloch.psi_matrix(smooth, z, 0.0))
        assert abs(d - bloch.det_psi_expected(smooth, z)) < 1e-8 * max(1, abs(d))


def test_no_overflow_far_up(smooth):
    um, up, _ = bloch.normalized_pair(smooth, 400j, 0.7)
    assert np.all(np.isfinite(um)) and np.all(np.isfinite(up))
    assert abs(um[0] - 1) < 0.05 and abs(up[0] - 1) < 0.05


def test_psi_near_dirichlet_point_raises():
    p = pot.constant(1.0, 0.75 * math.pi, 1.0)
    with pytest.raises(bloch.BlochError):
        bloch.weyl_values(p, complex(-math.sqrt(0.5), 0.0))
    with pytest.raises(bloch.BlochError):
        bloch.psi_matrix(p, 0.5, 0.0)


def test_boundary_values_are_limits(smooth):
    z = 2.3
    up = bloch.boundary_psi(smooth, z, 0.2, +1)
    up2 = bloch.psi_matrix(smooth, complex(z, 1e-7), 0.2)
    assert np.abs(up - up2).max() < 1e-5


def _order(vals, Rs):
    return -np.polyfit(np.log(Rs), np.log(vals), 1)[0]


def test_psi_asymptotics_order(smooth):
    Rs = np.array([20.0, 40.0, 80.0])
    x = 0.3
    errs = []
    for R in Rs:
        z = 1j * R
        um, up, _ = bloch.normalized_pair(smooth, z, x)
        # compare the normalized psi^- against e^{izx} psi_expansion
        exp = bloch.psi_expansion(smooth, x, z, "minus") * np.exp(1j * z * x)
        errs.append(np.abs(um - exp).max())
    assert abs(_order(errs, Rs) - 2) < 0.5


def test_weyl_asymptotics_order(two_gap):
    Rs = np.array([20.0, 40.0, 80.0])
    for which, k in (("minus", 0), ("plus", 1)):
        for order in (0, 1, 2):
            errs = [abs(bloch.weyl_values(two_gap, 1j * R)[k] - bloch.weyl_expansion(two_gap, 1j * R, which, order))
                    for R in Rs]
            assert abs(_order(errs, Rs) - (order + 1)) < 0.5


def test_recovery(plane_wave, two_gap):
    for p in (plane_wave, two_gap):
        for x in (0.0, 0.37, 0.81):
            r = bloch.reconstruct_from_bloch(p, x * p.period)
            assert abs(r.q_hat - pot.evaluate(p, x * p.period)) < 1e-3
            assert not r.diverging


def test_recovery_needs_larger_R_for_rougher_q(smooth):
    # modes up to |n| = 4 need R well beyond 2 pi n before the 1/R model holds
    r = bloch.reconstruct_from_bloch(smooth, 0.37, (80.0, 160.0, 320.0))
    assert abs(r.q_hat - pot.evaluate(smooth, 0.37)) < 1e-3


def test_recovery_needs_upper_half_plane(smooth):
    with pytest.raises(bloch.BlochError):
        bloch.recovery_matrix(smooth, 0.1, -5j)
    with pytest.raises(ValueError):
        bloch.reconstruct_from_bloch(smooth, 0.1, (20.0,))


def test_accumulant_periodic(smooth):
    L = smooth.period
    K = pot.l2_accumulant(smooth, L)
    assert abs(bloch.accumulant(smooth, 2.5 * L) - (2 * K + pot.l2_accumulant(smooth, 0.5 * L))) < 1e-12
