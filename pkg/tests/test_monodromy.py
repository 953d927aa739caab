import math

import numpy as np
import pytest

from zsperiodic import genus0_oracle as g0
from zsperiodic import monodromy as mono
from zsperiodic import potential as pot


def test_zero_potential_principal_solution():
    z, x = 1.3 + 0.4j, 0.8
    Y = mono.principal_solution(pot.zero(1.0), z, x, 1e-12)
    assert np.abs(Y - np.diag([np.exp(-1j * z * x), np.exp(1j * z * x)])).max() < 1e-10


@pytest.mark.parametrize("z", [0.7, 2.5 + 0.3j, -1.1 - 0.8j, 0.2j])
def test_constant_potential_principal_solution(z):
    prm = g0.Genus0Params(0.9, 1.1, 1.0)
    p = pot.constant(prm.A, prm.alpha, prm.L)
    Y = mono.principal_solution(p, z, 0.63, 1e-12)
    assert np.abs(Y - g0.principal_solution(prm, z, 0.63)).max() < 1e-9


def test_self_convergence():
    p = pot.from_function(lambda x: 0.5 * (1 + 0.3 * np.cos(2 * np.pi * x)).astype(complex), 1.0, 32)
    z = 1 + 0.5j
    tol = 1e-10
    Y1 = mono.transformed_solution(p, z, 1.0, tol)
    Y2 = mono.transformed_solution(p, z, 1.0, 1e-14)
    assert np.abs(Y1 - Y2).max() < 10 * tol


def test_monodromy_zero_potential_at_pi():
    r = mono.monodromy(pot.zero(math.pi), 1.0, 1e-13)
    assert np.abs(r.M - np.diag([-1, -1])).max() < 1e-10
    assert abs(r.delta + 1) < 1e-12
    assert r.det_defect < 1e-10


def test_monodromy_zero_potential_imaginary():
    r = mono.monodromy(pot.zero(1.0), 2j)
    assert abs(r.delta - math.cosh(2)) < 1e-9
    assert abs(r.rho - math.exp(-2)) < 1e-10
    assert abs(r.rho * r.rho - 2 * r.delta * r.rho + 1) < 1e-9


def test_constant_potential_discriminant():
    prm = g0.Genus0Params(1.2, 0.4, 0.8)
    p = pot.constant(prm.A, prm.alpha, prm.L)
    for z in [0.3, 1.9, 0.5 + 0.2j, -3 - 1j]:
        assert abs(mono.monodromy(p, z).delta - g0.delta(prm, z)) < 1e-9


def test_discriminant_grid():
    L = 1.0
    out = mono.discriminant_grid(pot.zero(L), [0, math.pi / L, 2 * math.pi / L])
    assert np.abs(out - [1, -1, 1]).max() < 1e-10
    A = 0.8
    p = pot.constant(A, 0.2, L)
    zs = np.linspace(A, A + 5, 40)
    ref = np.cos(L * np.sqrt(zs * zs - A * A))
    assert np.abs(mono.discriminant_grid(p, zs, threads=4) - ref).max() < 1e-9


def test_grid_is_order_independent(smooth):
    zs = [0.1 + 0.2j, 3.0, -2.2 + 1j, 5.5 - 0.5j]
    a = mono.discriminant_grid(smooth, zs, threads=1)
    b = mono.discriminant_grid(smooth, zs[::-1], threads=3)[::-1]
    assert np.array_equal(a, b)
    assert np.array_equal(a[1], mono.monodromy(smooth, zs[1]).delta)


def test_schwarz_reflection(smooth):
    z = 1.7 + 0.9j
    assert abs(mono.discriminant(smooth, np.conj(z)) - np.conj(mono.discriminant(smooth, z))) < 1e-9


def test_det_and_reality(smooth):
    for z in [0.3, 4.2, 2 + 1j, -5 - 2j]:
        r = mono.monodromy(smooth, z, 1e-12)
        assert r.det_defect < 1e-10
    for z in np.linspace(-8, 8, 17):
        assert mono.monodromy(smooth, z).delta.imag == 0.0


def test_check_frame_has_same_trace(smooth):
    r = mono.monodromy(smooth, 1.3 + 0.2j)
    assert abs(0.5 * np.trace(r.M_check) - r.delta) < 1e-12
    assert abs(0.5 * np.trace(r.M_tilde) - r.delta) < 1e-12


def test_discriminant_large_z_order(smooth):
    for s in (1, -1):
        res = [mono.discriminant_asymptotic_residual(smooth, s * 1j * R) for R in (20.0, 40.0)]
        assert 3.0 <= res[0] / res[1] <= 5.0


def test_y12_leading_term_sign():
    # q = 0 pins the sign: y~12(L, z) = +sin(z L)
    L = 1.0
    for z in [0.4, 2.3, 7.1]:
        assert abs(mono.transformed_solution(pot.zero(L), z, L)[0, 1] - math.sin(z * L)) < 1e-9


def test_y12_leading_term_order(smooth):
    L = smooth.period
    # the O(1/z) term oscillates, so compare sup norms over one period in z
    errs = []
    for R in (20.0, 40.0, 80.0):
        zs = R + np.linspace(0, 2 * math.pi / L, 24, endpoint=False)
        errs.append(max(abs(mono.transformed_solution(smooth, z, L, 1e-12)[0, 1].real - math.sin(z * L))
                        for z in zs))
    assert all(1.6 < a / b < 2.4 for a, b in zip(errs, errs[1:]))


def test_y12_square_over_disc(smooth):
    L = smooth.period
    ok = 0
    for z in np.linspace(47, 53, 25):
        Mt = mono.transformed_solution(smooth, z, L)
        y12 = Mt[0, 1].real
        d = 0.5 * (Mt[0, 0] + Mt[1, 1]).real
        if abs(y12) < 1e-2 or abs(d * d - 1) < 1e-2:
            continue
        ok += 1
        assert abs(y12 * y12 / (d * d - 1) + 1) < 0.1
    assert ok > 10


def test_scaled_discriminant_matches(smooth):
    z = 0.3 + 2j
    assert abs(mono.scaled_discriminant(smooth, z) * math.exp(2 * smooth.period)
               - mono.discriminant(smooth, z)) < 1e-9 * abs(mono.discriminant(smooth, z))


def test_large_imaginary_part_does_not_overflow(smooth):
    assert np.isfinite(mono.scaled_discriminant(smooth, 900j))
