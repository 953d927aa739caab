"""Closed forms for the constant potential q(x) = A exp(i alpha).

Everything here is evaluated from explicit formulas, never from the ODE
engine, so it serves as ground truth for the numerical modules.

Conventions fixed here:

* lambda(z) = sqrt(z^2 - A^2) has cuts (-inf, -A] and [A, inf), takes the
  value with Im lambda > 0 off the cuts and is continuous from above on
  them, so lambda(+-2) = +-sqrt(3) and lambda(0) = i for A = 1.
* rho(z) = exp(i lambda L) is the multiplier with |rho| < 1.
* The B-matrix scalars use monic f^-(z) = z - mu, f^+ = 1, and satisfy
  T_+^2 = 1/(2 i lambda), which is what det Phi = 1 requires.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .monodromy import U, U_INV

S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
J = np.array([[1, 1], [-1, 1]], dtype=complex)
J_INV = np.linalg.inv(J)


@dataclass(frozen=True)
class Genus0Params:
    A: float
    alpha: float
    L: float = 1.0

    def __post_init__(self) -> None:
        if not self.A > 0:
            raise ValueError("amplitude A must be positive")
        if not self.L > 0:
            raise ValueError("period L must be positive")

    @property
    def q(self) -> complex:
        return self.A * complex(math.cos(self.alpha), math.sin(self.alpha))

    @property
    def mu(self) -> float:
        return -self.A * math.sin(self.alpha)


def lambda_branch(prm: Genus0Params, z: complex, side: int = 1) -> complex:
    """sqrt(z^2 - A^2); on the real axis ``side`` picks the boundary value (+1 from above)."""
    A = prm.A
    z = complex(z)
    if z.imag == 0.0:
        x = z.real
        if abs(x) < A:
            return complex(0.0, math.sqrt(A * A - x * x))
        v = x * math.sqrt(1.0 - (A / x) ** 2)
        return complex(side * v)
    w = z * np.sqrt(1.0 - (A / z) ** 2)
    return complex(w if z.imag > 0 else -w)


def _sinc_l(lam: complex, L: float) -> complex:
    # sin(lam L)/lam, regular at lam = 0
    if abs(lam) < 1e-8:
        return complex(L)
    return np.sin(lam * L) / lam


def delta(prm: Genus0Params, z: complex) -> complex:
    lam = lambda_branch(prm, z)
    return complex(np.cos(lam * prm.L))


def rho(prm: Genus0Params, z: complex, side: int = 1) -> complex:
    return complex(np.exp(1j * lambda_branch(prm, z, side) * prm.L))


def transformed_solution(prm: Genus0Params, z: complex, x: float) -> np.ndarray:
    """Y~(x, z) in closed form."""
    A, a = prm.A, prm.alpha
    lam = lambda_branch(prm, z)
    c = np.cos(lam * x)
    s = _sinc_l(lam, x)
    return np.array([
        [c + s * A * math.cos(a), s * (z + A * math.sin(a))],
        [s * (A * math.sin(a) - z), c - s * A * math.cos(a)],
    ], dtype=complex)


def principal_solution(prm: Genus0Params, z: complex, x: float) -> np.ndarray:
    """Y(x, z) = W exp(-i lambda x s3) W^-1 with W = I - i s3 Q/(z + lambda)."""
    lam = lambda_branch(prm, z)
    W = eigvec_matrix(prm, z, lam)
    E = np.diag([np.exp(-1j * lam * x), np.exp(1j * lam * x)])
    return W @ E @ np.linalg.inv(W)


def eigvec_matrix(prm: Genus0Params, z: complex, lam: complex | None = None) -> np.ndarray:
    if lam is None:
        lam = lambda_branch(prm, z)
    Q = np.array([[0, prm.q], [np.conj(prm.q), 0]])
    return np.eye(2) - 1j * S3 @ Q / (z + lam)


@dataclass(frozen=True)
class ExactSpectrum:
    edges: tuple[float, float]
    mu: float
    sigma: int
    y22_at_mu: float


def sigma_rule(alpha: float) -> int:
    """+1 for alpha in ((2n - 1/2)pi, (2n + 1/2)pi), -1 on the complementary open intervals, 0 at (n + 1/2)pi."""
    t = (alpha / math.pi - 0.5) % 1.0
    if min(t, 1.0 - t) < 1e-12:
        return 0
    return 1 if math.cos(alpha) > 0 else -1


def exact_spectrum(prm: Genus0Params) -> ExactSpectrum:
    A = prm.A
    return ExactSpectrum((-A, A), prm.mu, sigma_rule(prm.alpha),
                         math.exp(-A * prm.L * math.cos(prm.alpha)))


def bloch_pair(prm: Genus0Params, z: complex, x: float) -> tuple[np.ndarray, np.ndarray]:
    """(psi^-, psi^+) in the rotated frame from the eigenvectors of the constant generator."""
    lam = lambda_branch(prm, z)
    V = U @ eigvec_matrix(prm, z, lam)
    # column 0 carries exp(-i lambda x) (multiplier 1/rho), column 1 exp(+i lambda x)
    pm = V[:, 0] / V[0, 0] * np.exp(-1j * lam * x)
    pp = V[:, 1] / V[0, 1] * np.exp(1j * lam * x)
    return pm, pp


def psi_matrix(prm: Genus0Params, z: complex, x: float) -> np.ndarray:
    pm, pp = bloch_pair(prm, z, x)
    if complex(z).imag > 0:
        return np.column_stack([pm, pp])
    return np.column_stack([pp, pm])


def weyl_values(prm: Genus0Params, z: complex) -> tuple[complex, complex]:
    pm, pp = bloch_pair(prm, z, 0.0)
    return complex(pm[1]), complex(pp[1])


def t_plus(prm: Genus0Params, z: complex) -> complex:
    """T_+ = i e^{i pi/4} ((z-A)(z+A))^{-1/4}/sqrt(2) (factorwise principal roots), z in C+."""
    A = prm.A
    return 1j * np.exp(0.25j * np.pi) * (z - A) ** -0.25 * (z + A) ** -0.25 / math.sqrt(2.0)


def t_minus(prm: Genus0Params, z: complex) -> complex:
    """T_-(z) = conj(T_+(conj z)/i), z in C-."""
    A = prm.A
    return np.exp(-0.25j * np.pi) * (z - A) ** -0.25 * (z + A) ** -0.25 / math.sqrt(2.0)


def b_matrix(prm: Genus0Params, z: complex) -> np.ndarray:
    z = complex(z)
    f = z - prm.mu
    if z.imag > 0:
        return t_plus(prm, z) * np.diag([f, 1.0])
    if z.imag < 0:
        return t_minus(prm, z) * np.diag([1.0, f])
    raise ValueError("B is defined off the real axis; pass z +- i0 explicitly")


def jump_matrix(prm: Genus0Params, x: float, z: float) -> np.ndarray:
    """Jump V with Phi_+ = Phi_- V on the real axis."""
    A = prm.A
    f = z - prm.mu
    if z < -A:
        return np.diag([f, 1.0 / f]).astype(complex)
    if z > A:
        return np.diag([-f, -1.0 / f]).astype(complex)
    return np.array([[0, 1j * np.exp(-2j * z * x)], [1j * np.exp(2j * z * x), 0]])


def phi_matrix(prm: Genus0Params, z: complex, x: float) -> np.ndarray:
    """Phi = Psi B exp(i z x s3)."""
    E = np.diag([np.exp(1j * z * x), np.exp(-1j * z * x)])
    return psi_matrix(prm, z, x) @ b_matrix(prm, z) @ E


def upsilon(prm: Genus0Params, z: complex) -> complex:
    A, a = prm.A, prm.alpha
    return -1j * A * math.cos(a) / (A * math.sin(a) + z)


def _edge_root(prm: Genus0Params, z: complex, side: int = 1) -> complex:
    # sqrt((z - A)/(z + A)) with cut [-A, A], -> 1 at infinity
    A = prm.A
    z = complex(z)
    if z.imag == 0.0 and abs(z.real) < A:
        return complex(0.0, side * math.sqrt((A - z.real) / (A + z.real)))
    return complex(np.sqrt((z - A) / (z + A)))


def xi(prm: Genus0Params, z: complex) -> complex:
    A, a = prm.A, prm.alpha
    return _edge_root(prm, z) * (A * (1 - math.sin(a)) / (A * math.sin(a) + z) + 1)


def phi2_closed(prm: Genus0Params, z: complex) -> np.ndarray:
    u, s = upsilon(prm, z), xi(prm, z)
    return 0.5 * np.array([[u + s + 1, u - s + 1], [-u - s + 1, -u + s + 1]])


def phi2_residue(prm: Genus0Params) -> np.ndarray:
    """Upper residue of Phi_(2) at mu (valid for cos alpha < 0)."""
    A, a = prm.A, prm.alpha
    r_u = -1j * A * math.cos(a)
    # sqrt((mu - A)/(mu + A)) from above equals -i cos(alpha)/(1 - sin(alpha)) when cos(alpha) < 0
    r_x = -1j * math.cos(a) / (1 - math.sin(a)) * A * (1 - math.sin(a))
    return 0.5 * np.array([[r_u + r_x, r_u - r_x], [-r_u - r_x, -r_u + r_x]])


def phi4(prm: Genus0Params, z: complex, side: int = 1) -> np.ndarray:
    return np.diag([1.0, _edge_root(prm, z, side)])


def phi3(prm: Genus0Params, z: complex, side: int = 1) -> np.ndarray:
    return J_INV @ phi4(prm, z, side) @ J


@dataclass(frozen=True)
class RhpChain:
    phi: np.ndarray
    phi2: np.ndarray
    phi3: np.ndarray
    phi4: np.ndarray
    q_recovered: complex


def exact_rhp_chain(prm: Genus0Params, x: float, z: complex) -> RhpChain:
    """The chain Phi -> Phi_(2) -> Phi_(3) -> Phi_(4) for sigma_0 = -1.

    q_recovered is the 1/z coefficient of i z (Upsilon - Xi + 1), i.e.
    A cos(alpha) + i A sin(alpha), read off the expansions
    Upsilon ~ -i A cos(alpha)/z and Xi ~ 1 - A sin(alpha)/z.
    """
    if sigma_rule(prm.alpha) != -1:
        raise ValueError("the explicit chain is worked out for sigma_0 = -1 only")
    A, a = prm.A, prm.alpha
    q_rec = complex(A * math.cos(a), A * math.sin(a))
    return RhpChain(phi_matrix(prm, z, x), phi2_closed(prm, z), phi3(prm, z), phi4(prm, z), q_rec)


def phi2_from_phi(prm: Genus0Params, x: float, z: complex) -> np.ndarray:
    """U^-1 Phi B^-1 exp(i (lambda - z) x s3), evaluated from Psi and B.

    Here lambda is the branch ~ z at infinity (cut [-A, A]), which agrees
    with ``lambda_branch`` in C+ and is its negative in C-.
    """
    lam = lambda_branch(prm, z) * (1 if complex(z).imag > 0 else -1)
    Phi = phi_matrix(prm, z, x)
    E = np.diag([np.exp(1j * (lam - z) * x), np.exp(-1j * (lam - z) * x)])
    return U_INV @ Phi @ np.linalg.inv(b_matrix(prm, z)) @ E


def phi2_from_phi3(prm: Genus0Params, z: complex) -> np.ndarray:
    """(I + Res Phi2 Phi3_+(mu)^-1/(z - mu)) Phi3."""
    mu = prm.mu
    p3mu = phi3(prm, complex(mu), side=1)
    C = phi2_residue(prm) @ np.linalg.inv(p3mu)
    return (np.eye(2) + C / (z - mu)) @ phi3(prm, z)
