"""L-periodic complex potentials stored as truncated Fourier series."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np


class PotentialError(ValueError):
    pass


@dataclass(frozen=True)
class PeriodicPotential:
    """q(x) = sum_n c_n exp(2 pi i n x / L), n = -N..N.

    ``coeffs[n + N]`` holds c_n.  Grid samples are converted to this form on
    construction, so evaluation is trigonometric interpolation in both cases.
    """

    period: float
    coeffs: np.ndarray
    kind: str = "fourier"
    samples: np.ndarray | None = field(default=None, compare=False)
    smoothness: str = "C2"

    def __post_init__(self) -> None:
        if not (self.period > 0 and math.isfinite(self.period)):
            raise PotentialError(f"period must be positive, got {self.period!r}")
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size == 0 or c.size % 2 == 0:
            raise PotentialError("coefficient array must be 1-D with odd length 2N+1")
        if not np.all(np.isfinite(c)):
            raise PotentialError("non-finite Fourier coefficient")
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_max(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def wavenumbers(self) -> np.ndarray:
        n = np.arange(-self.n_max, self.n_max + 1)
        return 2.0 * np.pi * n / self.period

    def __call__(self, x):
        return evaluate(self, x)


def from_fourier(coeffs, period: float) -> PeriodicPotential:
    return PeriodicPotential(float(period), np.asarray(coeffs, dtype=complex))


def from_samples(samples, period: float) -> PeriodicPotential:
    """Band-limited interpolant of q(iL/N), i = 0..N-1."""
    s = np.asarray(samples, dtype=complex)
    if s.ndim != 1 or s.size == 0:
        raise PotentialError("empty sample set")
    if not np.all(np.isfinite(s)):
        raise PotentialError("non-finite sample")
    n = s.size
    f = np.fft.fft(s) / n
    half = n // 2
    c = np.zeros(2 * half + 1, dtype=complex)
    # indices -half..half; Nyquist mode split evenly so the interpolant is exact at nodes
    for m in range(-half, half + 1):
        v = f[m % n]
        if n % 2 == 0 and abs(m) == half:
            v = 0.5 * f[half]
        c[m + half] = v
    return PeriodicPotential(float(period), c, kind="samples", samples=s.copy())


def constant(amplitude: float, phase: float, period: float) -> PeriodicPotential:
    return from_fourier([amplitude * np.exp(1j * phase)], period)


def zero(period: float = 1.0) -> PeriodicPotential:
    return from_fourier([0.0], period)


def from_function(f: Callable[[np.ndarray], np.ndarray], period: float, n: int = 128) -> PeriodicPotential:
    x = np.arange(n) * period / n
    return from_samples(f(x), period)


def make_potential(spec: dict) -> PeriodicPotential:
    """Build from the JSON layout {"period", "kind", "data": [[re, im], ...]}.

    For kind "fourier" the data list runs over n = -N..N.
    """
    try:
        period = float(spec["period"])
        kind = spec["kind"]
        data = spec["data"]
    except (KeyError, TypeError) as exc:
        raise PotentialError(f"malformed potential spec: {exc}") from None
    if not data:
        raise PotentialError("empty representation")
    vals = np.array([complex(re, im) for re, im in data])
    if kind == "fourier":
        return from_fourier(vals, period)
    if kind == "samples":
        return from_samples(vals, period)
    raise PotentialError(f"unknown kind {kind!r}")


def to_spec(p: PeriodicPotential) -> dict:
    if p.kind == "samples" and p.samples is not None:
        vals = p.samples
    else:
        vals = p.coeffs
    return {
        "period": p.period,
        "kind": "samples" if p.kind == "samples" and p.samples is not None else "fourier",
        "data": [[float(v.real), float(v.imag)] for v in vals],
    }


def load(path: str | Path) -> PeriodicPotential:
    return make_potential(json.loads(Path(path).read_text()))


def save(p: PeriodicPotential, path: str | Path) -> None:
    Path(path).write_text(json.dumps(to_spec(p), indent=1) + "\n")


def evaluate(p: PeriodicPotential, x):
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * np.multiply.outer(x, p.wavenumbers))
    return phase @ p.coeffs


def evaluate_dx(p: PeriodicPotential, x):
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * np.multiply.outer(x, p.wavenumbers))
    return phase @ (1j * p.wavenumbers * p.coeffs)


def evaluate_dxx(p: PeriodicPotential, x):
    x = np.asarray(x, dtype=float)
    phase = np.exp(1j * np.multiply.outer(x, p.wavenumbers))
    return phase @ (-(p.wavenumbers**2) * p.coeffs)


def shift_base(p: PeriodicPotential, x0: float) -> PeriodicPotential:
    """q~(x) = q(x + x0)."""
    c = p.coeffs * np.exp(1j * p.wavenumbers * x0)
    return PeriodicPotential(p.period, c, kind="fourier", smoothness=p.smoothness)


def conjugate(p: PeriodicPotential) -> PeriodicPotential:
    return PeriodicPotential(p.period, np.conj(p.coeffs[::-1]))


def scale(p: PeriodicPotential, factor: complex) -> PeriodicPotential:
    return PeriodicPotential(p.period, factor * p.coeffs, smoothness=p.smoothness)


def grid(p: PeriodicPotential, n: int) -> tuple[np.ndarray, np.ndarray]:
    x = np.arange(n) * p.period / n
    return x, evaluate(p, x)


def l2_accumulant(p: PeriodicPotential, x: float) -> float:
    """K(x) = int_0^x |q|^2 by composite Gauss-Legendre."""
    L = p.period
    if x < 0 or x > L * (1 + 1e-14):
        raise PotentialError(f"x = {x} outside [0, L]")
    if x == 0:
        return 0.0
    # |q|^2 has wavenumbers up to 2N; keep >= 32 nodes and ~4 nodes per oscillation per period
    per_period = max(32, 8 * p.n_max + 16)
    n_nodes = 16
    panels = max(1, math.ceil(per_period * x / L / n_nodes))
    t, w = np.polynomial.legendre.leggauss(n_nodes)
    edges = np.linspace(0.0, x, panels + 1)
    a, b = edges[:-1, None], edges[1:, None]
    xs = 0.5 * (b - a) * t + 0.5 * (b + a)
    vals = np.abs(evaluate(p, xs.ravel())).reshape(xs.shape) ** 2
    return float(np.sum(0.5 * (b - a) * w * vals))


def smooth_random(seed: int, period: float = 1.0, n_modes: int = 4, amplitude: float = 0.8,
                  decay: float = 1.5) -> PeriodicPotential:
    """Random trigonometric polynomial with geometrically decaying modes."""
    rng = np.random.default_rng(seed)
    n = np.arange(-n_modes, n_modes + 1)
    mags = amplitude * decay ** (-np.abs(n).astype(float))
    c = mags * (rng.standard_normal(n.size) + 1j * rng.standard_normal(n.size)) / np.sqrt(2)
    return from_fourier(c, period)
