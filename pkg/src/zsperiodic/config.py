from __future__ import annotations

from dataclasses import asdict, dataclass, replace


@dataclass(frozen=True)
class Tolerances:
    ode_tol: float = 1e-10
    eps_gap: float = 1e-8  # relative: applied as eps_gap * (1 + |E|)
    eps_sign: float = 1e-8
    eps_deriv: float = 1e-6
    eps_edge: float = 1e-6  # relative: applied as eps_edge * (1 + |E|)

    def __post_init__(self) -> None:
        for k, v in asdict(self).items():
            if not v > 0:
                raise ValueError(f"tolerance {k} must be positive, got {v!r}")

    def with_(self, **kw) -> "Tolerances":
        return replace(self, **kw)


DEFAULT = Tolerances()
