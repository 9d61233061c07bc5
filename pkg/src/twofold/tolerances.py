from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace


@dataclass(frozen=True)
class Tolerances:
    """Numerical surrogates for the exact-arithmetic conditions of the theory."""

    tau_sw: float = 1e-10  # switch-class sign margin
    tau_mult: float = 1e-8  # zero / multiplicity threshold (scaled by derivative size)
    tau_margin: float = 1e-8  # two-fold certificate margin
    cluster_radius: float = 1e-5  # radius inside which zeros are not separated
    m_max: int = 4
    zero_grid: int = 2048
    s_max: float = 50.0  # regularization tail saturation for field evaluation
    sim_s_max: float = float("inf")  # tail saturation used along simulated trajectories
    rho_margin: float = 1e-6
    quad_rel: float = 1e-10
    quad_abs: float = 1e-13
    halfmap_rtol: float = 1e-10
    halfmap_atol: float = 1e-10
    event_tol: float = 1e-12
    box: float = 10.0
    t_max: float = 100.0
    delta: float = 0.3  # Hausdorff neighborhood of the sliding cycle
    sim_rtol: float = 1e-9
    sim_atol: float = 1e-11
    t_budget: float = 50.0  # simulation horizon in units of 1/eps^2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "Tolerances":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown tolerance keys: {sorted(unknown)}")
        return replace(cls(), **data)


DEFAULT = Tolerances()
