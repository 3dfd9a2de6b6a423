"""The abcd monthly water-balance model.

Two stores (soil moisture and groundwater) driven by precipitation and
potential evapotranspiration, with four behavioural parameters:

* ``a`` controls recharge and runoff before the soil saturates,
* ``b`` is the upper limit on evapotranspiration opportunity (mm),
* ``c`` is the fraction of excess water routed to groundwater,
* ``d`` is the groundwater release rate (1/month).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .timeseries import Forcing

# Rounding noise tolerated on the (analytically non-negative) discriminant.
DISCRIMINANT_CLAMP = 1e-12

DEFAULT_INIT_SM = 100.0
DEFAULT_INIT_GW = 50.0

FLUX_NAMES = ("w", "y", "et", "sm", "dr", "gr", "gw", "gd", "q")


@dataclass(frozen=True)
class AbcdParams:
    a: float
    b: float
    c: float
    d: float

    def __post_init__(self):
        for name in ("a", "b", "c", "d"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"parameter {name} must be finite")
        if not 0 < self.a <= 1:
            raise ValueError(f"a must be in (0, 1], got {self.a}")
        if not self.b > 0:
            raise ValueError(f"b must be > 0, got {self.b}")
        if not 0 <= self.c <= 1:
            raise ValueError(f"c must be in [0, 1], got {self.c}")
        if not self.d > 0:
            raise ValueError(f"d must be > 0, got {self.d}")

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.a, self.b, self.c, self.d)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c, "d": self.d}


@dataclass(frozen=True)
class AbcdState:
    sm: float = DEFAULT_INIT_SM
    gw: float = DEFAULT_INIT_GW

    def __post_init__(self):
        for name in ("sm", "gw"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"state {name} must be finite and >= 0, got {value}")


@dataclass(frozen=True)
class AbcdFluxes:
    w: float
    y: float
    et: float
    dr: float
    gr: float
    gd: float
    q: float


def _step(a, b, c, d, sm, gw, p, pet):
    # Plain-float kernel shared by step() and simulate_arrays().
    w = sm + p
    h = (w + b) / (2.0 * a)
    # (W+b)^2 - 4abW rewritten as a sum of non-negative terms when a <= 1.
    disc = ((w - b) ** 2 + 4.0 * b * w * (1.0 - a)) / (4.0 * a * a)
    if disc < 0.0:
        if disc < -DISCRIMINANT_CLAMP:
            raise ArithmeticError(f"negative discriminant {disc!r} in evapotranspiration opportunity")
        disc = 0.0
    root = math.sqrt(disc)
    # Rationalised h - sqrt(h^2 - bW/a), free of cancellation for small W.
    denom = h + root
    y = (b * w / a) / denom if denom > 0.0 else 0.0
    if y > w:
        y = w
    sm_next = y * math.exp(-pet / b)
    et = -y * math.expm1(-pet / b)
    excess = w - y
    gr = c * excess
    dr = excess - gr
    gw_next = (gw + gr) / (1.0 + d)
    gd = d * gw_next
    q = dr + gd
    return w, y, et, sm_next, dr, gr, gw_next, gd, q


def step(params: AbcdParams, prev: AbcdState, p_mm: float, pet_mm: float) -> tuple[AbcdState, AbcdFluxes]:
    """Advance the model by one month."""
    if not (p_mm >= 0 and pet_mm >= 0):
        raise ValueError(f"precipitation and PET must be >= 0, got p={p_mm}, pet={pet_mm}")
    w, y, et, sm, dr, gr, gw, gd, q = _step(
        params.a, params.b, params.c, params.d, prev.sm, prev.gw, float(p_mm), float(pet_mm)
    )
    return AbcdState(sm, gw), AbcdFluxes(w=w, y=y, et=et, dr=dr, gr=gr, gd=gd, q=q)


def simulate_arrays(params: AbcdParams, init: AbcdState, p, pet) -> dict[str, np.ndarray]:
    """Run the model over aligned precipitation/PET arrays.

    Returns one array per name in ``FLUX_NAMES``; ``sm`` and ``gw`` are the
    end-of-month storages.
    """
    p = np.asarray(p, dtype=float)
    pet = np.asarray(pet, dtype=float)
    if p.shape != pet.shape or p.ndim != 1:
        raise ValueError("p and pet must be 1-D arrays of equal length")
    if len(p) == 0:
        raise ValueError("forcing must be non-empty")
    if np.any(p < 0) or np.any(pet < 0):
        raise ValueError("precipitation and PET must be >= 0")
    a, b, c, d = params.as_tuple()
    sm, gw = init.sm, init.gw
    out = np.empty((len(p), len(FLUX_NAMES)))
    for t, (pt, et_pot) in enumerate(zip(p.tolist(), pet.tolist())):
        row = _step(a, b, c, d, sm, gw, pt, et_pot)
        out[t] = row
        sm, gw = row[3], row[6]
    return {name: out[:, i] for i, name in enumerate(FLUX_NAMES)}


def simulate(params: AbcdParams, init: AbcdState, forcing: Forcing) -> list[tuple[AbcdState, AbcdFluxes]]:
    traj = simulate_arrays(params, init, forcing.p_mm, forcing.pet_mm)
    result = []
    for t in range(len(forcing)):
        result.append(
            (
                AbcdState(float(traj["sm"][t]), float(traj["gw"][t])),
                AbcdFluxes(*(float(traj[n][t]) for n in ("w", "y", "et", "dr", "gr", "gd", "q"))),
            )
        )
    return result


def trajectory_csv(keys, traj: dict[str, np.ndarray]) -> str:
    lines = ["date," + ",".join(FLUX_NAMES)]
    for t, key in enumerate(keys):
        lines.append(str(key) + "," + ",".join(repr(float(traj[n][t])) for n in FLUX_NAMES))
    return "\n".join(lines) + "\n"
