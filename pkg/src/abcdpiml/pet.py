"""Temperature-based monthly potential evapotranspiration (Hamon)."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .timeseries import Forcing, MonthKey, MonthlySeries

MAX_ABS_LATITUDE = 66.0
MID_MONTH_DAY = 15


@dataclass(frozen=True)
class PetInput:
    t_c: float
    latitude_deg: float
    key: MonthKey

    def __post_init__(self):
        check_latitude(self.latitude_deg)
        if not math.isfinite(self.t_c):
            raise ValueError("temperature must be finite")


def check_latitude(latitude_deg: float) -> None:
    if not (math.isfinite(latitude_deg) and -MAX_ABS_LATITUDE <= latitude_deg <= MAX_ABS_LATITUDE):
        raise ValueError(f"latitude must be within [-66, 66] degrees, got {latitude_deg}")


def day_of_year(key: MonthKey, day: int = MID_MONTH_DAY) -> int:
    return sum(MonthKey(key.year, m).days for m in range(1, key.month)) + day


def solar_declination(doy: int) -> float:
    """Solar declination (rad) for a day of year."""
    return 0.409 * math.sin(2.0 * math.pi * doy / 365.0 - 1.39)


def day_length_hours(latitude_deg: float, key: MonthKey) -> float:
    """Mean day length at mid-month from the sunset hour angle."""
    phi = math.radians(latitude_deg)
    delta = solar_declination(day_of_year(key))
    x = -math.tan(phi) * math.tan(delta)
    omega = math.acos(min(1.0, max(-1.0, x)))
    return 24.0 / math.pi * omega


def saturation_vapour_pressure(t_c: float) -> float:
    """kPa, Tetens form."""
    return 0.611 * math.exp(17.27 * t_c / (t_c + 237.3))


def hamon_pet(inp: PetInput) -> float:
    """Monthly PET (mm). Zero at or below freezing."""
    if inp.t_c <= 0.0:
        return 0.0
    daylight = day_length_hours(inp.latitude_deg, inp.key)
    daily = 29.8 * daylight * saturation_vapour_pressure(inp.t_c) / (inp.t_c + 273.2)
    return daily * inp.key.days


def attach_pet(series: MonthlySeries, latitude_deg: float | None = None) -> Forcing:
    """Build model forcing; a complete ``pet_mm`` column takes precedence over Hamon."""
    p = series.column("p_mm")
    t = series.column("t_c")
    if series.has_column("pet_mm"):
        pet = series.column("pet_mm")
    else:
        if latitude_deg is None:
            raise ValueError("latitude is required to compute PET (no complete pet_mm column)")
        check_latitude(latitude_deg)
        pet = np.array([hamon_pet(PetInput(r.t_c, latitude_deg, r.key)) for r in series])
    return Forcing(series.keys, p, t, pet)
