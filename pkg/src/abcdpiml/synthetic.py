"""Synthetic monsoon-type catchment: random forcing plus abcd-generated observations."""

from __future__ import annotations

import numpy as np

from .abcd import AbcdParams, AbcdState, simulate_arrays
from .pet import PetInput, hamon_pet
from .timeseries import MonthKey, MonthlyRecord, MonthlySeries

# Monthly precipitation climatology (mm), Jan..Dec, shaped like an eastern Indian monsoon.
P_CLIMATOLOGY = (10.0, 20.0, 25.0, 35.0, 80.0, 230.0, 330.0, 330.0, 250.0, 110.0, 25.0, 8.0)
P_GAMMA_SHAPE = 4.0
T_MEAN_C = 26.0
T_AMPLITUDE_C = 5.0
T_NOISE_C = 0.8

FIG2_PARAMS = AbcdParams(a=0.93, b=5.0, c=0.4, d=1.5)
# Parameters of the bundled catchment. b = 250 mm gives ET a seasonal cycle;
# with b = 5 mm ET sits near 5 mm in almost every month.
FIXTURE_PARAMS = AbcdParams(a=0.98, b=250.0, c=0.4, d=0.2)
DEFAULT_LATITUDE = 21.0
DEFAULT_START = MonthKey(1979, 1)
DEFAULT_MONTHS = 432


def generate_synthetic(
    params: AbcdParams = FIXTURE_PARAMS,
    start: MonthKey = DEFAULT_START,
    n_months: int = DEFAULT_MONTHS,
    latitude_deg: float = DEFAULT_LATITUDE,
    noise: float = 0.0,
    seed: int = 0,
    init: AbcdState | None = None,
) -> MonthlySeries:
    """Generate forcing and 'observed' ET/Q/SM/GW from the abcd model.

    ``noise`` is the standard deviation of multiplicative Gaussian error on
    observed streamflow and ET (0.05 means 5 %); perturbed values are floored at 0.
    SM and GW columns hold the noise-free model states.
    """
    if n_months < 1:
        raise ValueError("n_months must be >= 1")
    if noise < 0:
        raise ValueError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    keys = [start.shift(i) for i in range(n_months)]
    months = np.array([k.month for k in keys])

    clim = np.array(P_CLIMATOLOGY)[months - 1]
    p = clim * rng.gamma(P_GAMMA_SHAPE, 1.0 / P_GAMMA_SHAPE, size=n_months)
    # Warmest in May, coolest in December/January.
    t = T_MEAN_C + T_AMPLITUDE_C * np.sin(2.0 * np.pi * (months - 2) / 12.0) + rng.normal(0.0, T_NOISE_C, n_months)
    pet = np.array([hamon_pet(PetInput(float(tc), latitude_deg, k)) for tc, k in zip(t, keys)])

    traj = simulate_arrays(params, init or AbcdState(), p, pet)
    q = traj["q"]
    et = traj["et"]
    if noise > 0:
        q = np.maximum(q * (1.0 + noise * rng.normal(size=n_months)), 0.0)
        et = np.maximum(et * (1.0 + noise * rng.normal(size=n_months)), 0.0)

    records = [
        MonthlyRecord(
            key=k,
            p_mm=float(p[i]),
            t_c=float(t[i]),
            q_mm=float(q[i]),
            et_mm=float(et[i]),
            sm_mm=float(traj["sm"][i]),
            gw_mm=float(traj["gw"][i]),
            pet_mm=float(pet[i]),
        )
        for i, k in enumerate(keys)
    ]
    return MonthlySeries(records)


def bundled_dataset_path():
    """Path to the shipped synthetic catchment CSV (default generator settings)."""
    from importlib.resources import files

    return files("abcdpiml") / "data" / "synthetic_catchment.csv"
