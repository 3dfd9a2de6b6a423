"""Two-stage physics-informed cascade around the calibrated abcd model.

Stage 1 predicts actual ET from (SM_{t-1}, P_t, PET_t). Stage 2 predicts
streamflow from (SM_{t-1}, SM_t, GW_t, GW_{t-1}, P_t, ET_t), where the storages
come from the calibrated abcd simulation and ET_t is the stage-1 estimate at
prediction time. A plain (P_t, T_t) -> Q_t regressor serves as baseline.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .abcd import AbcdParams, AbcdState, simulate_arrays
from .calib import CalibrationResult
from .regress import DEFAULT_GRIDS, KINDS, ScaledRegressor, _check_version, grid_search, scaled_fit_spec
from .timeseries import Forcing

STAGE1_COLUMNS = ("sm_prev", "p", "pet")
STAGE2_COLUMNS = ("sm_prev", "sm", "gw", "gw_prev", "p", "et")
BASELINE_COLUMNS = ("p", "t")
STAGE2_ET = STAGE2_COLUMNS.index("et")
STAGE2_TRAIN_ET_MODES = ("observed", "predicted")

FORMAT_VERSION = 1


@dataclass(frozen=True)
class Covariates:
    stage1: np.ndarray  # n x 3, STAGE1_COLUMNS
    stage2: np.ndarray  # n x 6, STAGE2_COLUMNS; the et column is NaN until filled
    trajectory: dict = field(repr=False)


def build_covariates(params: AbcdParams, init: AbcdState, forcing: Forcing) -> Covariates:
    traj = simulate_arrays(params, init, forcing.p_mm, forcing.pet_mm)
    sm = traj["sm"]
    gw = traj["gw"]
    sm_prev = np.concatenate(([init.sm], sm[:-1]))
    gw_prev = np.concatenate(([init.gw], gw[:-1]))
    stage1 = np.column_stack([sm_prev, forcing.p_mm, forcing.pet_mm])
    stage2 = np.column_stack([sm_prev, sm, gw, gw_prev, forcing.p_mm, np.full(len(forcing), np.nan)])
    return Covariates(stage1, stage2, traj)


def with_et(stage2: np.ndarray, et) -> np.ndarray:
    out = stage2.copy()
    out[:, STAGE2_ET] = et
    return out


def clip_negative(values: np.ndarray) -> tuple[np.ndarray, int]:
    negative = values < 0
    return np.where(negative, 0.0, values), int(np.count_nonzero(negative))


def _observed(values, n: int, start: int, name: str) -> np.ndarray:
    obs = np.array([np.nan if v is None else v for v in values], dtype=float)
    if obs.shape != (n,):
        raise ValueError(f"observed {name} has length {len(obs)}, forcing has {n}")
    if not np.all(np.isfinite(obs[start:])):
        raise ValueError(f"observed {name} is missing on training months after the warm-up")
    return obs


def _select_and_fit(kind: str, X: np.ndarray, y: np.ndarray, grid: dict, k_folds: int):
    search = grid_search(scaled_fit_spec(kind), grid, X, y, k_folds=k_folds)
    return ScaledRegressor.fit(kind, X, y, **search.best), search


@dataclass(frozen=True)
class PimlModel:
    abcd_params: AbcdParams
    abcd_init: AbcdState
    stage1: ScaledRegressor
    stage2: ScaledRegressor
    regressor_kind: str
    clip_count_train: int
    warmup_months: int
    stage2_train_et: str = "observed"

    def to_dict(self) -> dict:
        return {
            "format": "abcdpiml.piml_model",
            "version": FORMAT_VERSION,
            "regressor_kind": self.regressor_kind,
            "abcd_params": self.abcd_params.to_dict(),
            "abcd_init": {"sm": self.abcd_init.sm, "gw": self.abcd_init.gw},
            "warmup_months": self.warmup_months,
            "stage2_train_et": self.stage2_train_et,
            "clip_count_train": self.clip_count_train,
            "stage1": self.stage1.to_dict(),
            "stage2": self.stage2.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PimlModel":
        _check_version(data, "abcdpiml.piml_model")
        return cls(
            abcd_params=AbcdParams(**data["abcd_params"]),
            abcd_init=AbcdState(**data["abcd_init"]),
            stage1=ScaledRegressor.from_dict(data["stage1"]),
            stage2=ScaledRegressor.from_dict(data["stage2"]),
            regressor_kind=data["regressor_kind"],
            clip_count_train=int(data["clip_count_train"]),
            warmup_months=int(data["warmup_months"]),
            stage2_train_et=data["stage2_train_et"],
        )


def train_piml(
    forcing: Forcing,
    observed_et,
    observed_q,
    regressor_kind: str,
    calibration: CalibrationResult,
    grids: dict | None = None,
    k_folds: int = 5,
    stage2_train_et: str = "observed",
    init: AbcdState | None = None,
) -> tuple[PimlModel, dict]:
    """Fit both cascade stages on the training months after the warm-up.

    Returns the model and the two grid-search results (keys ``stage1``, ``stage2``).
    """
    if regressor_kind not in KINDS:
        raise ValueError(f"unknown regressor kind {regressor_kind!r}")
    if stage2_train_et not in STAGE2_TRAIN_ET_MODES:
        raise ValueError(f"stage2_train_et must be one of {STAGE2_TRAIN_ET_MODES}")
    init = init or AbcdState()
    grid = (grids or {}).get(regressor_kind, DEFAULT_GRIDS[regressor_kind])
    n = len(forcing)
    w = calibration.warmup_months
    et_obs = _observed(observed_et, n, w, "ET")[w:]
    q_obs = _observed(observed_q, n, w, "streamflow")[w:]

    cov = build_covariates(calibration.params, init, forcing)
    X1 = cov.stage1[w:]
    stage1, search1 = _select_and_fit(regressor_kind, X1, et_obs, grid, k_folds)
    et_fit, clips_et = clip_negative(stage1.predict(X1))

    et_column = et_obs if stage2_train_et == "observed" else et_fit
    X2 = with_et(cov.stage2[w:], et_column)
    stage2, search2 = _select_and_fit(regressor_kind, X2, q_obs, grid, k_folds)
    _, clips_q = clip_negative(stage2.predict(X2))

    model = PimlModel(
        abcd_params=calibration.params,
        abcd_init=init,
        stage1=stage1,
        stage2=stage2,
        regressor_kind=regressor_kind,
        clip_count_train=clips_et + clips_q,
        warmup_months=w,
        stage2_train_et=stage2_train_et,
    )
    return model, {"stage1": search1, "stage2": search2}


@dataclass(frozen=True)
class PimlPrediction:
    et: np.ndarray
    q: np.ndarray
    clip_report: dict
    et_raw: np.ndarray = field(repr=False)
    q_raw: np.ndarray = field(repr=False)
    stage2_inputs: np.ndarray = field(repr=False)


def predict_piml(model: PimlModel, forcing: Forcing, clip: bool = True) -> PimlPrediction:
    """Run the cascade over every month of ``forcing`` (observations are never read).

    ``clip=False`` disables the non-negativity clamp; intended for tests.
    """
    cov = build_covariates(model.abcd_params, model.abcd_init, forcing)
    et_raw = model.stage1.predict(cov.stage1)
    et, n_et = clip_negative(et_raw) if clip else (et_raw, 0)
    X2 = with_et(cov.stage2, et)
    q_raw = model.stage2.predict(X2)
    q, n_q = clip_negative(q_raw) if clip else (q_raw, 0)
    return PimlPrediction(et, q, {"et": n_et, "q": n_q}, et_raw, q_raw, X2)


@dataclass(frozen=True)
class MlBaseline:
    regressor: ScaledRegressor
    regressor_kind: str
    clip_count_train: int
    warmup_months: int

    def to_dict(self) -> dict:
        return {
            "format": "abcdpiml.ml_baseline",
            "version": FORMAT_VERSION,
            "regressor_kind": self.regressor_kind,
            "warmup_months": self.warmup_months,
            "clip_count_train": self.clip_count_train,
            "regressor": self.regressor.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlBaseline":
        _check_version(data, "abcdpiml.ml_baseline")
        return cls(
            ScaledRegressor.from_dict(data["regressor"]),
            data["regressor_kind"],
            int(data["clip_count_train"]),
            int(data["warmup_months"]),
        )


def baseline_features(forcing: Forcing) -> np.ndarray:
    return np.column_stack([forcing.p_mm, forcing.t_c])


def train_ml_baseline(
    forcing: Forcing,
    observed_q,
    regressor_kind: str,
    warmup_months: int = 24,
    grids: dict | None = None,
    k_folds: int = 5,
) -> tuple[MlBaseline, object]:
    if regressor_kind not in KINDS:
        raise ValueError(f"unknown regressor kind {regressor_kind!r}")
    grid = (grids or {}).get(regressor_kind, DEFAULT_GRIDS[regressor_kind])
    w = warmup_months
    q_obs = _observed(observed_q, len(forcing), w, "streamflow")[w:]
    X = baseline_features(forcing)[w:]
    reg, search = _select_and_fit(regressor_kind, X, q_obs, grid, k_folds)
    _, clips = clip_negative(reg.predict(X))
    return MlBaseline(reg, regressor_kind, clips, w), search


def predict_ml_baseline(model: MlBaseline, forcing: Forcing, clip: bool = True) -> tuple[np.ndarray, int]:
    raw = model.regressor.predict(baseline_features(forcing))
    return clip_negative(raw) if clip else (raw, 0)
