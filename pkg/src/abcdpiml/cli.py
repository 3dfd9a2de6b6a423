"""Command-line entry point: ``simulate``, ``calibrate``, ``evaluate``, ``gen-synthetic``.

Settings come from a flat ``key = value`` file (``--config``) and are
overridden by command-line flags.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, metrics, piml, report
from .abcd import AbcdParams, AbcdState, simulate_arrays, trajectory_csv
from .calib import CalibrationResult, calibrate
from .pet import attach_pet
from .regress import DEFAULT_GRIDS, KINDS
from .synthetic import DEFAULT_LATITUDE, DEFAULT_MONTHS, DEFAULT_START, FIXTURE_PARAMS, generate_synthetic
from .timeseries import ForcingFormatError, MonthKey, parse_forcing_csv, serialize_csv, split_at

DEFAULT_SPLIT = MonthKey(2009, 1)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    forcing: Path | None = None
    out: Path | None = None
    calibration: Path | None = None
    latitude: float | None = None
    area_km2: float | None = None
    split: MonthKey = DEFAULT_SPLIT
    warmup_months: int = 24
    points_per_axis: int = 5
    k_folds: int = 5
    regressors: tuple[str, ...] = KINDS
    grids: dict = field(default_factory=dict)
    stage2_train_et: str = "observed"
    params: AbcdParams | None = None
    init_sm: float = AbcdState().sm
    init_gw: float = AbcdState().gw
    seed: int = 0
    noise: float = 0.0
    start: MonthKey = DEFAULT_START
    n_months: int = DEFAULT_MONTHS
    random_free: bool = True

    @property
    def init(self) -> AbcdState:
        return AbcdState(self.init_sm, self.init_gw)

    def effective_grids(self) -> dict:
        return {k: dict(self.grids.get(k, DEFAULT_GRIDS[k])) for k in self.regressors}

    def hashable(self) -> dict:
        """Settings that influence results; paths are excluded (data is hashed separately)."""
        return {
            "latitude": self.latitude,
            "area_km2": self.area_km2,
            "split": str(self.split),
            "warmup_months": self.warmup_months,
            "points_per_axis": self.points_per_axis,
            "k_folds": self.k_folds,
            "regressors": list(self.regressors),
            "grids": self.effective_grids(),
            "stage2_train_et": self.stage2_train_et,
            "init": {"sm": self.init_sm, "gw": self.init_gw},
            "random_free": self.random_free,
        }


def _params(text: str) -> AbcdParams:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 4:
        raise ConfigError(f"params must be 'a,b,c,d', got {text!r}")
    return AbcdParams(*map(float, parts))


def _regressors(text: str) -> tuple[str, ...]:
    kinds = tuple(k.strip().lower() for k in text.split(",") if k.strip())
    unknown = [k for k in kinds if k not in KINDS]
    if unknown or not kinds:
        raise ConfigError(f"regressors must be a subset of {', '.join(KINDS)}, got {text!r}")
    return kinds


_CONVERTERS = {
    "forcing": Path,
    "out": Path,
    "calibration": Path,
    "latitude": float,
    "area_km2": float,
    "split": MonthKey.parse,
    "warmup_months": int,
    "points_per_axis": int,
    "k_folds": int,
    "regressors": _regressors,
    "stage2_train_et": str,
    "params": _params,
    "init_sm": float,
    "init_gw": float,
    "seed": int,
    "noise": float,
    "start": MonthKey.parse,
    "n_months": int,
}


def parse_config_text(text: str, base_dir: Path | None = None) -> dict:
    """Parse ``key = value`` lines. ``grid.<kind>.<name> = v1, v2`` overrides a search grid."""
    values: dict = {}
    grids: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            if key.startswith("grid."):
                _, kind, name = key.split(".", 2)
                if kind not in KINDS:
                    raise ConfigError(f"unknown regressor kind {kind!r}")
                grids.setdefault(kind, {})[name] = [float(v) for v in value.split(",")]
            elif key == "random_free":
                if value.lower() != "true":
                    raise ConfigError("random_free is always true")
            elif key in _CONVERTERS:
                values[key] = _CONVERTERS[key](value)
                if isinstance(values[key], Path) and base_dir is not None and not values[key].is_absolute():
                    values[key] = base_dir / values[key]
            else:
                raise ConfigError(f"unknown key {key!r}")
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config line {lineno}: {exc}") from None
    if grids:
        values["grids"] = grids
    return values


def build_config(args: argparse.Namespace) -> RunConfig:
    cfg = RunConfig()
    if getattr(args, "config", None):
        path = Path(args.config)
        for key, value in parse_config_text(path.read_text(encoding="utf-8"), path.parent).items():
            setattr(cfg, key, value)
    for key, conv in _CONVERTERS.items():
        value = getattr(args, key, None)
        if value is not None:
            try:
                setattr(cfg, key, conv(value))
            except ValueError as exc:
                raise ConfigError(f"--{key.replace('_', '-')}: {exc}") from None
    if cfg.stage2_train_et not in piml.STAGE2_TRAIN_ET_MODES:
        raise ConfigError(f"stage2_train_et must be one of {piml.STAGE2_TRAIN_ET_MODES}")
    return cfg


def _require(cfg: RunConfig, *names: str) -> None:
    missing = [n for n in names if getattr(cfg, n) is None]
    if missing:
        raise ConfigError("missing setting(s): " + ", ".join(missing))


def _load_series(cfg: RunConfig):
    path = cfg.forcing
    raw = path.read_bytes()
    try:
        series, warnings = parse_forcing_csv(raw.decode("utf-8"), area_km2=cfg.area_km2)
    except ForcingFormatError as exc:
        raise ForcingFormatError(f"{path}: {exc}") from None
    for w in warnings:
        print(f"warning: {path}: {w}", file=sys.stderr)
    return series, hashlib.sha256(raw).hexdigest()


def _write(path: Path, text: str) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def cmd_simulate(cfg: RunConfig) -> Path:
    _require(cfg, "forcing", "out", "params")
    series, _ = _load_series(cfg)
    forcing = attach_pet(series, cfg.latitude)
    traj = simulate_arrays(cfg.params, cfg.init, forcing.p_mm, forcing.pet_mm)
    return _write(cfg.out / "trajectory.csv", trajectory_csv(forcing.keys, traj))


def _training_part(series, cfg: RunConfig):
    if cfg.split > series.end:
        return series, None
    return split_at(series, cfg.split)


def cmd_calibrate(cfg: RunConfig) -> tuple[Path, CalibrationResult]:
    _require(cfg, "forcing", "out")
    series, _ = _load_series(cfg)
    train, _ = _training_part(series, cfg)
    forcing = attach_pet(train, cfg.latitude)
    result = calibrate(
        forcing,
        train.optional_column("q_mm"),
        warmup_months=cfg.warmup_months,
        points_per_axis=cfg.points_per_axis,
        init=cfg.init,
    )
    path = _write(cfg.out / "calibration.json", report.dumps_json(result.to_dict()))
    return path, result


def config_hash(cfg: RunConfig) -> str:
    blob = json.dumps(cfg.hashable(), sort_keys=True, separators=(",", ":"))
    return "sha256:" + hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _span(series) -> tuple[str, str]:
    return str(series.start), str(series.end)


def cmd_evaluate(cfg: RunConfig) -> list[Path]:
    _require(cfg, "forcing", "out")
    series, digest = _load_series(cfg)
    train, test = split_at(series, cfg.split)
    for part, label in ((train, "training"), (test, "test")):
        for col in ("q_mm", "et_mm"):
            values = part.optional_column(col)
            start = cfg.warmup_months if label == "training" else 0
            if any(v is None for v in values[start:]):
                raise ValueError(f"observed {col} is missing in the {label} period")
    f_train = attach_pet(train, cfg.latitude)
    f_all = attach_pet(series, cfg.latitude)
    n_train = len(train)
    test_keys = test.keys
    q_test = test.column("q_mm")
    et_test = test.column("et_mm")

    if cfg.calibration is not None:
        cal = CalibrationResult.from_dict(json.loads(cfg.calibration.read_text(encoding="utf-8")))
    else:
        cal = calibrate(
            f_train,
            train.optional_column("q_mm"),
            warmup_months=cfg.warmup_months,
            points_per_axis=cfg.points_per_axis,
            init=cfg.init,
        )

    out = cfg.out
    written = []
    abcd_q = simulate_arrays(cal.params, cfg.init, f_all.p_mm, f_all.pet_mm)["q"][n_train:]
    doc = {
        "format": report.REPORT_FORMAT,
        "version": report.REPORT_VERSION,
        "provenance": report.provenance(config_hash(cfg), digest),
        "config": cfg.hashable(),
        "split": {
            "train_start": _span(train)[0],
            "train_end": _span(train)[1],
            "test_start": _span(test)[0],
            "test_end": _span(test)[1],
            "warmup_months": cal.warmup_months,
        },
        "calibration": cal.to_dict(),
        "abcd": {"q": metrics.all_metrics(q_test, abcd_q)},
        "ml": {},
        "piml": {},
    }
    written.append(_write(out / "predictions_abcd_q.csv", report.predictions_csv(test_keys, q_test, abcd_q)))

    grids = cfg.effective_grids()
    for kind in cfg.regressors:
        base, base_search = piml.train_ml_baseline(
            f_train, train.optional_column("q_mm"), kind, cal.warmup_months, grids, cfg.k_folds
        )
        q_base_raw, _ = piml.predict_ml_baseline(base, f_all, clip=False)
        q_base_test, base_clips = piml.clip_negative(q_base_raw[n_train:])
        doc["ml"][kind] = {
            "q": metrics.all_metrics(q_test, q_base_test),
            "hyperparams": base_search.best,
            "clip_counts": {"q": base_clips},
            "clip_count_train": base.clip_count_train,
        }
        written.append(
            _write(out / f"predictions_ml_{kind}_q.csv", report.predictions_csv(test_keys, q_test, q_base_test))
        )

        model, searches = piml.train_piml(
            f_train,
            train.optional_column("et_mm"),
            train.optional_column("q_mm"),
            kind,
            cal,
            grids,
            cfg.k_folds,
            cfg.stage2_train_et,
            cfg.init,
        )
        pred = piml.predict_piml(model, f_all)
        et_hat = pred.et[n_train:]
        q_hat = pred.q[n_train:]
        doc["piml"][kind] = {
            "et": metrics.all_metrics(et_test, et_hat),
            "q": metrics.all_metrics(q_test, q_hat),
            "hyperparams": {"stage1": searches["stage1"].best, "stage2": searches["stage2"].best},
            "clip_counts": {
                "et": int(np.count_nonzero(pred.et_raw[n_train:] < 0)),
                "q": int(np.count_nonzero(pred.q_raw[n_train:] < 0)),
            },
            "clip_count_train": model.clip_count_train,
        }
        written.append(
            _write(out / f"predictions_piml_{kind}_et.csv", report.predictions_csv(test_keys, et_test, et_hat))
        )
        written.append(
            _write(out / f"predictions_piml_{kind}_q.csv", report.predictions_csv(test_keys, q_test, q_hat))
        )
        written.append(_write(out / f"model_piml_{kind}.json", report.dumps_json(model.to_dict())))

    written.append(_write(out / "calibration.json", report.dumps_json(cal.to_dict())))
    written.append(_write(out / "report.json", report.dumps_json(doc)))
    written.append(_write(out / "report.md", report.render_markdown(doc)))
    return written


def cmd_gen_synthetic(cfg: RunConfig) -> Path:
    _require(cfg, "out")
    series = generate_synthetic(
        params=cfg.params or FIXTURE_PARAMS,
        start=cfg.start,
        n_months=cfg.n_months,
        latitude_deg=cfg.latitude if cfg.latitude is not None else DEFAULT_LATITUDE,
        noise=cfg.noise,
        seed=cfg.seed,
        init=cfg.init,
    )
    return _write(cfg.out / "synthetic.csv", serialize_csv(series))


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="abcdpiml", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, forcing=True):
        p.add_argument("--config", help="flat key = value settings file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--latitude", help="catchment latitude (deg), needed when PET is computed")
        p.add_argument("--init-sm", dest="init_sm", help="initial soil moisture (mm)")
        p.add_argument("--init-gw", dest="init_gw", help="initial groundwater storage (mm)")
        if forcing:
            p.add_argument("--forcing", help="forcing/observation CSV")
            p.add_argument("--area-km2", dest="area_km2", help="catchment area for q_cms conversion")

    p = sub.add_parser("simulate", help="run the abcd model and write the flux trajectory")
    common(p)
    p.add_argument("--params", help="a,b,c,d")

    p = sub.add_parser("calibrate", help="calibrate abcd parameters on the training split")
    common(p)
    p.add_argument("--split", help="first test month, YYYY-MM (default 2009-01)")
    p.add_argument("--warmup-months", dest="warmup_months")

    p = sub.add_parser("evaluate", help="train ML baselines and PIML cascades, write reports")
    common(p)
    p.add_argument("--split", help="first test month, YYYY-MM (default 2009-01)")
    p.add_argument("--warmup-months", dest="warmup_months")
    p.add_argument("--regressors", help="comma-separated subset of ridge,lasso,gpr")
    p.add_argument("--calibration", help="calibration JSON to reuse instead of calibrating inline")
    p.add_argument("--stage2-train-et", dest="stage2_train_et", choices=piml.STAGE2_TRAIN_ET_MODES)

    p = sub.add_parser("gen-synthetic", help="write a synthetic catchment CSV")
    common(p, forcing=False)
    p.add_argument("--params", help="a,b,c,d")
    p.add_argument("--seed", help="random seed (default 0)")
    p.add_argument("--noise", help="multiplicative noise level on Q and ET, e.g. 0.05")
    p.add_argument("--start", help="first month, YYYY-MM")
    p.add_argument("--n-months", dest="n_months")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "calibrate": cmd_calibrate,
    "evaluate": cmd_evaluate,
    "gen-synthetic": cmd_gen_synthetic,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = build_config(args)
        result = COMMANDS[args.command](cfg)
    except (ConfigError, ForcingFormatError, ValueError, OSError, ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.command == "calibrate":
        path, cal = result
        sys.stdout.write(report.dumps_json(cal.to_dict()))
    elif args.command == "evaluate":
        for path in result:
            print(path)
    else:
        print(result)
    return 0


if __name__ == "__main__":
    sys.exit(main())
