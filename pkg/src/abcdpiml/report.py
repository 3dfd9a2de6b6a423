"""Report rendering: markdown tables, JSON report and prediction CSVs."""

from __future__ import annotations

import json

from . import __version__

DISPLAY_NAMES = {"ridge": "Ridge", "lasso": "LASSO", "gpr": "GPR"}
# Row order used by the published comparison tables.
ROW_ORDER = ("lstm", "lasso", "ridge", "svr", "gpr")
METRIC_ORDER = ("rmse", "pbias", "nse")
REPORT_FORMAT = "abcdpiml.report"
REPORT_VERSION = 1


def fmt(value: float) -> str:
    return f"{value:.3f}"


def _table(header: list[str], rows: list[list[str]]) -> str:
    lines = [
        "| " + " | ".join(header) + " |",
        "|:" + "-" * (len(header[0]) + 1) + "|" + "|".join("-" * (len(h) + 1) + ":" for h in header[1:]) + "|",
    ]
    lines += ["| " + " | ".join(r) + " |" for r in rows]
    return "\n".join(lines) + "\n"


def ml_table(rows) -> str:
    """Streamflow skill per model. ``rows``: iterable of (name, {"rmse", "pbias", "nse"})."""
    header = ["Model", "Q RMSE", "Q PBIAS", "Q NSE"]
    return _table(header, [[name] + [fmt(q[m]) for m in METRIC_ORDER] for name, q in rows])


def piml_table(rows) -> str:
    """ET and streamflow skill per model. ``rows``: iterable of (name, et_metrics, q_metrics)."""
    header = ["Model", "ET RMSE", "ET PBIAS", "ET NSE", "Q RMSE", "Q PBIAS", "Q NSE"]
    return _table(
        header,
        [[name] + [fmt(et[m]) for m in METRIC_ORDER] + [fmt(q[m]) for m in METRIC_ORDER] for name, et, q in rows],
    )


def ordered_kinds(kinds) -> list[str]:
    kinds = list(kinds)
    return sorted(kinds, key=lambda k: (ROW_ORDER.index(k) if k in ROW_ORDER else len(ROW_ORDER), k))


def render_markdown(report: dict) -> str:
    prov = report["provenance"]
    split = report["split"]
    cal = report["calibration"]
    p = cal["params"]
    kinds = ordered_kinds(report["piml"])
    parts = [
        "# abcd / PIML evaluation report\n",
        f"- artifact version: {prov['artifact_version']}",
        f"- config hash: {prov['config_hash']}",
        f"- forcing sha256: {prov['forcing_sha256']}",
        f"- random-free: {str(prov['random_free']).lower()}",
        f"- training: {split['train_start']}..{split['train_end']} (warm-up {split['warmup_months']} months)",
        f"- test: {split['test_start']}..{split['test_end']}",
        "",
        "## Calibrated abcd parameters\n",
        f"a = {p['a']:.6g}, b = {p['b']:.6g}, c = {p['c']:.6g}, d = {p['d']:.6g}; "
        f"training NSE {cal['train_nse']:.6f} ({cal['n_objective_evals']} evaluations, "
        f"converged: {str(cal['converged']).lower()})",
        "",
        "Standalone abcd, test period: "
        + ", ".join(f"{m.upper()} {fmt(report['abcd']['q'][m])}" for m in METRIC_ORDER),
        "",
        "## ML models (test period)\n",
        ml_table((DISPLAY_NAMES.get(k, k), report["ml"][k]["q"]) for k in kinds),
        "## PIML models (test period)\n",
        piml_table((DISPLAY_NAMES.get(k, k), report["piml"][k]["et"], report["piml"][k]["q"]) for k in kinds),
        "## Clipped negative predictions (test period)\n",
        _table(
            ["Model", "ML Q", "PIML ET", "PIML Q"],
            [
                [
                    DISPLAY_NAMES.get(k, k),
                    str(report["ml"][k]["clip_counts"]["q"]),
                    str(report["piml"][k]["clip_counts"]["et"]),
                    str(report["piml"][k]["clip_counts"]["q"]),
                ]
                for k in kinds
            ],
        ),
    ]
    return "\n".join(parts)


def dumps_json(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True, allow_nan=False) + "\n"


def predictions_csv(keys, observed, predicted) -> str:
    lines = ["date,observed,predicted"]
    lines += [f"{k},{float(o)!r},{float(p)!r}" for k, o, p in zip(keys, observed, predicted)]
    return "\n".join(lines) + "\n"


def provenance(config_hash: str, forcing_sha256: str) -> dict:
    return {
        "artifact_version": __version__,
        "config_hash": config_hash,
        "forcing_sha256": forcing_sha256,
        "random_free": True,
    }
