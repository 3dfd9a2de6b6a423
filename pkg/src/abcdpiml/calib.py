"""Calibration of abcd parameters against observed streamflow.

Deterministic: a Cartesian seed grid is scored exhaustively, then the best
few seeds are refined with a bound-clipped Nelder-Mead simplex that
maximises NSE after a warm-up window.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import metrics
from .abcd import AbcdParams, AbcdState, simulate_arrays
from .timeseries import Forcing

PARAM_NAMES = ("a", "b", "c", "d")
# Parameters sampled on a log axis in the seed grid and in the simplex space.
LOG_PARAMS = frozenset({"b"})

MIN_CALIBRATION_MONTHS = 48
N_REFINED_SEEDS = 5
# NSE is nearly flat in `a` around the optimum (a shift of 0.02 costs ~1e-7),
# so the refinement needs a much tighter score spread than the simplex default.
REFINE_TOL = 1e-12


@dataclass(frozen=True)
class ParamBounds:
    a: tuple[float, float] = (0.1, 1.0)
    b: tuple[float, float] = (1.0, 1000.0)
    c: tuple[float, float] = (0.0, 1.0)
    d: tuple[float, float] = (0.01, 10.0)

    def __post_init__(self):
        for name in PARAM_NAMES:
            lo, hi = getattr(self, name)
            if not lo < hi:
                raise ValueError(f"bounds for {name} must satisfy lower < upper, got ({lo}, {hi})")
            if name in LOG_PARAMS and lo <= 0:
                raise ValueError(f"lower bound for {name} must be positive (log-scaled)")
        # Reject bounds that admit invalid parameter sets.
        AbcdParams(self.a[0], self.b[0], self.c[0], self.d[0])
        AbcdParams(self.a[1], self.b[1], self.c[1], self.d[1])

    @property
    def lower(self) -> np.ndarray:
        return np.array([getattr(self, n)[0] for n in PARAM_NAMES], dtype=float)

    @property
    def upper(self) -> np.ndarray:
        return np.array([getattr(self, n)[1] for n in PARAM_NAMES], dtype=float)

    def contains(self, params: AbcdParams) -> bool:
        return all(getattr(self, n)[0] <= v <= getattr(self, n)[1] for n, v in zip(PARAM_NAMES, params.as_tuple()))

    def axis(self, name: str, u: float) -> float:
        """Map a unit coordinate to a parameter value."""
        lo, hi = getattr(self, name)
        if u <= 0.0:
            return lo
        if u >= 1.0:
            return hi
        if name in LOG_PARAMS:
            return math.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))
        return lo + u * (hi - lo)

    def from_unit(self, u) -> AbcdParams:
        return AbcdParams(*(self.axis(n, float(ui)) for n, ui in zip(PARAM_NAMES, u)))

    def to_unit(self, params: AbcdParams) -> np.ndarray:
        out = []
        for n, v in zip(PARAM_NAMES, params.as_tuple()):
            lo, hi = getattr(self, n)
            if n in LOG_PARAMS:
                out.append((math.log(v) - math.log(lo)) / (math.log(hi) - math.log(lo)))
            else:
                out.append((v - lo) / (hi - lo))
        return np.clip(np.array(out), 0.0, 1.0)


@dataclass(frozen=True)
class CalibrationResult:
    params: AbcdParams
    train_nse: float
    n_objective_evals: int
    warmup_months: int
    converged: bool

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "train_nse": self.train_nse,
            "n_objective_evals": self.n_objective_evals,
            "warmup_months": self.warmup_months,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CalibrationResult":
        return cls(
            params=AbcdParams(**{n: float(data["params"][n]) for n in PARAM_NAMES}),
            train_nse=float(data["train_nse"]),
            n_objective_evals=int(data["n_objective_evals"]),
            warmup_months=int(data["warmup_months"]),
            converged=bool(data["converged"]),
        )


def _observed_after_warmup(observed_q, n: int, warmup_months: int) -> np.ndarray:
    obs = np.array([np.nan if v is None else v for v in observed_q], dtype=float)
    if obs.shape != (n,):
        raise ValueError(f"observed streamflow has length {len(obs)}, forcing has {n}")
    if not 0 <= warmup_months < n:
        raise ValueError(f"forcing length {n} must exceed the warm-up of {warmup_months} months")
    tail = obs[warmup_months:]
    if not np.all(np.isfinite(tail)):
        raise ValueError("observed streamflow is missing after the warm-up window")
    if len(tail) < 2:
        raise ValueError("insufficient months after warm-up")
    return tail


def objective(
    params: AbcdParams,
    forcing: Forcing,
    observed_q,
    warmup_months: int,
    init: AbcdState | None = None,
) -> float:
    """NSE of simulated streamflow against observations, warm-up excluded."""
    obs = _observed_after_warmup(observed_q, len(forcing), warmup_months)
    traj = simulate_arrays(params, init or AbcdState(), forcing.p_mm, forcing.pet_mm)
    return metrics.nse(obs, traj["q"][warmup_months:])


def grid_seed(bounds: ParamBounds, points_per_axis: int) -> list[AbcdParams]:
    """Full Cartesian grid in lexicographic (a, b, c, d) order."""
    return [bounds.from_unit(u) for u in _grid_units(points_per_axis)]


def _grid_units(points_per_axis: int) -> list[tuple[float, ...]]:
    if points_per_axis < 2:
        raise ValueError("points_per_axis must be >= 2")
    units = [i / (points_per_axis - 1) for i in range(points_per_axis)]
    return list(itertools.product(units, repeat=len(PARAM_NAMES)))


@dataclass
class SimplexResult:
    x: np.ndarray
    score: float
    converged: bool
    iterations: int
    evaluations: int = 0


def nelder_mead(
    f,
    start,
    lower,
    upper,
    tol: float = 1e-6,
    max_iter: int = 2000,
    initial_step: float = 0.05,
) -> SimplexResult:
    """Maximise ``f`` with a Nelder-Mead simplex, clipping trial points to bounds.

    Coefficients: reflection 1, expansion 2, contraction 0.5, shrink 0.5.
    Converged when the spread of scores across the simplex falls below ``tol``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    x0 = np.asarray(start, dtype=float)
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("start point lies outside the bounds")
    n = len(x0)
    n_evals = 0

    def score(x):
        nonlocal n_evals
        n_evals += 1
        value = float(f(x))
        # Minimise the negated score; NaN is treated as the worst possible.
        return math.inf if math.isnan(value) else -value

    simplex = [x0.copy()]
    for i in range(n):
        step = initial_step * (upper[i] - lower[i])
        x = x0.copy()
        x[i] = x0[i] + step if x0[i] + step <= upper[i] else x0[i] - step
        simplex.append(np.clip(x, lower, upper))
    values = [score(x) for x in simplex]

    iterations = 0
    converged = False
    while True:
        order = sorted(range(n + 1), key=lambda k: values[k])
        simplex = [simplex[k] for k in order]
        values = [values[k] for k in order]
        if values[-1] - values[0] < tol:
            converged = True
            break
        if iterations >= max_iter:
            break
        iterations += 1

        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = np.clip(centroid + (centroid - worst), lower, upper)
        fr = score(xr)
        if fr < values[0]:
            xe = np.clip(centroid + 2.0 * (xr - centroid), lower, upper)
            fe = score(xe)
            if fe < fr:
                simplex[-1], values[-1] = xe, fe
            else:
                simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
            continue
        if fr < values[-1]:
            xc = np.clip(centroid + 0.5 * (xr - centroid), lower, upper)
            fc = score(xc)
            if fc <= fr:
                simplex[-1], values[-1] = xc, fc
                continue
        else:
            xc = np.clip(centroid + 0.5 * (worst - centroid), lower, upper)
            fc = score(xc)
            if fc < values[-1]:
                simplex[-1], values[-1] = xc, fc
                continue
        best = simplex[0]
        for k in range(1, n + 1):
            simplex[k] = best + 0.5 * (simplex[k] - best)
            values[k] = score(simplex[k])

    return SimplexResult(
        x=simplex[0].copy(), score=-values[0], converged=converged, iterations=iterations, evaluations=n_evals
    )


def calibrate(
    forcing: Forcing,
    observed_q,
    bounds: ParamBounds | None = None,
    warmup_months: int = 24,
    points_per_axis: int = 5,
    init: AbcdState | None = None,
    tol: float = REFINE_TOL,
    max_iter: int = 2000,
) -> CalibrationResult:
    bounds = bounds or ParamBounds()
    init = init or AbcdState()
    n = len(forcing)
    if n < MIN_CALIBRATION_MONTHS:
        raise ValueError(f"calibration needs at least {MIN_CALIBRATION_MONTHS} months, got {n}")
    obs = _observed_after_warmup(observed_q, n, warmup_months)
    if float(np.ptp(obs)) == 0.0:
        raise metrics.UndefinedMetricError("observed streamflow is constant; NSE is undefined")
    p, pet = forcing.p_mm, forcing.pet_mm

    def score(params: AbcdParams) -> float:
        q = simulate_arrays(params, init, p, pet)["q"][warmup_months:]
        return metrics.nse(obs, q)

    units = _grid_units(points_per_axis)
    seeds = [bounds.from_unit(u) for u in units]
    seed_scores = [score(s) for s in seeds]
    n_evals = len(seeds)

    ranked = sorted(range(len(seeds)), key=lambda i: (-_finite(seed_scores[i]), i))
    chosen = []
    for i in ranked:
        if all(seeds[i] != seeds[j] for j in chosen):
            chosen.append(i)
        if len(chosen) == N_REFINED_SEEDS:
            break

    best = None
    for i in sorted(chosen, key=lambda j: (-_finite(seed_scores[j]), j)):
        res = nelder_mead(
            lambda u: score(bounds.from_unit(u)),
            np.array(units[i]),
            np.zeros(4),
            np.ones(4),
            tol=tol,
            max_iter=max_iter,
        )
        n_evals += res.evaluations
        candidate = (res.score, i, res)
        if best is None or (candidate[0], -candidate[1]) > (best[0], -best[1]):
            best = candidate

    res = best[2]
    return CalibrationResult(
        params=bounds.from_unit(res.x),
        train_nse=float(res.score),
        n_objective_evals=n_evals,
        warmup_months=warmup_months,
        converged=res.converged,
    )


def _finite(x: float) -> float:
    return x if math.isfinite(x) else -math.inf
