"""Regression stack: min-max scaling, ridge, LASSO, Gaussian process regression
and chronological grid search.

Every fitted model exposes ``predict(X) -> ndarray`` and ``to_dict()``; models
are rebuilt with :func:`model_from_dict`.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

FORMAT_VERSION = 1
KINDS = ("ridge", "lasso", "gpr")

DEFAULT_GRIDS = {
    "ridge": {"lam": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]},
    "lasso": {"lam": [1e-4, 1e-3, 1e-2, 1e-1, 1.0, 10.0, 100.0]},
    "gpr": {
        "length_scale": [0.1, 0.3, 1.0, 3.0],
        "sigma_f2": [0.5, 1.0, 2.0],
        "sigma_n2": [1e-4, 1e-2, 1e-1],
    },
}

GPR_MAX_SAMPLES = 5000
GPR_JITTER_START = 1e-10
GPR_JITTER_MAX = 1e-4


class SingularSystemError(np.linalg.LinAlgError):
    pass


def as_matrix(X) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
        raise ValueError(f"design matrix must be n x m with n, m >= 1, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("design matrix contains non-finite values")
    return X


def _target(y, n: int) -> np.ndarray:
    y = np.asarray(y, dtype=float).ravel()
    if y.shape != (n,):
        raise ValueError(f"target has {y.size} values for {n} rows")
    if not np.all(np.isfinite(y)):
        raise ValueError("target contains non-finite values")
    return y


# -- scaling ---------------------------------------------------------------


@dataclass(frozen=True)
class MinMaxScaler:
    data_min: np.ndarray
    data_max: np.ndarray

    @property
    def n_features(self) -> int:
        return len(self.data_min)

    def _check(self, X) -> np.ndarray:
        X = as_matrix(X)
        if X.shape[1] != self.n_features:
            raise ValueError(f"scaler fitted on {self.n_features} columns, got {X.shape[1]}")
        return X

    def transform(self, X) -> np.ndarray:
        X = self._check(X)
        span = self.data_max - self.data_min
        constant = span == 0
        out = (X - self.data_min) / np.where(constant, 1.0, span)
        out[:, constant] = 0.5
        return out

    def inverse_transform(self, X) -> np.ndarray:
        X = self._check(X)
        return X * (self.data_max - self.data_min) + self.data_min

    def to_dict(self) -> dict:
        return {"min": self.data_min.tolist(), "max": self.data_max.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "MinMaxScaler":
        return cls(np.array(data["min"], dtype=float), np.array(data["max"], dtype=float))


def scaler_fit(train) -> MinMaxScaler:
    X = as_matrix(train)
    return MinMaxScaler(X.min(axis=0), X.max(axis=0))


def scaler_apply(scaler: MinMaxScaler, X) -> np.ndarray:
    return scaler.transform(X)


def scaler_invert(scaler: MinMaxScaler, X) -> np.ndarray:
    return scaler.inverse_transform(X)


# -- linear models ---------------------------------------------------------


@dataclass(frozen=True)
class RidgeModel:
    intercept: float
    coef: np.ndarray
    lam: float

    kind = "ridge"

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        return X @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {"kind": self.kind, "lam": self.lam, "intercept": self.intercept, "coef": self.coef.tolist()}


@dataclass(frozen=True)
class LassoModel:
    intercept: float
    coef: np.ndarray
    lam: float
    n_iter: int
    converged: bool

    kind = "lasso"

    def predict(self, X) -> np.ndarray:
        X = as_matrix(X)
        return X @ self.coef + self.intercept

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "lam": self.lam,
            "intercept": self.intercept,
            "coef": self.coef.tolist(),
            "n_iter": self.n_iter,
            "converged": self.converged,
        }


def ridge_fit(X, y, lam: float) -> RidgeModel:
    """Minimise ||y - b0 - X b||^2 + lam ||b||^2; the intercept is not penalised."""
    X = as_matrix(X)
    y = _target(y, X.shape[0])
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    yc = y - y_mean
    m = X.shape[1]
    if lam == 0 and np.linalg.matrix_rank(Xc) < m:
        raise SingularSystemError("normal equations are singular (collinear or constant columns); use lambda > 0")
    A = Xc.T @ Xc + lam * np.eye(m)
    coef = np.linalg.solve(A, Xc.T @ yc)
    return RidgeModel(intercept=float(y_mean - x_mean @ coef), coef=coef, lam=float(lam))


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def lasso_fit(X, y, lam: float, tol: float = 1e-8, max_iter: int = 10000) -> LassoModel:
    """Cyclic coordinate descent on (1/2n)||y - b0 - X b||^2 + lam ||b||_1.

    Each coordinate update divides by that column's mean square, so columns
    need not be standardised beforehand.
    """
    X = as_matrix(X)
    n, m = X.shape
    y = _target(y, n)
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam}")
    x_mean = X.mean(axis=0)
    y_mean = y.mean()
    Xc = X - x_mean
    r = y - y_mean
    col_sq = np.einsum("ij,ij->j", Xc, Xc) / n
    coef = np.zeros(m)
    converged = False
    n_iter = 0
    while n_iter < max_iter:
        n_iter += 1
        max_change = 0.0
        for j in range(m):
            if col_sq[j] == 0.0:
                continue
            old = coef[j]
            rho = float(Xc[:, j] @ r) / n + col_sq[j] * old
            new = soft_threshold(rho, lam) / col_sq[j]
            if new != old:
                r -= Xc[:, j] * (new - old)
                coef[j] = new
                max_change = max(max_change, abs(new - old))
        if max_change < tol:
            converged = True
            break
    return LassoModel(
        intercept=float(y_mean - x_mean @ coef), coef=coef, lam=float(lam), n_iter=n_iter, converged=converged
    )


def lasso_kkt_residual(model: LassoModel, X, y) -> float:
    """Largest violation of the LASSO optimality conditions (0 at an exact optimum)."""
    X = as_matrix(X)
    y = _target(y, X.shape[0])
    n = X.shape[0]
    Xc = X - X.mean(axis=0)
    r = (y - y.mean()) - Xc @ model.coef
    grad = Xc.T @ r / n
    worst = 0.0
    for g, b in zip(grad, model.coef):
        if b == 0.0:
            worst = max(worst, abs(g) - model.lam)
        else:
            worst = max(worst, abs(g - model.lam * math.copysign(1.0, b)))
    return max(worst, 0.0)


# -- Gaussian process ------------------------------------------------------


def rbf_kernel(A, B, sigma_f2: float, length_scale: float) -> np.ndarray:
    A = as_matrix(A)
    B = as_matrix(B)
    sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return sigma_f2 * np.exp(-sq / (2.0 * length_scale**2))


@dataclass(frozen=True)
class GprModel:
    X: np.ndarray
    y: np.ndarray
    sigma_f2: float
    length_scale: float
    sigma_n2: float
    chol: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    jitter: float = 0.0

    kind = "gpr"

    def predict(self, X) -> np.ndarray:
        return gpr_predict(self, X)[0]

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "sigma_f2": self.sigma_f2,
            "length_scale": self.length_scale,
            "sigma_n2": self.sigma_n2,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
        }


def gpr_fit(X, y, sigma_f2: float, length_scale: float, sigma_n2: float, max_samples: int = GPR_MAX_SAMPLES) -> GprModel:
    """Zero-mean GP with a squared-exponential kernel.

    If K + sigma_n2 I is not numerically positive definite, diagonal jitter
    starting at 1e-10 is added and raised tenfold up to 1e-4.
    """
    X = as_matrix(X)
    n = X.shape[0]
    y = _target(y, n)
    if not sigma_f2 > 0 or not length_scale > 0 or not sigma_n2 >= 0:
        raise ValueError("need sigma_f2 > 0, length_scale > 0, sigma_n2 >= 0")
    if n > max_samples:
        raise ValueError(f"GPR is limited to {max_samples} training rows (cubic cost), got {n}")
    K = rbf_kernel(X, X, sigma_f2, length_scale)
    K[np.diag_indices(n)] += sigma_n2
    jitter = 0.0
    while True:
        try:
            L = np.linalg.cholesky(K + jitter * np.eye(n) if jitter else K)
            break
        except np.linalg.LinAlgError:
            jitter = GPR_JITTER_START if jitter == 0.0 else jitter * 10.0
            if jitter > GPR_JITTER_MAX * (1 + 1e-9):
                raise np.linalg.LinAlgError("kernel matrix is not positive definite even with maximum jitter")
    alpha = linalg.cho_solve((L, True), y)
    return GprModel(X.copy(), y.copy(), float(sigma_f2), float(length_scale), float(sigma_n2), L, alpha, jitter)


def gpr_predict(model: GprModel, X) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and variance (latent function, clamped at 0)."""
    X = as_matrix(X)
    if X.shape[1] != model.X.shape[1]:
        raise ValueError(f"model expects {model.X.shape[1]} columns, got {X.shape[1]}")
    Ks = rbf_kernel(model.X, X, model.sigma_f2, model.length_scale)
    mean = Ks.T @ model.alpha
    v = linalg.solve_triangular(model.chol, Ks, lower=True)
    var = model.sigma_f2 - np.einsum("ij,ij->j", v, v)
    return mean, np.maximum(var, 0.0)


# -- uniform fit contract --------------------------------------------------

_FITTERS = {"ridge": ridge_fit, "lasso": lasso_fit, "gpr": gpr_fit}


def fit_regressor(kind: str, X, y, **hyper):
    if kind not in _FITTERS:
        raise ValueError(f"unknown regressor kind {kind!r}; expected one of {KINDS}")
    return _FITTERS[kind](X, y, **hyper)


@dataclass(frozen=True)
class ScaledRegressor:
    """A regressor wrapped in min-max scaling of both features and target."""

    kind: str
    hyper: dict
    x_scaler: MinMaxScaler
    y_scaler: MinMaxScaler
    model: object

    @classmethod
    def fit(cls, kind: str, X, y, **hyper) -> "ScaledRegressor":
        X = as_matrix(X)
        y = _target(y, X.shape[0])
        xs = scaler_fit(X)
        ys = scaler_fit(y[:, None])
        model = fit_regressor(kind, xs.transform(X), ys.transform(y[:, None])[:, 0], **hyper)
        return cls(kind, dict(hyper), xs, ys, model)

    def predict(self, X) -> np.ndarray:
        z = self.model.predict(self.x_scaler.transform(X))
        return self.y_scaler.inverse_transform(z[:, None])[:, 0]

    def to_dict(self) -> dict:
        return {
            "format": "abcdpiml.scaled_regressor",
            "version": FORMAT_VERSION,
            "kind": self.kind,
            "hyper": dict(self.hyper),
            "x_scaler": self.x_scaler.to_dict(),
            "y_scaler": self.y_scaler.to_dict(),
            "model": model_to_dict(self.model),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScaledRegressor":
        _check_version(data, "abcdpiml.scaled_regressor")
        return cls(
            data["kind"],
            dict(data["hyper"]),
            MinMaxScaler.from_dict(data["x_scaler"]),
            MinMaxScaler.from_dict(data["y_scaler"]),
            model_from_dict(data["model"]),
        )


def _check_version(data: dict, fmt: str) -> None:
    if data.get("format") != fmt:
        raise ValueError(f"expected format {fmt!r}, got {data.get('format')!r}")
    if data.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported {fmt} version {data.get('version')!r}")


def model_to_dict(model) -> dict:
    return {"format": "abcdpiml.regressor", "version": FORMAT_VERSION, **model.to_dict()}


def model_from_dict(data: dict):
    _check_version(data, "abcdpiml.regressor")
    kind = data["kind"]
    if kind == "ridge":
        return RidgeModel(float(data["intercept"]), np.array(data["coef"], dtype=float), float(data["lam"]))
    if kind == "lasso":
        return LassoModel(
            float(data["intercept"]),
            np.array(data["coef"], dtype=float),
            float(data["lam"]),
            int(data["n_iter"]),
            bool(data["converged"]),
        )
    if kind == "gpr":
        return gpr_fit(
            np.array(data["X"], dtype=float),
            np.array(data["y"], dtype=float),
            float(data["sigma_f2"]),
            float(data["length_scale"]),
            float(data["sigma_n2"]),
        )
    raise ValueError(f"unknown regressor kind {kind!r}")


# -- grid search -----------------------------------------------------------


def chronological_folds(n: int, k_folds: int) -> list[tuple[range, range]]:
    """Expanding-window folds over ``k_folds + 1`` contiguous blocks.

    Fold i trains on every row before block i+1 and validates on block i+1,
    so no training row ever postdates its validation block.
    """
    if k_folds < 2:
        raise ValueError("k_folds must be >= 2")
    block = n // (k_folds + 1)
    if block < 2:
        raise ValueError(f"{n} rows are too few for {k_folds} chronological folds")
    folds = []
    for i in range(k_folds):
        val_start = n - (k_folds - i) * block
        folds.append((range(0, val_start), range(val_start, val_start + block)))
    return folds


@dataclass(frozen=True)
class GridSearchResult:
    best: dict
    best_score: float
    table: list = field(default_factory=list)
    folds: list = field(default_factory=list)


def grid_points(grid: dict) -> list[dict]:
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def grid_search(fit_spec, grid: dict, X, y, k_folds: int = 5) -> GridSearchResult:
    """Select hyperparameters by mean validation RMSE over chronological folds.

    ``fit_spec(X, y, **hyper)`` must return an object with ``predict``.
    Ties go to the earliest grid point (``itertools.product`` order).
    """
    X = as_matrix(X)
    y = _target(y, X.shape[0])
    folds = chronological_folds(X.shape[0], k_folds)
    points = grid_points(grid)
    if not points:
        raise ValueError("empty hyperparameter grid")
    table = []
    best_idx = None
    for idx, hyper in enumerate(points):
        scores = []
        for train, val in folds:
            tr = np.asarray(train)
            va = np.asarray(val)
            try:
                model = fit_spec(X[tr], y[tr], **hyper)
            except np.linalg.LinAlgError:
                # Unfittable cell (singular system); it can never be selected.
                scores.append(math.nan)
                continue
            resid = model.predict(X[va]) - y[va]
            scores.append(float(np.sqrt(np.mean(resid**2))))
        mean_rmse = float(np.mean(scores))
        table.append({"params": dict(hyper), "mean_rmse": mean_rmse, "fold_rmse": scores})
        if best_idx is None or _lt(mean_rmse, table[best_idx]["mean_rmse"]):
            best_idx = idx
    if math.isnan(table[best_idx]["mean_rmse"]):
        raise np.linalg.LinAlgError("no grid point could be fitted on every fold")
    return GridSearchResult(
        best=dict(points[best_idx]),
        best_score=table[best_idx]["mean_rmse"],
        table=table,
        folds=[(f[0].start, f[0].stop, f[1].start, f[1].stop) for f in folds],
    )


def _lt(a: float, b: float) -> bool:
    # NaN scores never win.
    if math.isnan(a):
        return False
    return math.isnan(b) or a < b


def scaled_fit_spec(kind: str):
    def fit(X, y, **hyper):
        return ScaledRegressor.fit(kind, X, y, **hyper)

    return fit
