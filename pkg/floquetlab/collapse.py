"""Finite-size-scaling data collapse.

Points ``(p, L, y, sigma)`` are mapped to ``x = (p - p_c) L**(1/nu)`` and a
rescaled value ``Y`` according to the ansatz:

``plain``
    ``Y = y``
``power``
    ``Y = y L**(-eps)``
``one_plus_power``
    ``Y = (y - 1) L**(-eps)``

The quality of a collapse measures how far each point lies from a local fit
through the neighbouring points of the other sizes, in units of the combined
uncertainty. The best parameters minimize it.
"""
import itertools
import logging
import warnings
from dataclasses import dataclass
from typing import Dict, NamedTuple, Optional, Tuple

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from floquetlab.errors import CollapseWarning, FitError
from floquetlab.rng import as_generator

logger = logging.getLogger(__name__)

ANSATZE = ("plain", "power", "one_plus_power")
NU_RANGE = (0.5, 3.0)
EPSILON_RANGE = (-1.0, 1.0)
DEFAULT_BOOTSTRAP = 200


@dataclass(frozen=True)
class ScalingDataset:
    """Observations across sizes.

    Parameters
    ----------
    p, L, y, sigma : np.ndarray
        Control parameter, size, value and standard error per point.
    ansatz : str
        One of :data:`ANSATZE`.
    """

    p: np.ndarray
    L: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    ansatz: str = "plain"

    def __post_init__(self):
        for name in ("p", "L", "y", "sigma"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        shapes = {getattr(self, name).shape for name in ("p", "L", "y", "sigma")}
        if len(shapes) != 1 or self.p.ndim != 1:
            raise ValueError(f"p, L, y and sigma must be 1-d of equal length, got shapes {sorted(shapes)}")
        if self.ansatz not in ANSATZE:
            raise ValueError(f"unknown ansatz {self.ansatz!r}, expected one of {ANSATZE}")
        if (self.sigma <= 0).any():
            raise ValueError("all standard errors must be positive")
        if len(np.unique(self.L)) < 2:
            raise ValueError(f"a collapse needs at least two sizes, got {np.unique(self.L).tolist()}")

    @classmethod
    def from_frame(
        cls,
        frame: pd.DataFrame,
        p: str = "p",
        L: str = "L",
        y: str = "y",
        sigma: str = "sigma",
        ansatz: str = "plain",
        sigma_floor: float = 1e-6,
    ) -> "ScalingDataset":
        """Build from columns of ``frame``; errors below ``sigma_floor`` are raised to it."""
        missing = [c for c in (p, L, y, sigma) if c not in frame.columns]
        if missing:
            raise ValueError(f"columns {missing} not found in {list(frame.columns)}")
        errors = np.maximum(frame[sigma].to_numpy(dtype=float), sigma_floor)
        return cls(frame[p].to_numpy(), frame[L].to_numpy(), frame[y].to_numpy(), errors, ansatz)

    def __len__(self) -> int:
        return len(self.p)

    def subset(self, index: np.ndarray) -> "ScalingDataset":
        return ScalingDataset(self.p[index], self.L[index], self.y[index], self.sigma[index], self.ansatz)

    def transform(self, p_c: float, nu: float, epsilon: float = 0.0) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Scaled coordinates ``(x, Y, dY)`` under this dataset's ansatz."""
        x = (self.p - p_c) * self.L ** (1.0 / nu)
        if self.ansatz == "plain":
            return x, self.y, self.sigma
        scale = self.L ** (-epsilon)
        shifted = self.y if self.ansatz == "power" else self.y - 1.0
        return x, shifted * scale, self.sigma * scale


def _local_estimate(x0: float, xs: np.ndarray, ys: np.ndarray, dys: np.ndarray) -> Optional[Tuple[float, float]]:
    degree = 2 if len(xs) >= 3 else 1
    design = np.vander(xs - x0, degree + 1, increasing=True)
    weights = 1.0 / dys**2
    normal = design.T @ (design * weights[:, None])
    try:
        covariance = np.linalg.inv(normal)
    except np.linalg.LinAlgError:
        return None
    coefficients = covariance @ (design.T @ (weights * ys))
    return float(coefficients[0]), float(covariance[0, 0])


def collapse_quality(dataset: ScalingDataset, p_c: float, nu: float, epsilon: float = 0.0) -> float:
    """Mean squared deviation of points from the local master curve, in units of error.

    For every point, the points of each other size bracketing its ``x`` are
    fitted by weighted least squares (quadratic when three or more are
    available, linear otherwise). Points outside every other size's range are
    skipped; ``inf`` is returned if no point overlaps.
    """
    if nu <= 0:
        return float("inf")
    x, Y, dY = dataset.transform(p_c, nu, epsilon)
    sizes = np.unique(dataset.L)
    curves = {}
    for L in sizes:
        mask = dataset.L == L
        order = np.argsort(x[mask])
        curves[L] = (x[mask][order], Y[mask][order], dY[mask][order])

    total, count = 0.0, 0
    for i in range(len(x)):
        nx, ny, ndy = [], [], []
        for L in sizes:
            if L == dataset.L[i]:
                continue
            cx, cy, cdy = curves[L]
            k = np.searchsorted(cx, x[i])
            if k == 0 or k == len(cx):
                continue
            nx.extend(cx[k - 1 : k + 1])
            ny.extend(cy[k - 1 : k + 1])
            ndy.extend(cdy[k - 1 : k + 1])
        if len(nx) < 2:
            continue
        estimate = _local_estimate(x[i], np.array(nx), np.array(ny), np.array(ndy))
        if estimate is None:
            continue
        value, variance = estimate
        total += (Y[i] - value) ** 2 / (dY[i] ** 2 + max(variance, 0.0))
        count += 1
    return total / count if count else float("inf")


class CollapseResult(NamedTuple):
    """Best collapse parameters with bootstrap uncertainties."""

    p_c: float
    nu: float
    epsilon: float
    quality: float
    p_c_err: float
    nu_err: float
    epsilon_err: float
    ansatz: str
    bootstrap: int

    def to_dict(self) -> Dict:
        return {k: (float(v) if isinstance(v, (float, np.floating)) else v) for k, v in self._asdict().items()}


def _objective(dataset: ScalingDataset):
    if dataset.ansatz == "plain":
        return lambda params: collapse_quality(dataset, params[0], params[1])
    return lambda params: collapse_quality(dataset, params[0], params[1], params[2])


def _grid(dataset: ScalingDataset, points: int) -> np.ndarray:
    p_c = np.linspace(dataset.p.min(), dataset.p.max(), points)
    nu = np.linspace(*NU_RANGE, max(points // 2, 3))
    if dataset.ansatz == "plain":
        return np.array(list(itertools.product(p_c, nu)))
    epsilon = np.linspace(*EPSILON_RANGE, max(points // 2, 3))
    return np.array(list(itertools.product(p_c, nu, epsilon)))


def _refine(dataset: ScalingDataset, start: np.ndarray):
    return minimize(
        _objective(dataset),
        start,
        method="Nelder-Mead",
        options={"xatol": 1e-6, "fatol": 1e-10, "maxiter": 4000},
    )


def _fit(dataset: ScalingDataset, grid_points: int) -> Tuple[np.ndarray, float, bool]:
    objective = _objective(dataset)
    grid = _grid(dataset, grid_points)
    scores = np.array([objective(point) for point in grid])
    if not np.isfinite(scores).any():
        raise FitError("no parameter choice makes the curves of different sizes overlap")
    start = grid[int(np.argmin(scores))]
    logger.debug(f"coarse collapse optimum {start.tolist()} quality {scores.min():.4g}")
    result = _refine(dataset, start)
    return np.asarray(result.x), float(result.fun), bool(result.success)


def collapse(
    dataset: ScalingDataset,
    seed: int,
    bootstrap: int = DEFAULT_BOOTSTRAP,
    grid_points: int = 21,
) -> CollapseResult:
    """Find ``(p_c, nu[, epsilon])`` minimizing :func:`collapse_quality`.

    A coarse grid over ``p_c`` in the data range, ``nu`` in ``[0.5, 3]`` and
    ``epsilon`` in ``[-1, 1]`` seeds a Nelder-Mead refinement. Uncertainties
    are standard deviations over ``bootstrap`` refits on resampled points.

    Raises
    ------
    FitError
        If the curves of different sizes cannot be made to overlap.
    """
    best, quality, converged = _fit(dataset, grid_points)
    if not converged:
        warnings.warn("collapse optimizer did not converge", category=CollapseWarning)
    rng = as_generator(seed)
    samples = []
    dropped = 0
    for _ in range(bootstrap):
        index = np.unique(rng.integers(0, len(dataset), len(dataset)))
        try:
            resampled = dataset.subset(index)
        except ValueError:
            dropped += 1
            continue
        result = _refine(resampled, best)
        if not np.isfinite(result.fun):
            dropped += 1
            continue
        samples.append(result.x)
    if dropped:
        warnings.warn(f"{dropped} of {bootstrap} bootstrap resamples were dropped", category=CollapseWarning)
    spread = np.std(np.array(samples), axis=0) if len(samples) > 1 else np.full(len(best), np.nan)
    epsilon = float(best[2]) if len(best) > 2 else 0.0
    epsilon_err = float(spread[2]) if len(best) > 2 else 0.0
    logger.info(f"collapse ({dataset.ansatz}): p_c={best[0]:.4f} nu={best[1]:.4f} quality={quality:.4g}")
    return CollapseResult(
        float(best[0]),
        float(best[1]),
        epsilon,
        quality,
        float(spread[0]),
        float(spread[1]),
        epsilon_err,
        dataset.ansatz,
        len(samples),
    )


def collapsed_frame(dataset: ScalingDataset, result: CollapseResult) -> pd.DataFrame:
    """Scaled coordinates of every point for plotting the master curve."""
    x, Y, dY = dataset.transform(result.p_c, result.nu, result.epsilon)
    return pd.DataFrame({"L": dataset.L.astype(int), "p": dataset.p, "x": x, "y_scaled": Y, "sigma_scaled": dY})
