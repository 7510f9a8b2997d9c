"""Parameter sweeps, log-log fits, regime tagging and exponent extraction.

Regimes are defined on the indicator Nδ: ``small_size`` for Nδ <= 0.3,
``large_size`` for Nδ >= 3 and ``crossover`` in between. Slopes are only
asserted on the first two.
"""
from __future__ import annotations

import math
import os
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from . import itf, xxz
from .errors import (DomainError, InsufficientPointsError, NonPositiveTransformError,
                     RegimeNotSpannedError)

MODELS = ("itf", "xxz")
SMALL_SIZE_MAX = 0.3
LARGE_SIZE_MIN = 3.0
REGIMES = ("small_size", "large_size", "crossover")
MIN_FIT_POINTS = 4
LOCAL_SLOPE_WINDOW = 5
ANOMALY_TOLERANCE = 0.05
CROSSOVER_BOUNDS = (0.1, 10.0)
THREADS_ENV = "QRG_FIDELITY_THREADS"

# −ln f below this means f >= 1 − 1e−15
_MIN_NEG_LOG_F = -math.log1p(-1e-15)


def regime_of(n_delta: float) -> str:
    if n_delta <= SMALL_SIZE_MAX:
        return "small_size"
    if n_delta >= LARGE_SIZE_MIN:
        return "large_size"
    return "crossover"


def in_regime(n_delta: float, regime: str | None) -> bool:
    if regime is None:
        return True
    if regime not in REGIMES:
        raise ValueError(f"unknown regime {regime!r}; expected one of {REGIMES}")
    return regime_of(n_delta) == regime


def geometric_grid(start: float, stop: float, per_decade: int = 20) -> list[float]:
    """Points ``start·10^(i/per_decade)`` up to and including ``stop``."""
    if not (0 < start <= stop):
        raise ValueError(f"geometric grid needs 0 < start <= stop, got {start!r}, {stop!r}")
    count = int(round(per_decade * math.log10(stop / start))) + 1
    return [float(v) for v in np.geomspace(start, stop, count)]


# -- sweeps ------------------------------------------------------------------

@dataclass(frozen=True)
class SweepGrid:
    """Grid over (coupling, δ, N).

    With ``k`` unset each point compares ``x ± δ``. With ``k`` set the pair
    is ``(x − (k+1)δ, x − kδ)``; ``side=+1`` mirrors it to
    ``(x + kδ, x + (k+1)δ)`` for the paramagnetic branch.
    """

    model: str
    couplings: tuple[float, ...]
    deltas: tuple[float, ...]
    sizes: tuple[int, ...]
    k: int | None = None
    side: int = -1
    chi: bool = False
    chi_mode: str = "fd-calibrated"
    J: float = 1.0

    def __post_init__(self):
        if self.model not in MODELS:
            raise ValueError(f"unknown model {self.model!r}; expected one of {MODELS}")
        for name in ("couplings", "deltas", "sizes"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "couplings", tuple(float(c) for c in self.couplings))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        if self.k is not None and (isinstance(self.k, bool) or int(self.k) != self.k or self.k < 0):
            raise ValueError(f"offset index k must be a non-negative integer, got {self.k!r}")
        if self.side not in (-1, 1):
            raise ValueError(f"side must be -1 or +1, got {self.side!r}")
        if self.chi_mode not in itf.CHI_MODES:
            raise ValueError(f"unknown chi mode {self.chi_mode!r}; expected one of {itf.CHI_MODES}")
        for n in self.sizes:
            if self.model == "itf":
                itf.ell_from_sites(n)
            else:
                xxz._check_sites(n)

    @property
    def is_empty(self) -> bool:
        return not (self.couplings and self.deltas and self.sizes)

    def points(self) -> list[tuple[float, float, int]]:
        return [(c, d, n) for c in self.couplings for d in self.deltas for n in self.sizes]

    def pair(self, coupling: float, delta: float) -> tuple[float, float] | None:
        """The compared couplings, or None for the symmetric ``x ± δ`` scheme."""
        if self.k is None:
            return None
        near = coupling + self.side * self.k * delta
        far = coupling + self.side * (self.k + 1) * delta
        return (far, near) if self.side < 0 else (near, far)


@dataclass(frozen=True)
class SweepRow:
    model: str
    coupling: float
    delta: float
    n_sites: int
    n_delta: float
    log_f: float | None
    f: float | None
    chi: float | None = None
    error: str | None = None

    @property
    def regime(self) -> str:
        return regime_of(self.n_delta)


def _evaluate(grid: SweepGrid, point: tuple[float, float, int]) -> SweepRow:
    c, d, n = point
    n_delta = n * abs(d)
    try:
        pair = grid.pair(c, d)
        if grid.model == "itf":
            ell = itf.ell_from_sites(n)
            res = (itf.itf_fidelity(c, d, ell, grid.J) if pair is None
                   else itf.itf_pair_fidelity(pair[0], pair[1], ell, grid.J))
            chi = itf.itf_susceptibility(c, ell, grid.chi_mode).chi if grid.chi else None
        else:
            res = (xxz.xxz_fidelity(c, d, n) if pair is None
                   else xxz.xxz_pair_fidelity(pair[0], pair[1], n))
            chi = None
            if grid.chi:
                value = xxz.xxz_susceptibility(c, n)
                chi = value.value if isinstance(value, xxz.Divergence) else value
    except DomainError as exc:
        return SweepRow(grid.model, c, d, n, n_delta, None, None, None, str(exc))
    return SweepRow(grid.model, c, d, n, n_delta, res.log_f, res.f, chi)


def thread_count(default: int | None = None) -> int | None:
    """Worker cap from ``QRG_FIDELITY_THREADS``; None leaves it to the executor."""
    raw = os.environ.get(THREADS_ENV)
    if raw is None or raw.strip() == "":
        return default
    value = int(raw)
    if value < 1:
        raise ValueError(f"{THREADS_ENV} must be a positive integer, got {raw!r}")
    return value


def sweep_fidelity(grid: SweepGrid, threads: int | None = None) -> list[SweepRow]:
    """Evaluate every grid point; rows in lexicographic (coupling, δ, N) order.

    Domain violations become rows with ``error`` set. The result does not
    depend on the number of worker threads.
    """
    points = grid.points()
    workers = threads if threads is not None else thread_count()
    if workers == 1 or len(points) < 2:
        return [_evaluate(grid, p) for p in points]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda p: _evaluate(grid, p), points))


# -- fits ----------------------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    """OLS fit of ln y on ln x.

    ``residual`` is the coefficient of determination R² and ``stderr`` the
    standard error of the slope (0 for exact data or when only the minimum
    number of dof is available).
    """

    slope: float
    intercept: float
    residual: float
    window: tuple[float, float]
    regime: str | None
    n_points: int
    stderr: float = 0.0

    def predict(self, x: float) -> float:
        return math.exp(self.intercept) * x ** self.slope

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept, "residual": self.residual,
                "window": list(self.window), "regime": self.regime,
                "n_points": self.n_points, "stderr": self.stderr}


def _ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float, float]:
    n = len(x)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    if sxx == 0:
        raise InsufficientPointsError("abscissa values are all identical")
    slope = float(((x - xm) * (y - ym)).sum()) / sxx
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ss_res = float((resid ** 2).sum())
    ss_tot = float(((y - ym) ** 2).sum())
    r2 = 1.0 if ss_tot == 0 else 1.0 - ss_res / ss_tot
    stderr = math.sqrt(ss_res / (n - 2) / sxx) if n > 2 else 0.0
    return slope, intercept, r2, stderr


def fit_loglog(xs: Sequence[float], ys: Sequence[float],
               window: tuple[float, float] | None = None,
               regime: str | None = None) -> FitResult:
    """Least-squares fit of ``ln y = intercept + slope·ln x``.

    ``window`` keeps points with ``window[0] <= x <= window[1]``.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys must have the same length")
    if window is not None:
        keep = (x >= window[0]) & (x <= window[1])
        x, y = x[keep], y[keep]
    if len(x) < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"fit needs at least {MIN_FIT_POINTS} points in the window, got {len(x)}")
    if not (np.all(x > 0) and np.all(y > 0)):
        raise NonPositiveTransformError("log-log fit requires strictly positive data")
    slope, intercept, r2, stderr = _ols(np.log(x), np.log(y))
    return FitResult(slope=slope, intercept=intercept, residual=r2,
                     window=(float(x.min()), float(x.max())), regime=regime,
                     n_points=len(x), stderr=stderr)


def neg_log_fidelity(log_f: Iterable[float]) -> np.ndarray:
    """``−ln f``, refusing points with f >= 1 − 1e−15 where the outer log is undefined."""
    y = -np.asarray(list(log_f), dtype=float)
    if np.any(~(y > _MIN_NEG_LOG_F)):
        raise NonPositiveTransformError("ln(−ln f) is undefined for f >= 1 - 1e-15")
    return y


def fit_fidelity_scaling(xs: Sequence[float], log_f: Sequence[float],
                         n_delta: Sequence[float], regime: str | None) -> FitResult:
    """Slope of ln(−ln f) against ln x on the points of one regime."""
    keep = [i for i, nd in enumerate(n_delta) if in_regime(nd, regime)]
    if len(keep) < MIN_FIT_POINTS:
        raise InsufficientPointsError(
            f"regime {regime!r} has {len(keep)} points, need {MIN_FIT_POINTS}")
    x = [xs[i] for i in keep]
    y = neg_log_fidelity(log_f[i] for i in keep)
    return fit_loglog(x, y, regime=regime)


def fit_rows(rows: Sequence[SweepRow], axis: str, regime: str | None) -> FitResult:
    """Fidelity scaling fit on sweep rows along ``axis`` ∈ {"delta", "N"}."""
    good = [r for r in rows if r.error is None]
    if axis == "delta":
        xs = [abs(r.delta) for r in good]
    elif axis == "N":
        xs = [float(r.n_sites) for r in good]
    else:
        raise ValueError(f"axis must be 'delta' or 'N', got {axis!r}")
    return fit_fidelity_scaling(xs, [r.log_f for r in good], [r.n_delta for r in good], regime)


def local_slopes(xs: Sequence[float], ys: Sequence[float],
                 window: int = LOCAL_SLOPE_WINDOW) -> list[tuple[float, float]]:
    """Centered log-log slopes ``(x, slope)`` over ``window`` consecutive points."""
    if window < 3 or window % 2 == 0:
        raise ValueError(f"window must be odd and >= 3, got {window}")
    x = np.log(np.asarray(xs, dtype=float))
    y = np.log(np.asarray(ys, dtype=float))
    half = window // 2
    out = []
    for i in range(half, len(x) - half):
        sl = slice(i - half, i + half + 1)
        out.append((float(xs[i]), _ols(x[sl], y[sl])[0]))
    return out


# -- crossover and anomaly detection -----------------------------------------

@dataclass(frozen=True)
class CrossoverEstimate:
    """Break point of a two-segment fit, with the segment slopes."""

    n_delta: float
    slope_left: float
    slope_right: float
    sse: float
    kind: str

    @property
    def within_bounds(self) -> bool:
        lo, hi = CROSSOVER_BOUNDS
        return lo <= self.n_delta <= hi

    def to_dict(self) -> dict:
        return {"n_delta": self.n_delta, "slope_left": self.slope_left,
                "slope_right": self.slope_right, "sse": self.sse, "kind": self.kind,
                "within_bounds": self.within_bounds}


def _hinge_sse(x, y, b):
    design = np.stack([np.ones_like(x), np.minimum(x - b, 0.0), np.maximum(x - b, 0.0)], axis=1)
    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
    return float(((design @ coef - y) ** 2).sum()), coef


def _step_sse(x, y, b):
    left, right = y[x < b], y[x >= b]
    if len(left) == 0 or len(right) == 0:
        return math.inf, (math.nan, math.nan)
    sse = float(((left - left.mean()) ** 2).sum() + ((right - right.mean()) ** 2).sum())
    return sse, (float(left.mean()), float(right.mean()))


def detect_crossover(n_delta: Sequence[float], values: Sequence[float],
                     kind: str = "curve") -> CrossoverEstimate:
    """Locate the small-to-large-size crossover.

    ``kind="curve"``: ``values`` are ``−ln f`` (or any power-law-like
    observable); a continuous two-segment line is fitted to ln(values) vs
    ln(Nδ) and the break point returned.
    ``kind="slope"``: ``values`` are local slopes; a two-level step is fitted.
    """
    nd = np.asarray(n_delta, dtype=float)
    v = np.asarray(values, dtype=float)
    order = np.argsort(nd)
    nd, v = nd[order], v[order]
    if len(nd) < 2 * MIN_FIT_POINTS - 2 or nd[0] > SMALL_SIZE_MAX or nd[-1] < LARGE_SIZE_MIN:
        raise RegimeNotSpannedError(
            f"series must reach Nd <= {SMALL_SIZE_MAX} and Nd >= {LARGE_SIZE_MIN} "
            f"with enough points; got range [{nd[0]:.3g}, {nd[-1]:.3g}] ({len(nd)} points)")
    x = np.log(nd)
    if kind == "curve":
        if np.any(v <= 0):
            raise NonPositiveTransformError("curve crossover needs positive values")
        y, sse_fn = np.log(v), _hinge_sse
    elif kind == "slope":
        y, sse_fn = v, _step_sse
    else:
        raise ValueError(f"kind must be 'curve' or 'slope', got {kind!r}")
    scan = np.linspace(x[1], x[-2], 400)
    costs = [sse_fn(x, y, b)[0] for b in scan]
    i = int(np.argmin(costs))
    lo, hi = scan[max(i - 1, 0)], scan[min(i + 1, len(scan) - 1)]
    best = minimize_scalar(lambda b: sse_fn(x, y, b)[0], bounds=(lo, hi), method="bounded",
                           options={"xatol": 1e-10})
    b = float(best.x) if best.fun <= costs[i] else float(scan[i])
    sse, coef = sse_fn(x, y, b)
    if kind == "curve":
        left, right = float(coef[1]), float(coef[2])
    else:
        left, right = coef
    return CrossoverEstimate(n_delta=math.exp(b), slope_left=left, slope_right=right,
                             sse=sse, kind=kind)


def flag_anomalous(fits: dict, tolerance: float = ANOMALY_TOLERANCE) -> set:
    """Keys whose slope differs from the family median by more than ``tolerance``."""
    if len(fits) < 3:
        raise InsufficientPointsError("anomaly detection needs at least three curves")
    median = statistics.median(f.slope for f in fits.values())
    return {key for key, f in fits.items() if abs(f.slope - median) > tolerance}


# -- exponents ---------------------------------------------------------------

@dataclass(frozen=True)
class NuEstimate:
    nu: float
    stderr: float
    fit: FitResult
    dimension: int = 1

    def to_dict(self) -> dict:
        return {"nu": self.nu, "stderr": self.stderr, "dimension": self.dimension,
                "fit": self.fit.to_dict()}


def extract_nu(sizes: Sequence[float], chis: Sequence[float], dimension: int = 1) -> NuEstimate:
    """ν = 2/(d·slope) from χ(g_c) ∝ N^slope; stderr propagated from the slope."""
    n = np.asarray(sizes, dtype=float)
    if len(n) < 5 or n.min() <= 0 or math.log10(n.max() / n.min()) < 2:
        raise InsufficientPointsError("nu extraction needs >= 5 sizes spanning >= 2 decades")
    fit = fit_loglog(n, chis)
    nu = 2.0 / (dimension * fit.slope)
    return NuEstimate(nu=nu, stderr=abs(nu / fit.slope) * fit.stderr, fit=fit,
                      dimension=dimension)


# -- standard scan grids ---------------------------------------------------

DELTA_SCAN_N = 32768
DELTA_SCAN_RANGE = (1e-8, 1e-3)
SIZE_SCAN_DELTA = 1e-3
SIZE_SCAN_ELLS = tuple(range(1, 21))
XXZ_CHI_ANISOTROPIES = (-0.9, -0.6, -0.3, 0.0, 0.3, 0.6, 0.9)


def field_scan_grids() -> dict[str, SweepGrid]:
    """Small-size (Nδ ≈ 0.1) and large-size (Nδ ≈ 41) f-vs-g panels."""
    return {
        "small_size": SweepGrid("itf", np.linspace(0.5, 1.5, 101).tolist(), [1e-4], [2 ** 10]),
        "large_size": SweepGrid("itf", np.linspace(0.9, 1.1, 201).tolist(), [1e-2], [2 ** 12]),
    }


def delta_scan_grid(k: int, n_sites: int = DELTA_SCAN_N, per_decade: int = 20, side: int = -1) -> SweepGrid:
    return SweepGrid("itf", [1.0], geometric_grid(*DELTA_SCAN_RANGE, per_decade), [n_sites],
                     k=k, side=side)


def size_scan_grid(k: int, delta: float = SIZE_SCAN_DELTA, side: int = -1) -> SweepGrid:
    return SweepGrid("itf", [1.0], [delta], [2 ** (e + 1) for e in SIZE_SCAN_ELLS], k=k, side=side)


def xxz_chi_grid(sizes: Sequence[int] = (10, 20, 50, 100, 200, 500, 1000),
              anisotropies: Sequence[float] = XXZ_CHI_ANISOTROPIES) -> SweepGrid:
    return SweepGrid("xxz", anisotropies, [0.0], sizes, chi=True)


@dataclass(frozen=True)
class FamilyAnalysis:
    """Per-k regime fits of one family of offset curves and the curves flagged anomalous."""

    axis: str
    fits: dict = field(default_factory=dict)
    anomalous: frozenset = frozenset()

    def slope(self, key, regime: str) -> float:
        return self.fits[key][regime].slope


def analyze_family(curves: dict, axis: str,
                   regimes: Sequence[str] = ("small_size", "large_size"),
                   anomaly_regime: str = "large_size") -> FamilyAnalysis:
    """Fit every curve (key → rows) per regime and flag outliers in ``anomaly_regime``."""
    fits = {key: {reg: fit_rows(rows, axis, reg) for reg in regimes}
            for key, rows in curves.items()}
    anomalous = frozenset()
    if anomaly_regime in regimes and len(fits) >= 3:
        anomalous = frozenset(flag_anomalous({k: v[anomaly_regime] for k, v in fits.items()}))
    return FamilyAnalysis(axis=axis, fits=fits, anomalous=anomalous)


def itf_chi_series(ells: Iterable[int], g: float = 1.0,
                   mode: str = "fd-calibrated") -> list[tuple[int, float]]:
    return [(itf.sites_from_ell(e), itf.itf_susceptibility(g, e, mode).chi) for e in ells]
