"""Observables, statistics, log fits and finite-size scaling collapse.

Entropies are counted in bits, so every logarithm in the fit forms is base 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

# ---------------------------------------------------------------------------
# S_topo


def topo_regions(n: int) -> tuple[list[int], list[int], list[int], list[int]]:
    """Quarters of the chain as (A, B, C, D).

    A and C are the two end quarters, B and D the inner ones (order along the
    chain: A, B, D, C). With this assignment the boundary terms cancel for
    any short-range state and the cluster state gives exactly 2.
    """
    if n % 4:
        raise ValueError("chain length must be divisible by 4")
    q = n // 4
    quarters = [list(range(1 + j * q, 1 + (j + 1) * q)) for j in range(4)]
    return quarters[0], quarters[1], quarters[3], quarters[2]


def s_topo(s_ab, s_bc, s_b, s_abc):
    return s_ab + s_bc - s_b - s_abc


# ---------------------------------------------------------------------------
# aggregation


@dataclass(frozen=True)
class Stat:
    mean: float
    stderr: float
    count: int


def summarize(values) -> Stat:
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        raise ValueError("no samples")
    if v.size == 1:
        return Stat(float(v[0]), 0.0, 1)
    return Stat(float(v.mean()), float(v.std(ddof=1) / np.sqrt(v.size)), int(v.size))


def aggregate(records: Iterable) -> dict[tuple[str, int], Stat]:
    """Per (observable, t) statistics over trajectories of one configuration.

    Records are reduced in trajectory-index order, so arrival order does not
    change a single bit of the output.
    """
    records = sorted(records, key=lambda r: r.trajectory)
    if not records:
        return {}
    hashes = {r.config_hash for r in records}
    if len(hashes) > 1:
        raise ValueError(f"records from {len(hashes)} different configurations")
    idx = [r.trajectory for r in records]
    if len(set(idx)) != len(idx):
        raise ValueError("duplicate trajectory index")
    cols: dict[tuple[str, int], list] = {}
    for r in records:
        for t, name, v in r.rows:
            cols.setdefault((name, int(t)), []).append(v)
    return {k: summarize(cols[k]) for k in sorted(cols, key=lambda k: (k[0], k[1]))}


@dataclass
class EntropyCurve:
    parameter: str
    values: np.ndarray
    L: int
    means: np.ndarray
    stderrs: np.ndarray
    counts: np.ndarray
    observable: str = ""

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        self.means = np.asarray(self.means, dtype=float)
        self.stderrs = np.asarray(self.stderrs, dtype=float)
        self.counts = np.asarray(self.counts, dtype=int)
        if np.any(self.counts <= 0):
            raise ValueError("counts must be positive")
        order = np.argsort(self.values, kind="stable")
        for name in ("values", "means", "stderrs", "counts"):
            setattr(self, name, getattr(self, name)[order])

    @classmethod
    def from_samples(cls, parameter, values, L, samples, observable=""):
        stats = [summarize(s) for s in samples]
        return cls(parameter, values, L, [s.mean for s in stats], [s.stderr for s in stats],
                   [s.count for s in stats], observable)

    def to_dict(self):
        return {"parameter": self.parameter, "L": self.L, "observable": self.observable,
                "values": self.values.tolist(), "means": self.means.tolist(),
                "stderrs": self.stderrs.tolist(), "counts": self.counts.tolist()}


def curves_from_points(points: Mapping[tuple[int, float], Mapping], observable: str, t=None,
                       parameter: str = "p_s") -> list[EntropyCurve]:
    """Build one curve per L from ``{(L, p): aggregate}`` tables."""
    by_L: dict[int, list] = {}
    for (L, p), agg in sorted(points.items()):
        keys = [k for k in agg if k[0] == observable and (t is None or k[1] == t)]
        if not keys:
            continue
        st = agg[max(keys, key=lambda k: k[1])]
        by_L.setdefault(L, []).append((p, st))
    out = []
    for L, items in sorted(by_L.items()):
        out.append(EntropyCurve(parameter, [p for p, _ in items], L,
                                [s.mean for _, s in items], [s.stderr for _, s in items],
                                [s.count for _, s in items], observable))
    return out


# ---------------------------------------------------------------------------
# logarithmic fits


@dataclass
class FitResult:
    slope: float
    intercept: float
    residual: float
    window: tuple
    slope_err: float | None = None
    intercept_err: float | None = None
    n_points: int = 0

    def to_dict(self):
        return {k: (list(v) if isinstance(v, tuple) else v) for k, v in self.__dict__.items()}


def chord_log(x, L):
    x = np.asarray(x, dtype=float)
    return np.log2(L / np.pi * np.sin(np.pi * x / L))


def _lsq(u, y):
    A = np.stack([u, np.ones_like(u)], axis=1)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.linalg.norm(A @ coef - y))
    return float(coef[0]), float(coef[1]), res


def profile_window(L: int, x_min: int = 4) -> np.ndarray:
    return np.arange(x_min, L - x_min + 1)


def fit_log_profile(profile, L: int, x_min: int = 4) -> FitResult:
    """Least squares of S(x) against log2((L/pi) sin(pi x / L)).

    ``profile[x-1]`` holds S(x) for x = 1..L-1.
    """
    profile = np.asarray(profile, dtype=float)
    if profile.shape[-1] != L - 1:
        raise ValueError("profile must hold S(x) for x = 1..L-1")
    xs = profile_window(L, x_min)
    if xs.size < 8:
        raise ValueError("fit window holds fewer than 8 points")
    a, b, res = _lsq(chord_log(xs, L), profile[xs - 1])
    return FitResult(a, b, res, (int(xs[0]), int(xs[-1])), n_points=int(xs.size))


def fit_log_time(series, times, window=None, L: int | None = None) -> FitResult:
    """Least squares of S(t) against log2 t on ``window`` = (t_min, t_max) inclusive.

    Default window is [2, L/8].
    """
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if window is None:
        if L is None:
            raise ValueError("need L or an explicit window")
        window = (2, L // 8)
    m = (times >= window[0]) & (times <= window[1]) & (times > 0)
    if m.sum() < 3:
        raise ValueError("time window holds fewer than 3 points")
    a, b, res = _lsq(np.log2(times[m]), series[m])
    return FitResult(a, b, res, tuple(window), n_points=int(m.sum()))


def bootstrap(samples: np.ndarray, statistic, n_boot: int = 200, seed: int = 0):
    """Nonparametric bootstrap over rows (trajectories) of ``samples``.

    ``statistic`` maps a (n, ...) array of rows to a float. Returns
    (estimate on the full sample, bootstrap standard deviation).
    """
    samples = np.asarray(samples)
    rng = np.random.Generator(np.random.PCG64(seed))
    n = samples.shape[0]
    est = statistic(samples)
    reps = [statistic(samples[rng.integers(0, n, n)]) for _ in range(n_boot)]
    return float(est), float(np.std(reps, ddof=1))


def fit_profile_bootstrap(profiles: np.ndarray, L: int, x_min: int = 4, n_boot: int = 200,
                          seed: int = 0) -> FitResult:
    """Fit the mean profile; slope/intercept errors from resampling trajectories."""
    fit = fit_log_profile(profiles.mean(axis=0), L, x_min)
    fit.slope_err = bootstrap(profiles, lambda s: fit_log_profile(s.mean(axis=0), L, x_min).slope,
                              n_boot, seed)[1]
    fit.intercept_err = bootstrap(profiles, lambda s: fit_log_profile(s.mean(axis=0), L, x_min).intercept,
                                  n_boot, seed)[1]
    return fit


def fit_time_bootstrap(series: np.ndarray, times, window, n_boot: int = 200,
                       seed: int = 0) -> FitResult:
    fit = fit_log_time(series.mean(axis=0), times, window)
    fit.slope_err = bootstrap(series, lambda s: fit_log_time(s.mean(axis=0), times, window).slope,
                              n_boot, seed)[1]
    fit.intercept_err = bootstrap(series, lambda s: fit_log_time(s.mean(axis=0), times, window).intercept,
                                  n_boot, seed)[1]
    return fit


# ---------------------------------------------------------------------------
# crossings and collapse


def pair_crossings(a: EntropyCurve, b: EntropyCurve) -> list[float]:
    """Parameter values where two curves cross (linear interpolation on a shared grid)."""
    common = np.intersect1d(a.values, b.values)
    if common.size < 2:
        return []
    ya = np.interp(common, a.values, a.means)
    yb = np.interp(common, b.values, b.means)
    d = ya - yb
    out = []
    for i in range(common.size - 1):
        if d[i] == 0:
            out.append(float(common[i]))
        elif d[i] * d[i + 1] < 0:
            out.append(float(common[i] - d[i] * (common[i + 1] - common[i]) / (d[i + 1] - d[i])))
    if d[-1] == 0:
        out.append(float(common[-1]))
    return out


def crossings(curves: Sequence[EntropyCurve]) -> list[tuple[int, int, list[float]]]:
    """Crossings of consecutive sizes, as (L_small, L_large, points)."""
    cs = sorted(curves, key=lambda c: c.L)
    return [(a.L, b.L, pair_crossings(a, b)) for a, b in zip(cs, cs[1:])]


@dataclass
class CollapseResult:
    p_c: float
    nu: float
    quality: float
    p_c_err: float
    nu_err: float
    meta: dict = field(default_factory=dict)

    def to_dict(self):
        return dict(self.__dict__)


def collapse_quality(curves: Sequence[EntropyCurve], p_c: float, nu: float,
                     var_floor: float = 1e-12) -> float:
    """Inverse-variance weighted mean squared distance to the other sizes' interpolant.

    Each point of each curve is compared with the piecewise-linear
    interpolation of every other curve that covers its scaled abscissa.
    Returns inf when no pair overlaps.
    """
    scaled = []
    for c in curves:
        x = (c.values - p_c) * float(c.L) ** (1.0 / nu)
        scaled.append((x, c.means, c.stderrs ** 2))
    total, count = 0.0, 0
    for i, (xi, yi, vi) in enumerate(scaled):
        for j, (xj, yj, vj) in enumerate(scaled):
            if i == j:
                continue
            m = (xi >= xj[0]) & (xi <= xj[-1])
            if not m.any():
                continue
            yint = np.interp(xi[m], xj, yj)
            vint = np.interp(xi[m], xj, vj)
            total += float(np.sum((yi[m] - yint) ** 2 / (vi[m] + vint + var_floor)))
            count += int(m.sum())
    return total / count if count else float("inf")


def _golden_section(f, lo, hi, tol=1e-6):
    g = (np.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return (a + b) / 2


def _contour_halfwidth(f, x0, f0, step, limit):
    """Distance from x0 to where f rises by 1, averaged over both sides."""
    widths = []
    for sgn in (-1, 1):
        dx = step
        while dx <= limit and f(x0 + sgn * dx) < f0 + 1.0:
            dx += step
        if dx > limit:
            widths.append(limit)
            continue
        a, b = dx - step, dx
        for _ in range(40):
            m = 0.5 * (a + b)
            if f(x0 + sgn * m) < f0 + 1.0:
                a = m
            else:
                b = m
        widths.append(0.5 * (a + b))
    return float(np.mean(widths))


def scaling_collapse(curves: Sequence[EntropyCurve], p_center: float | None = None,
                     pc_halfwidth: float = 0.1, pc_step: float = 0.005,
                     nu_range=(0.8, 2.2), nu_step: float = 0.02,
                     refine_rounds: int = 3) -> CollapseResult:
    """Grid search over (p_c, nu) followed by coordinate-wise golden-section refinement."""
    if len({c.L for c in curves}) < 3:
        raise ValueError("collapse needs at least 3 sizes")
    curves = sorted(curves, key=lambda c: c.L)
    if p_center is None:
        pts = [p for _, _, ps in crossings(curves) for p in ps]
        lo = max(c.values[0] for c in curves)
        hi = min(c.values[-1] for c in curves)
        inside = [p for p in pts if lo <= p <= hi]
        p_center = float(np.median(inside)) if inside else 0.5 * (lo + hi)
    pcs = p_center + np.arange(-round(pc_halfwidth / pc_step), round(pc_halfwidth / pc_step) + 1) * pc_step
    nus = np.arange(nu_range[0], nu_range[1] + nu_step / 2, nu_step)
    grid = np.array([[collapse_quality(curves, p, n) for n in nus] for p in pcs])
    if not np.isfinite(grid).any():
        raise ValueError("scaled supports never overlap on the search grid")
    i, j = np.unravel_index(np.argmin(grid), grid.shape)
    p_c, nu = float(pcs[i]), float(nus[j])
    for _ in range(refine_rounds):
        p_c = _golden_section(lambda p: collapse_quality(curves, p, nu), p_c - pc_step, p_c + pc_step)
        nu = _golden_section(lambda n: collapse_quality(curves, p_c, n),
                             max(nu - nu_step, 0.05), nu + nu_step)
    q = collapse_quality(curves, p_c, nu)
    p_err = _contour_halfwidth(lambda p: collapse_quality(curves, p, nu), p_c, q, pc_step / 5, pc_halfwidth)
    nu_err = _contour_halfwidth(lambda n: collapse_quality(curves, p_c, n), nu, q, nu_step / 5,
                                nu_range[1] - nu_range[0])
    meta = {"p_center": p_center, "pc_grid": [float(pcs[0]), float(pcs[-1]), pc_step],
            "nu_grid": [float(nus[0]), float(nus[-1]), nu_step], "sizes": [c.L for c in curves],
            "grid_min": float(grid[i, j]), "refine_rounds": refine_rounds}
    return CollapseResult(float(p_c), float(nu), float(q), p_err, nu_err, meta)


def collapsed_points(curves: Sequence[EntropyCurve], p_c: float, nu: float):
    """Rows (scaled x, y, yerr, L) of the collapsed data."""
    rows = []
    for c in sorted(curves, key=lambda c: c.L):
        x = (c.values - p_c) * float(c.L) ** (1.0 / nu)
        rows += [(float(a), float(b), float(e), c.L) for a, b, e in zip(x, c.means, c.stderrs)]
    return rows
