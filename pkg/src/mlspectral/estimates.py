"""Numerical checks of decay rates and Sobolev-type bounds.

None of the bounds come with explicit constants, so every check fits the
constant as the largest observed ratio and then tests that the ratio shows no
growth trend at either end of a log-spaced time sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize, special

from . import group_harmonics as gh
from . import ml_special as ml
from . import propagators as pr
from .errors import InvalidCase, InvalidParameter, TruncationInsufficient, WindowTooShort

SLOPE_SLACK = 0.05
END_DECADES = 0.5
LORENTZ_GRID = 600


# -- reports -------------------------------------------------------------------


@dataclass
class BoundReport:
    """Ratios ``lhs / rhs`` over a time sweep.

    ``passed`` holds when the log-ratio does not grow towards either end of
    the sweep: the regression slope against ``log t`` over the last
    ``END_DECADES`` is at most ``SLOPE_SLACK``, and over the first
    ``END_DECADES`` it is at least ``-SLOPE_SLACK`` (no blow-up as ``t -> 0``).
    """

    t: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    label: str = ""
    slope_small_t: float = 0.0
    slope_large_t: float = 0.0
    flags: list = field(default_factory=list)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.lhs = np.asarray(self.lhs, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        if np.any(self.lhs < 0) or np.any(self.rhs < 0):
            raise InvalidParameter("lhs and rhs must be nonnegative")
        self.slope_small_t, self.slope_large_t = end_slopes(self.t, self.ratio)

    @property
    def ratio(self) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            r = self.lhs / self.rhs
        # 0/0 only arises for identically vanishing data
        return np.where((self.lhs == 0) & (self.rhs == 0), 0.0, r)

    @property
    def ratios(self):
        return list(zip(self.t, self.lhs, self.rhs, self.ratio))

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratio))

    @property
    def passed(self) -> bool:
        return (
            bool(np.all(np.isfinite(self.ratio)))
            and self.slope_small_t >= -SLOPE_SLACK
            and self.slope_large_t <= SLOPE_SLACK
        )


def _fit_slope(x, y):
    if x.size < 2:
        return 0.0
    return float(np.polyfit(x, y, 1)[0])


def end_slopes(t, ratio, decades: float = END_DECADES):
    """Slopes of ``log ratio`` against ``log t`` over the first and last ``decades``.

    Vanishing ratios carry no growth information and are left out.
    """
    t = np.asarray(t, dtype=float)
    ratio = np.asarray(ratio, dtype=float)
    ok = ratio > 0
    lt = np.log10(t)
    lo = ok & (lt <= lt.min() + decades + 1e-12)
    hi = ok & (lt >= lt.max() - decades - 1e-12)
    with np.errstate(divide="ignore"):
        lr = np.log10(np.where(ok, ratio, 1.0))
    return _fit_slope(lt[lo], lr[lo]), _fit_slope(lt[hi], lr[hi])


# -- Lorentz supremum ----------------------------------------------------------


def counting_exponent(spec: gh.GroupSpec) -> float:
    """Growth exponent of the counting function: half the (Hausdorff) dimension."""
    if spec.is_torus:
        return spec.n / 2.0
    return 1.5 if spec.operator is gh.Operator.LAPLACIAN else 2.0


def s_star(alpha: float, lam: float, r: float, t: float) -> float:
    """Maximiser of ``s^(lam/r) / (1 + t^alpha s / Gamma(1+alpha))``."""
    if not (lam > 0 and r > 0 and t > 0 and alpha > 0):
        raise InvalidParameter("alpha, lambda, r and t must be positive")
    if lam >= r:
        raise InvalidParameter(f"need lambda < r for a finite maximiser, got {lam} >= {r}")
    return lam * special.gamma(1.0 + alpha) / (r * (1.0 - lam / r)) * t ** (-alpha)


def _spectrum_table(spec: gh.GroupSpec, exclude_zero: bool):
    """Distinct eigenvalues with cumulative multiplicities ``sum d_xi``."""
    mus, weights = [], []
    for p in gh.enumerate_dual(spec):
        for mu in p.eigenvalues:
            mus.append(mu)
            weights.append(p.dim)
    mus = np.asarray(mus)
    weights = np.asarray(weights)
    levels, inv = np.unique(mus, return_inverse=True)
    counts = np.bincount(inv, weights=weights)
    if exclude_zero:
        keep = levels > 0
        levels, counts = levels[keep], counts[keep]
    return levels, np.cumsum(counts)


def exact_counting(spec: gh.GroupSpec, exclude_zero: bool = False) -> Callable:
    """Vectorised ``tau(s) = sum d #{mu < s}`` over the truncated spectrum."""
    levels, cum = _spectrum_table(spec, exclude_zero)
    cum0 = np.concatenate([[0.0], cum])

    def tau(s):
        return cum0[np.searchsorted(levels, np.asarray(s, dtype=float), side="left")]

    return tau


def power_counting(lam: float) -> Callable:
    return lambda s: np.asarray(s, dtype=float) ** lam


def _kernel(alpha, t, s, kind):
    x = t**alpha * s
    if kind == "ml":
        return ml.ml_values(alpha, 1.0, -x)[0]
    if kind == "bound":
        return 1.0 / (1.0 + x / special.gamma(1.0 + alpha))
    raise InvalidParameter(f"unknown kernel {kind!r}")


def lorentz_sup(
    spec: gh.GroupSpec | None,
    alpha: float,
    t: float,
    r: float,
    *,
    counting: Callable | None = None,
    lam: float | None = None,
    kernel: str = "ml",
    exclude_zero: bool = False,
    n_grid: int = LORENTZ_GRID,
    augment: bool = True,
):
    """``sup_s tau(s)^(1/r) E_alpha(-t^alpha s)`` on a log grid; returns ``(value, argmax_s)``.

    The grid spans ``[1e-4, 1e6] * t^-alpha``; with the spectrum of ``spec`` as
    ``tau`` it is cut at the first eigenvalue beyond the truncation. When
    ``lam < r`` the closed-form candidate ``s_star`` joins the grid unless
    ``augment`` is false. A maximiser on the upper end of the grid raises
    :class:`TruncationInsufficient`.
    """
    if not 0 < alpha <= 1:
        raise InvalidParameter(f"alpha must lie in (0, 1], got {alpha!r}")
    if not (t > 0 and r > 0):
        raise InvalidParameter("t and r must be positive")
    if n_grid < 500:
        raise InvalidParameter("the log grid needs at least 500 points")
    s = np.logspace(-4.0, 6.0, n_grid) * t ** (-alpha)
    if counting is None:
        if spec is None:
            raise InvalidParameter("need a spec or a counting function")
        counting = exact_counting(spec, exclude_zero)
        s = s[s <= gh.counting_limit(spec)]
        if s.size < 2:
            raise TruncationInsufficient("truncation too small for the s grid")
    if lam is None and spec is not None:
        lam = counting_exponent(spec)
    if augment and lam is not None and lam < r:
        cand = s_star(alpha, lam, r, t)
        if s[0] < cand < s[-1]:
            s = np.sort(np.append(s, cand))
    vals = np.asarray(counting(s), dtype=float) ** (1.0 / r) * _kernel(alpha, t, s, kernel)
    k = int(np.argmax(vals))
    if k == s.size - 1:
        raise TruncationInsufficient("the supremum sits at the upper end of the s grid")
    return float(vals[k]), float(s[k])


def lorentz_sup_exact(spec: gh.GroupSpec, alpha: float, t: float, r: float, exclude_zero=False):
    """Supremum for the exact step-function ``tau``.

    ``tau`` is constant on each ``(mu_k, mu_{k+1}]`` and the kernel decreases,
    so the supremum over a step is its limit at ``mu_k+``.
    """
    levels, cum = _spectrum_table(spec, exclude_zero)
    vals = cum ** (1.0 / r) * _kernel(alpha, t, levels, "ml")
    k = int(np.argmax(vals))
    return float(vals[k]), float(levels[k])


# -- heat decay ----------------------------------------------------------------


@dataclass
class DecayStudyConfig:
    spec: gh.GroupSpec
    alpha: float
    p: float
    q: float
    t_samples: Sequence[float]
    seed: int = 0
    grid_factor: int = 2
    fit_decades: float = 1.0

    def __post_init__(self):
        self.t_samples = np.asarray(self.t_samples, dtype=float)
        if not 0 < self.alpha <= 1:
            raise InvalidParameter(f"alpha must lie in (0, 1], got {self.alpha!r}")
        if not 1 < self.p <= 2:
            raise InvalidParameter(f"p must lie in (1, 2], got {self.p!r}")
        if not 2 <= self.q < math.inf:
            raise InvalidParameter(f"q must lie in [2, inf), got {self.q!r}")
        if np.any(self.t_samples <= 0):
            raise InvalidParameter("t_samples must be positive")
        gap = 1.0 / self.p - 1.0 / self.q
        inv_lam = 1.0 / counting_exponent(self.spec)
        if inv_lam < gap - 1e-12:
            raise InvalidParameter(
                f"admissibility fails: 1/lambda = {inv_lam:g} < 1/p - 1/q = {gap:g}"
            )

    @property
    def on_admissibility_boundary(self) -> bool:
        gap = 1.0 / self.p - 1.0 / self.q
        return abs(1.0 / counting_exponent(self.spec) - gap) <= 1e-12

    @property
    def predicted_slope(self) -> float:
        lam = counting_exponent(self.spec)
        return -self.alpha * lam * (1.0 / self.p - 1.0 / self.q)


def random_data(spec: gh.GroupSpec, seed: int, zero_mean: bool = True) -> gh.SpectralField:
    """I.i.d. complex standard normal coefficients; optionally without the trivial mode."""
    rng = np.random.default_rng(seed)
    F = gh.random_field(spec, rng)
    if zero_mean:
        # the trivial representation is the only zero eigenvalue of every operator here
        F = F.with_data(np.where(F.entry_eigenvalues == 0, 0.0, F.data))
    return F


def study_grid(spec: gh.GroupSpec, factor: int) -> gh.GroupGrid:
    base = gh.nyquist_size(spec)
    return gh.make_grid(spec, tuple(factor * b for b in base))


@dataclass
class DecayResult:
    fitted_slope: float
    predicted_slope: float
    report: BoundReport
    norms: np.ndarray
    u0_norm_p: float


def heat_decay_study(cfg: DecayStudyConfig, mapper=map) -> DecayResult:
    """Fit the decay exponent of ``||u(t)||_q`` for seeded zero-mean data.

    The slope is fitted over the last ``fit_decades`` of the sweep. The report
    compares ``||u(t)||_q`` with ``t^predicted ||u0||_p``. ``mapper`` may
    be an executor's ``map``; each norm is computed independently.
    """
    ts = np.sort(cfg.t_samples)
    lt = np.log10(ts)
    window = lt >= lt.max() - cfg.fit_decades - 1e-12
    if np.count_nonzero(window) < 5:
        raise WindowTooShort("fewer than 5 samples in the fit window")
    u0 = random_data(cfg.spec, cfg.seed, zero_mean=True)
    grid = study_grid(cfg.spec, cfg.grid_factor)
    u0_p = gh.lq_norm(gh.inverse_transform(u0, grid), cfg.p)
    prob = pr.HeatProblem(cfg.spec, cfg.alpha, u0)
    states = pr.heat_evolve_many(prob, ts)
    norms = np.array(list(mapper(lambda u: gh.lq_norm(gh.inverse_transform(u, grid), cfg.q), states)))
    fitted = _fit_slope(lt[window], np.log10(norms[window]))
    pred = cfg.predicted_slope
    report = BoundReport(ts, norms, ts**pred * u0_p, label="heat decay")
    if cfg.on_admissibility_boundary:
        report.flags.append("admissibility_boundary")
    return DecayResult(fitted, pred, report, norms, u0_p)


def lorentz_chain(cfg: DecayStudyConfig, r: float | None = None) -> BoundReport:
    """``||u(t)||_q`` against ``lorentz_sup(t, r) ||u0||_p`` with ``1/r = 1/p - 1/q``.

    Zero-mean data pairs with the counting function of the nonzero spectrum.
    """
    if r is None:
        r = 1.0 / (1.0 / cfg.p - 1.0 / cfg.q)
    res = heat_decay_study(cfg)
    sups = np.array(
        [lorentz_sup(cfg.spec, cfg.alpha, t, r, exclude_zero=True)[0] for t in res.report.t]
    )
    return BoundReport(res.report.t, res.norms, sups * res.u0_norm_p, label="lorentz chain")


# -- wave bounds ---------------------------------------------------------------


def _check_case(case_id, n):
    if case_id not in range(1, n + 1):
        raise InvalidCase(f"case must be one of 1..{n}, got {case_id!r}")


def _wave_rhs(case_id, alpha, t, n):
    """Right-hand sides; ``n`` maps ``(field, order)`` to a Sobolev norm of the data."""
    damp = 1.0 + t ** (-alpha)
    gap = 2.0 * (alpha - 1.0) / alpha
    if case_id == 1:
        return damp * n("u0", 0) + t * damp * n("u1", 0)
    if case_id == 2:
        return damp * n("u0", 0) + t * n("u1", 2)
    if case_id == 3:
        return damp * n("u0", 0) + t * n("u1", 0) + n("u1", gap)
    if case_id == 4:
        return n("u0", 2) + t * damp * n("u1", 0)
    if case_id == 5:
        return n("u0", 2) + t * n("u1", 2)
    return n("u0", 2) + t * n("u1", 0) + n("u1", gap)


def _data_norms(p: pr.WaveProblem, beta: float):
    cache = {}

    def n(which, extra):
        key = (which, extra)
        if key not in cache:
            F = p.u0 if which == "u0" else p.u1
            cache[key] = gh.sobolev_norm(F, beta + extra)
        return cache[key]

    return n


def wave_sobolev_suite(p: pr.WaveProblem, beta: float, t_samples, cases=range(1, 7)):
    """Reports for several cases from a single evolution; keys are case ids."""
    ts = np.asarray(t_samples, dtype=float)
    if np.any(ts <= 0):
        raise InvalidParameter("t_samples must be positive")
    for c in cases:
        _check_case(c, 6)
    lhs = np.array([gh.sobolev_norm(u, beta + 2.0) for u in pr.wave_evolve_many(p, ts)])
    n = _data_norms(p, beta)
    out = {}
    for c in cases:
        rep = BoundReport(ts, lhs, _wave_rhs(c, p.alpha, ts, n), label=f"wave case {c}")
        if p.outside_paper_range:
            rep.flags.append("outside_paper_range")
        out[c] = rep
    return out


def wave_sobolev_check(p: pr.WaveProblem, beta: float, case_id: int, t_samples) -> BoundReport:
    _check_case(case_id, 6)
    return wave_sobolev_suite(p, beta, t_samples, cases=(case_id,))[case_id]


def wave_velocity_suite(p: pr.WaveProblem, beta: float, t_samples, branches=(1, 2)):
    ts = np.asarray(t_samples, dtype=float)
    if np.any(ts <= 0):
        raise InvalidParameter("t_samples must be positive")
    for b in branches:
        _check_case(b, 2)
    lhs = np.array([gh.sobolev_norm(v, beta) for v in pr.wave_velocity_many(p, ts)])
    n = _data_norms(p, beta)
    out = {}
    for b in branches:
        if b == 1:
            rhs = n("u0", 0) / ts + n("u1", 0)
        else:
            rhs = n("u0", 2.0 / p.alpha) + n("u1", 0) + 0.0 * ts
        rep = BoundReport(ts, lhs, rhs, label=f"velocity branch {b}")
        if p.outside_paper_range:
            rep.flags.append("outside_paper_range")
        out[b] = rep
    return out


def wave_velocity_check(p: pr.WaveProblem, beta: float, branch: int, t_samples) -> BoundReport:
    _check_case(branch, 2)
    return wave_velocity_suite(p, beta, t_samples, branches=(branch,))[branch]


def velocity_peak(alpha: float, mu: float) -> tuple[float, float]:
    """``max_t mu t^(alpha-1) |E_{alpha,alpha}(-mu t^alpha)|`` and its location.

    A log-spaced scan brackets the peak, which is then refined in ``log t``.
    """
    if not 1 < alpha < 2 or not mu > 0:
        raise InvalidParameter("need 1 < alpha < 2 and mu > 0")

    def g(logt):
        t = np.exp(np.atleast_1d(logt))
        return mu * t ** (alpha - 1.0) * np.abs(ml.ml_values(alpha, alpha, -mu * t**alpha)[0])

    scale = mu ** (-1.0 / alpha)
    lt = np.log(scale) + np.linspace(np.log(1e-3), np.log(1e3), 241)
    v = g(lt)
    k = int(np.clip(np.argmax(v), 1, lt.size - 2))
    res = optimize.minimize_scalar(
        lambda x: -g(x)[0], bounds=(lt[k - 1], lt[k + 1]), method="bounded",
        options={"xatol": 1e-10},
    )
    best = max(-res.fun, float(v.max()))
    return float(best), float(np.exp(res.x))


def velocity_scaling(alpha: float, mus=(0.1, 1.0, 10.0, 100.0)):
    """Log-log slope of the velocity peak against ``mu``; compare with ``1/alpha``."""
    peaks = np.array([velocity_peak(alpha, m)[0] for m in mus])
    slope = _fit_slope(np.log(np.asarray(mus)), np.log(peaks))
    return slope, peaks


# -- multi-term bounds ---------------------------------------------------------


def multiterm_prefactor(alphas, gammas, t):
    g = np.concatenate([[1.0], np.asarray(gammas, dtype=float)])
    a = np.asarray(alphas, dtype=float)
    t = np.asarray(t, dtype=float)
    return np.sum(g * t[..., None] ** (a[0] - a), axis=-1)


def multiterm_bound_check(p: pr.MultiTermProblem, beta: float, case_id: int, T: float, t_samples) -> BoundReport:
    """``||u(t)||_{beta+2}`` against the multi-term right-hand sides on ``(0, T]``."""
    _check_case(case_id, 2)
    ts = np.asarray(t_samples, dtype=float)
    if not T > 0:
        raise InvalidParameter("T must be > 0")
    if np.any(ts <= 0) or np.any(ts > T):
        raise InvalidParameter(f"t_samples must lie in (0, {T}]")
    rep_routes = pr.MultiTermReport()
    states = pr.multiterm_evolve_many(p, ts, T, rep_routes)
    lhs = np.array([gh.sobolev_norm(u, beta + 2.0) for u in states])
    pref = multiterm_prefactor(p.alphas, p.gammas, ts)
    a0 = p.alphas[0]
    if case_id == 1:
        rhs = pref * (1.0 + ts ** (-a0)) * gh.sobolev_norm(p.u0, beta)
    else:
        rhs = pref * gh.sobolev_norm(p.u0, beta + 2.0)
    rep = BoundReport(ts, lhs, rhs, label=f"multi-term case {case_id}")
    if rep_routes.laplace:
        rep.flags.append(f"laplace_fallback={rep_routes.laplace}")
    return rep
