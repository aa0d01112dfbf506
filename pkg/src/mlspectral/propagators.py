"""Mittag-Leffler propagators acting diagonally on spectral data.

Every entry ``(i, j)`` of a block is scaled by a factor that depends only on
the row eigenvalue ``mu_i`` and on ``t``; factors are computed once per
distinct eigenvalue and broadcast back, so results do not depend on how the
work is split.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import ml_special as ml
from .errors import InvalidParameter, NonConvergence
from .group_harmonics import GroupSpec, SpectralField

MULTI_TOL = 1e-12


class OutsideRangeWarning(UserWarning):
    """Evaluation outside the parameter range covered by the theory."""


@dataclass(frozen=True, eq=False)
class HeatProblem:
    spec: GroupSpec
    alpha: float
    u0: SpectralField

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise InvalidParameter(f"heat alpha must lie in (0, 1], got {self.alpha!r}")
        if self.u0.spec != self.spec:
            raise InvalidParameter("u0 belongs to a different spec")


@dataclass(frozen=True, eq=False)
class WaveProblem:
    """Wave-type problem; ``alpha`` in (1, 2).

    The endpoints 1 and 2 are accepted for testing and flagged by
    ``outside_paper_range``.
    """

    spec: GroupSpec
    alpha: float
    u0: SpectralField
    u1: SpectralField

    def __post_init__(self):
        if not 1 <= self.alpha <= 2:
            raise InvalidParameter(f"wave alpha must lie in [1, 2], got {self.alpha!r}")
        if self.u0.spec != self.spec or self.u1.spec != self.spec:
            raise InvalidParameter("initial data belong to a different spec")

    @property
    def outside_paper_range(self) -> bool:
        return not 1 < self.alpha < 2


@dataclass(frozen=True, eq=False)
class MultiTermProblem:
    """``D^a0 u + sum_k g_k D^ak u + L u = 0`` with ``1 >= a0 > a1 > ... > am > 0``."""

    spec: GroupSpec
    alphas: tuple[float, ...]
    gammas: tuple[float, ...]
    u0: SpectralField

    def __post_init__(self):
        a = tuple(float(x) for x in self.alphas)
        g = tuple(float(x) for x in self.gammas)
        object.__setattr__(self, "alphas", a)
        object.__setattr__(self, "gammas", g)
        if len(a) < 2:
            raise InvalidParameter("need alpha_0 and at least one lower order")
        if len(g) != len(a) - 1:
            raise InvalidParameter(f"expected {len(a) - 1} gammas, got {len(g)}")
        if not (a[0] <= 1 and a[-1] > 0 and all(x > y for x, y in zip(a, a[1:]))):
            raise InvalidParameter(f"orders must satisfy 1 >= a0 > ... > am > 0, got {a}")
        if any(not x > 0 for x in g):
            raise InvalidParameter("gammas must be > 0")
        if self.u0.spec != self.spec:
            raise InvalidParameter("u0 belongs to a different spec")


def _check_times(ts, strictly_positive=False):
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    bad = ts <= 0 if strictly_positive else ts < 0
    if np.any(bad) or not np.all(np.isfinite(ts)):
        raise InvalidParameter("times must be finite and " + ("> 0" if strictly_positive else ">= 0"))
    return ts


def _unique_mu(F: SpectralField):
    mu = F.entry_eigenvalues
    levels, inverse = np.unique(mu, return_inverse=True)
    return levels, inverse


def _ml_grid(alpha, rho, levels, ts, tol=ml.DEFAULT_TOL):
    """``E_{alpha,rho}(-mu t^alpha)`` on the (mu, t) product, shape ``(len(levels), len(ts))``."""
    z = -levels[:, None] * ts[None, :] ** alpha
    return ml.ml_values(alpha, rho, z, tol)[0]


def heat_factors(alpha: float, mus, ts) -> np.ndarray:
    mus = np.asarray(mus, dtype=float)
    ts = _check_times(ts)
    return _ml_grid(alpha, 1.0, mus, ts)


def _apply(F: SpectralField, inverse, factor_col) -> SpectralField:
    return F.with_data(F.data * factor_col[inverse])


def heat_evolve(p: HeatProblem, t: float) -> SpectralField:
    """``u(t)`` with ``F_ij -> E_alpha(-mu_i t^alpha) F_ij``; ``t = 0`` returns ``u0``."""
    return heat_evolve_many(p, [t])[0]


def heat_evolve_many(p: HeatProblem, ts: Sequence[float]) -> list[SpectralField]:
    ts = _check_times(ts)
    levels, inv = _unique_mu(p.u0)
    fac = _ml_grid(p.alpha, 1.0, levels, ts)
    out = []
    for k, t in enumerate(ts):
        out.append(p.u0 if t == 0 else _apply(p.u0, inv, fac[:, k]))
    return out


def _warn_wave(p: WaveProblem):
    if p.outside_paper_range:
        warnings.warn(
            f"wave propagator evaluated at alpha={p.alpha}, outside (1, 2)",
            OutsideRangeWarning,
            stacklevel=3,
        )


def wave_factors(alpha: float, mus, ts):
    """Mode factors ``(A, B, dA, dB)``: ``u = A u0 + B u1`` and ``u_t = dA u0 + dB u1``."""
    mus = np.asarray(mus, dtype=float)
    ts = _check_times(ts)
    e1 = _ml_grid(alpha, 1.0, mus, ts)
    e2 = _ml_grid(alpha, 2.0, mus, ts)
    ea = _ml_grid(alpha, alpha, mus, ts)
    tt = ts[None, :]
    A = e1
    B = tt * e2
    dA = -mus[:, None] * tt ** (alpha - 1.0) * ea
    dB = e1
    return A, B, dA, dB


def wave_evolve_many(p: WaveProblem, ts) -> list[SpectralField]:
    _warn_wave(p)
    ts = _check_times(ts)
    levels, inv = _unique_mu(p.u0)
    A, B, _, _ = wave_factors(p.alpha, levels, ts)
    out = []
    for k, t in enumerate(ts):
        if t == 0:
            out.append(p.u0)
            continue
        out.append(p.u0.with_data(p.u0.data * A[inv, k] + p.u1.data * B[inv, k]))
    return out


def wave_evolve(p: WaveProblem, t: float) -> SpectralField:
    """``F_ij -> E_a(-mu_i t^a) u0_ij + t E_{a,2}(-mu_i t^a) u1_ij``."""
    return wave_evolve_many(p, [t])[0]


def wave_velocity_many(p: WaveProblem, ts) -> list[SpectralField]:
    _warn_wave(p)
    ts = _check_times(ts)
    levels, inv = _unique_mu(p.u0)
    _, _, dA, dB = wave_factors(p.alpha, levels, ts)
    out = []
    for k, t in enumerate(ts):
        if t == 0 and p.alpha > 1:
            # the u0 term vanishes like t^(alpha-1)
            out.append(p.u1)
            continue
        out.append(p.u0.with_data(p.u0.data * dA[inv, k] + p.u1.data * dB[inv, k]))
    return out


def wave_velocity(p: WaveProblem, t: float) -> SpectralField:
    """Time derivative ``-mu t^(a-1) E_{a,a}(-mu t^a) u0 + E_a(-mu t^a) u1``; ``t = 0`` gives ``u1``."""
    return wave_velocity_many(p, [t])[0]


# -- multi-term ------------------------------------------------------------------


@dataclass
class MultiTermReport:
    """Which evaluation route produced each (mu, t) factor."""

    series: int = 0
    laplace: int = 0
    beyond_T: bool = False
    failures: list = field(default_factory=list)


def multiterm_transform(alphas, gammas, mu):
    """Laplace transform of a mode: ``(s^(a0-1) + sum g_k s^(ak-1)) / (s^a0 + sum g_k s^ak + mu)``."""
    a = np.asarray(alphas, dtype=float)
    g = np.concatenate([[1.0], np.asarray(gammas, dtype=float)])

    def F(s):
        s = np.asarray(s, dtype=complex)
        pw = s[..., None] ** a
        num = np.sum(g * pw, axis=-1) / s
        return num / (np.sum(g * pw, axis=-1) + mu)

    return F


def multiterm_series(alphas, gammas, mu: float, t: float, tol: float = MULTI_TOL) -> float:
    """Mode factor from the multivariate Mittag-Leffler representation."""
    a0 = alphas[0]
    g = (1.0,) + tuple(gammas)
    orders = tuple(a0 - ak for ak in alphas[1:]) + (a0,)
    args = [-gk * t ** (a0 - ak) for gk, ak in zip(gammas, alphas[1:])] + [-mu * t**a0]
    total = 0.0
    for k, ak in enumerate(alphas):
        idx = ml.MultiMLIndex(orders, a0 - ak + 1.0)
        # mode factors lie in [0, 1]; each summand is of order one as well, so
        # a large absolute sum means cancellation and the fallback route
        rep = ml.ml_multi(idx, args, tol, bound=1.0)
        total += g[k] * t ** (a0 - ak) * rep.value
    return total


def multiterm_factor(alphas, gammas, mu: float, t: float, tol: float = MULTI_TOL, report=None):
    """Series route with Talbot inversion of the mode transform as fallback.

    The series loses all accuracy to cancellation once ``mu t^a0`` is large;
    the fallback is used exactly when :func:`ml_multi` reports that.
    """
    if t == 0:
        return 1.0
    try:
        v = multiterm_series(alphas, gammas, mu, t, tol)
        if report is not None:
            report.series += 1
        return v
    except NonConvergence as exc:
        if report is not None:
            report.laplace += 1
            report.failures.append((mu, t, str(exc)))
        return ml.talbot_invert(multiterm_transform(alphas, gammas, mu), t, 48)


def multiterm_evolve_many(p: MultiTermProblem, ts, T: float | None = None, report=None):
    ts = _check_times(ts)
    if report is None:
        report = MultiTermReport()
    if T is not None and np.any(ts > T):
        report.beyond_T = True
    levels, inv = _unique_mu(p.u0)
    # memoised per (mu, t): every entry sharing a row eigenvalue reuses it
    fac = np.empty((levels.size, ts.size))
    for i, mu in enumerate(levels):
        for k, t in enumerate(ts):
            fac[i, k] = multiterm_factor(p.alphas, p.gammas, float(mu), float(t), report=report)
    return [p.u0 if t == 0 else _apply(p.u0, inv, fac[:, k]) for k, t in enumerate(ts)]


def multiterm_evolve(p: MultiTermProblem, t: float, T: float | None = None, report=None) -> SpectralField:
    if not t > 0:
        raise InvalidParameter("multi-term evolution needs t > 0")
    return multiterm_evolve_many(p, [t], T, report)[0]
