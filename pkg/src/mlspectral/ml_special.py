"""Mittag-Leffler functions on the real line.

Three evaluation regimes are used for the two-parameter function
``E_{a,b}(z) = sum_k z**k / Gamma(a*k + b)``:

* ``TaylorSeries`` for ``|z| <= 1`` and for every ``z > 0`` (no cancellation
  on the positive axis),
* ``AsymptoticNegative`` for ``z <= -x_switch(a)`` with ``x_switch = 50**a``,
  i.e. once ``|z|**(1/a) >= 50``; for ``a > 1`` the residues of the poles of
  the Laplace transform are added explicitly,
* ``ContourIntegral`` in between: Talbot inversion of
  ``s**(a-b) / (s**a + x)`` on Weideman's contour for ``a <= 1``, and the
  branch-cut integral plus pole residues for ``a > 1``.

Tolerances are absolute for ``|E| <= 1`` and relative above that.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

from .errors import InvalidParameter, NonConvergence

DEFAULT_TOL = 1e-12
TALBOT_NODES = 32
MULTI_MAX_DEGREE = 10_000

_EPS = np.finfo(float).eps
# Weideman's optimized Talbot contour parameters.
_TALBOT_A, _TALBOT_B, _TALBOT_C, _TALBOT_D = 0.5017, 0.6407, 0.6122, 0.2645


class Regime(str, enum.Enum):
    TAYLOR = "TaylorSeries"
    ASYMPTOTIC = "AsymptoticNegative"
    CONTOUR = "ContourIntegral"


@dataclass(frozen=True)
class MLIndex:
    alpha: float
    rho: float = 1.0

    def __post_init__(self):
        if not (np.isfinite(self.alpha) and self.alpha > 0):
            raise InvalidParameter(f"alpha must be > 0, got {self.alpha!r}")
        if not np.isfinite(self.rho):
            raise InvalidParameter(f"rho must be finite, got {self.rho!r}")


@dataclass(frozen=True)
class MultiMLIndex:
    alphas: tuple[float, ...]
    lam: float

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if not alphas:
            raise InvalidParameter("alphas must be nonempty")
        if any(not (np.isfinite(a) and a > 0) for a in alphas):
            raise InvalidParameter(f"every alpha must be > 0, got {alphas}")
        if not np.isfinite(self.lam):
            raise InvalidParameter(f"lambda must be finite, got {self.lam!r}")


@dataclass(frozen=True)
class EvalReport:
    value: float
    est_abs_error: float
    regime: Regime


def x_switch(alpha: float) -> float:
    """Magnitude of negative arguments beyond which the asymptotic expansion is used."""
    return 50.0**alpha


# -- Laplace inversion ---------------------------------------------------


def talbot_nodes(t: float, n_nodes: int = TALBOT_NODES):
    """Upper-half nodes ``s_j`` and weights ``w_j`` of the Talbot rule at time ``t``.

    ``f(t) ~= sum_j Im(w_j * exp(s_j t) * F(s_j))`` for transforms that are real
    on the real axis and analytic off the negative real axis.
    """
    if n_nodes < 2 or n_nodes % 2:
        raise InvalidParameter("n_nodes must be an even integer >= 2")
    h = 2.0 * np.pi / n_nodes
    theta = (np.arange(n_nodes // 2) + 0.5) * h
    bt = _TALBOT_B * theta
    scale = n_nodes / t
    s = scale * (_TALBOT_A * theta / np.tan(bt) - _TALBOT_C + 1j * _TALBOT_D * theta)
    ds = scale * (
        _TALBOT_A / np.tan(bt) - _TALBOT_A * bt / np.sin(bt) ** 2 + 1j * _TALBOT_D
    )
    w = (2.0 / n_nodes) * ds
    return s, w


def talbot_invert(
    transform: Callable[[np.ndarray], np.ndarray], t: float, n_nodes: int = TALBOT_NODES
) -> float:
    """Inverse Laplace transform of ``transform`` at ``t > 0``.

    ``transform`` receives a complex array of contour nodes and must be real on
    the real axis with all singularities on the closed negative real axis.
    """
    if not t > 0:
        raise InvalidParameter(f"t must be > 0, got {t!r}")
    s, w = talbot_nodes(t, n_nodes)
    vals = np.asarray(transform(s))
    return float(np.sum(np.imag(w * np.exp(s * t) * vals), axis=-1))


# -- scalar helpers --------------------------------------------------------


def _log_abs_rgamma(x):
    """log|1/Gamma(x)| and sign of 1/Gamma(x); sign is 0 at the poles of Gamma."""
    x = np.asarray(x, dtype=float)
    # arguments like rho - alpha*k land on poles only up to rounding
    pole = (x <= 0) & (np.abs(x - np.round(x)) <= 1e-12 * np.maximum(1.0, np.abs(x)))
    with np.errstate(all="ignore"):
        logv = -special.gammaln(np.where(pole, 0.5, x))
        sgn = special.gammasgn(np.where(pole, 0.5, x))
    return np.where(pole, -np.inf, logv), np.where(pole, 0.0, sgn)


def _scale(value):
    return np.maximum(1.0, np.abs(value))


# -- regimes ---------------------------------------------------------------


def _taylor(alpha, rho, z, tol, max_terms=200_000):
    """Power series for a batch of points; returns values and error estimates.

    The truncation index is chosen for the largest ``|z|`` in the batch, where
    the absolute tail is largest.
    """
    z = np.asarray(z, dtype=float)
    if z.size == 0:
        return z.copy(), z.copy()
    zmax = float(np.max(np.abs(z)))
    if zmax == 0.0:
        return np.full(z.shape, float(special.rgamma(rho))), np.zeros(z.shape)
    logzmax = math.log(zmax)
    if logzmax / alpha > math.log(700.0):
        raise NonConvergence(f"power series overflows for z={zmax}, alpha={alpha}")
    chunk = 128
    logc, sgn = np.empty(0), np.empty(0)
    n_terms, tail = None, None
    while n_terms is None:
        start = logc.size
        if start >= max_terms:
            raise NonConvergence(f"power series did not converge in {max_terms} terms")
        k = np.arange(start, start + chunk)
        lg, sg = _log_abs_rgamma(alpha * k + rho)
        logc, sgn = np.concatenate([logc, lg]), np.concatenate([sgn, sg])
        kk = np.arange(logc.size - 1)
        lt = kk * logzmax + logc[:-1]
        log_q = logzmax + logc[1:] - logc[:-1]
        arg = alpha * kk + rho
        # Gamma increases beyond 1.4616, so term ratios only decrease from arg > 2
        with np.errstate(over="ignore"):
            ok = (arg > 2.0) & (log_q < 0.0)
            q = np.exp(np.minimum(log_q, 0.0))
            bound = np.exp(lt + log_q) / np.where(ok, 1.0 - q, 1.0)
        lead = np.max(np.exp(np.minimum(lt, 700.0)))
        good = ok & (bound <= 0.01 * tol * max(1.0, lead))
        hits = np.flatnonzero(good)
        if hits.size:
            n_terms = int(hits[0]) + 1
            tail = float(bound[hits[0]])
        chunk *= 2
    k = np.arange(n_terms)
    absz = np.abs(z)
    with np.errstate(divide="ignore", invalid="ignore"):
        logz = np.log(absz)
        expo = np.where(k[None, :] == 0, 0.0, k[None, :] * logz[..., None])
    mags = np.exp(expo + logc[:n_terms])
    signs = sgn[:n_terms] * np.where((z[..., None] < 0) & (k % 2 == 1), -1.0, 1.0)
    terms = signs * mags
    vals = np.sum(terms, axis=-1)
    # the tail bound scales like |z|^n_terms from the largest point down
    err = tail * (absz / zmax) ** n_terms + 4.0 * _EPS * np.sum(mags, axis=-1)
    return vals, err


def _pole_angles(alpha, rho):
    """Arguments of the poles of s**(a-b)/(s**a + x) on the principal sheet."""
    angles = []
    j = 0
    while True:
        frac = (2 * j + 1) / alpha
        if frac > 1.0 + 1e-15:
            break
        if frac < 1.0 - 1e-15:
            angles.append(np.pi * frac)
        elif float(rho).is_integer():
            # pole on the cut: genuine pole only when s**(1-b) is single valued
            angles.append(np.pi)
        j += 1
    return angles


def _residues(alpha, rho, x):
    """Sum of residues of exp(s) s**(a-b)/(s**a + x), x > 0, on the principal sheet."""
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    r = x ** (1.0 / alpha)
    for phi in _pole_angles(alpha, rho):
        s = r * np.exp(1j * phi)
        res = np.exp(s) * s ** (1.0 - rho) / alpha
        if phi == np.pi:
            total += res.real
        else:
            total += 2.0 * res.real
    return total


def _asymptotic(alpha, rho, x, tol, max_terms=400):
    """E_{a,b}(-x) for large x > 0: algebraic expansion plus pole residues."""
    x = np.asarray(x, dtype=float)
    logx = np.log(x)
    total = _residues(alpha, rho, x)
    if float(alpha).is_integer() and float(rho).is_integer():
        # 1/Gamma(rho - alpha*k) vanishes for all k >= rho/alpha: finite sum
        for k in range(1, int(np.ceil(rho / alpha))):
            total = total + (-1.0) ** (k + 1) * x ** (-k) * special.rgamma(rho - alpha * k)
        return total, 8.0 * _EPS * _scale(total)
    prev = np.full(x.shape, np.inf)
    err = np.full(x.shape, np.inf)
    active = np.ones(x.shape, dtype=bool)
    for k in range(1, max_terms + 1):
        arg = rho - alpha * k
        lg, sg = _log_abs_rgamma(arg)
        # |1/Gamma(-y)| <= Gamma(1+y)/pi; the envelope drives the stopping rule
        # because the actual coefficients dip near the poles of Gamma
        lenv = special.gammaln(1.0 - arg) - math.log(math.pi) if arg <= 0 else lg
        env = np.exp(lenv - k * logx)
        growing = active & (env >= prev)
        err = np.where(growing, np.minimum(err, prev), err)
        active &= ~growing
        term = (1.0 if k % 2 else -1.0) * sg * np.exp(lg - k * logx)
        total = np.where(active, total + term, total)
        small = active & (env <= 1e-3 * tol * _scale(total))
        err = np.where(small, env, err)
        active &= ~small
        prev = np.where(active, env, prev)
        if not active.any():
            break
    err = np.where(active, prev, err)
    return total, err


def _contour_talbot(alpha, rho, x, n_nodes=TALBOT_NODES):
    x = np.atleast_1d(np.asarray(x, dtype=float))

    def rule(n):
        s, w = talbot_nodes(1.0, n)
        sa = s**alpha
        vals = (w * np.exp(s) * s ** (alpha - rho))[None, :] / (sa[None, :] + x[:, None])
        return np.sum(np.imag(vals), axis=1)

    coarse = rule(n_nodes - 8)
    fine = rule(n_nodes)
    return fine, np.abs(fine - coarse) + 8.0 * _EPS * _scale(fine)


def _branch_cut_kernel(alpha, rho, x):
    sin_rho = math.sin(math.pi * rho)
    sin_diff = math.sin(math.pi * (alpha - rho))
    ca, sa = math.cos(math.pi * alpha), math.sin(math.pi * alpha)

    def g(r):
        ra = r**alpha
        den = (ra + x * ca) ** 2 + (x * sa) ** 2
        return math.exp(-r) * (ra * sin_rho - x * sin_diff) / (math.pi * den)

    return g


def _contour_branch_cut(alpha, rho, x, tol):
    """E_{a,b}(-x) = residues + integral over the collapsed Hankel contour (a > 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty_like(x)
    err = np.empty_like(x)
    res = _residues(alpha, rho, x)
    expo = alpha - rho
    for i, xi in enumerate(x):
        g = _branch_cut_kernel(alpha, rho, float(xi))
        r0 = float(xi) ** (1.0 / alpha)
        a = min(1.0, 0.5 * r0)
        opts = dict(epsabs=0.01 * tol, epsrel=1e-13, limit=400)
        v0, e0 = integrate.quad(g, 0.0, a, weight="alg", wvar=(expo, 0.0), **opts)
        f = lambda r: g(r) * r**expo  # noqa: E731
        lo = a
        val, abserr = v0, e0
        for b in (r0, r0 + 10.0 + 2.0 * r0):
            if b > lo:
                v, e = integrate.quad(f, lo, b, points=None, **opts)
                val += v
                abserr += e
                lo = b
        v, e = integrate.quad(f, lo, np.inf, **opts)
        out[i] = res[i] + val + v
        err[i] = abserr + e + 8.0 * _EPS * max(1.0, abs(out[i]))
    return out, err


# -- public API ------------------------------------------------------------


def ml_values(alpha: float, rho: float, z, tol: float = DEFAULT_TOL):
    """Vectorised ``E_{alpha,rho}(z)`` for real ``z``.

    Returns ``(values, est_abs_errors, regimes)`` with the shape of ``z``;
    ``regimes`` is an object array of :class:`Regime`.
    """
    MLIndex(alpha, rho)
    if not tol > 0:
        raise InvalidParameter("tol must be > 0")
    z = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z)):
        raise InvalidParameter("z must be finite")
    flat = z.ravel()
    vals = np.empty_like(flat)
    errs = np.empty_like(flat)
    regimes = np.empty(flat.shape, dtype=object)

    taylor = (np.abs(flat) <= 1.0) | (flat > 0)
    # integer alpha and rho: the expansion is a finite exact sum, and it keeps
    # exponentially small values that contour quadrature would bury in round-off
    exact = float(alpha).is_integer() and float(rho).is_integer()
    asym = (~taylor) & ((-flat >= x_switch(alpha)) | exact)
    contour = ~(taylor | asym)

    # signs are summed separately: positive arguments set a much larger scale
    for part in (taylor & (flat < 0), taylor & (flat >= 0)):
        if part.any():
            vals[part], errs[part] = _taylor(alpha, rho, flat[part], tol)
            regimes[part] = Regime.TAYLOR
    if asym.any():
        vals[asym], errs[asym] = _asymptotic(alpha, rho, -flat[asym], tol)
        regimes[asym] = Regime.ASYMPTOTIC
        # for small alpha the switch point is close to the origin, where the
        # asymptotic series may stall; those points go to the contour route
        stalled = asym & (errs > tol * _scale(vals))
        asym &= ~stalled
        contour |= stalled
    if contour.any():
        if alpha <= 1.0:
            v, e = _contour_talbot(alpha, rho, -flat[contour])
        else:
            v, e = _contour_branch_cut(alpha, rho, -flat[contour], tol)
        vals[contour], errs[contour] = v, e
        regimes[contour] = Regime.CONTOUR

    bad = errs > tol * _scale(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonConvergence(
            f"E_{{{alpha},{rho}}}({flat[i]}) reached only {errs[i]:.3g} "
            f"in regime {regimes[i].value} (tol {tol:g})"
        )
    return vals.reshape(z.shape), errs.reshape(z.shape), regimes.reshape(z.shape)


def ml2(index: MLIndex, z: float, tol: float = DEFAULT_TOL) -> EvalReport:
    """Two-parameter Mittag-Leffler function ``E_{alpha,rho}(z)``."""
    v, e, r = ml_values(index.alpha, index.rho, np.array([z], dtype=float), tol)
    return EvalReport(float(v[0]), float(e[0]), r[0])


def ml1(index: MLIndex | float, z: float, tol: float = DEFAULT_TOL) -> EvalReport:
    """One-parameter Mittag-Leffler function ``E_alpha(z)``.

    ``index`` may be an :class:`MLIndex` with ``rho == 1`` or a bare ``alpha``.
    """
    if not isinstance(index, MLIndex):
        index = MLIndex(float(index))
    if index.rho != 1.0:
        raise InvalidParameter("ml1 requires rho == 1; use ml2")
    return ml2(index, z, tol)


def ml_upper_bound(alpha: float, x: float) -> float:
    """``1 / (1 + x / Gamma(1 + alpha))``, an upper bound for ``E_alpha(-x)`` on ``0 < alpha <= 1``."""
    if not (0 < alpha <= 1):
        raise InvalidParameter(f"alpha must lie in (0, 1], got {alpha!r}")
    if not x >= 0:
        raise InvalidParameter(f"x must be >= 0, got {x!r}")
    return 1.0 / (1.0 + x / special.gamma(1.0 + alpha))


# -- multivariate ----------------------------------------------------------


@lru_cache(maxsize=4096)
def _compositions(k: int, m: int) -> np.ndarray:
    """All nonnegative integer vectors of length m summing to k, lexicographic."""
    if m == 1:
        return np.array([[k]], dtype=np.int64)
    rows = []
    # stars and bars: choose m-1 bar positions among k+m-1 slots
    for bars in combinations_with_replacement(range(k + 1), m - 1):
        edges = (0,) + bars + (k,)
        rows.append([edges[i + 1] - edges[i] for i in range(m)])
    out = np.array(rows, dtype=np.int64)
    out.setflags(write=False)
    return out


def ml_multi(
    index: MultiMLIndex,
    ws: Sequence[float],
    tol: float = DEFAULT_TOL,
    max_degree: int = MULTI_MAX_DEGREE,
    bound: float | None = None,
) -> EvalReport:
    """Multivariate Mittag-Leffler function summed by total degree.

    Each degree ``k`` collects the terms with ``k_1 + ... + k_m = k``; all terms
    are formed in log space. The sum stops once the degree sums decay
    geometrically and the dominated tail drops below ``tol``. Raises
    :class:`NonConvergence` when the degree cap is reached or when round-off
    from cancelling terms exceeds ``tol``. A caller that knows ``|value| <= bound``
    a priori lets the sum give up as soon as that is certain to happen.
    """
    if not tol > 0:
        raise InvalidParameter("tol must be > 0")
    ws = np.asarray(ws, dtype=float)
    alphas = np.asarray(index.alphas, dtype=float)
    if ws.shape != alphas.shape:
        raise InvalidParameter(
            f"expected {alphas.size} arguments, got {ws.size}"
        )
    if not np.all(np.isfinite(ws)):
        raise InvalidParameter("arguments must be finite")
    keep = ws != 0.0
    alphas, ws = alphas[keep], ws[keep]
    lam = index.lam
    if ws.size == 0:
        return EvalReport(float(special.rgamma(lam)), 0.0, Regime.TAYLOR)

    logw = np.log(np.abs(ws))
    negw = ws < 0
    total = 0.0
    abs_total = 0.0
    prev_abs = None
    prev_ratio = None
    for k in range(max_degree + 1):
        comps = _compositions(k, ws.size)
        log_multi = special.gammaln(k + 1.0) - np.sum(special.gammaln(comps + 1.0), axis=1)
        arg = comps @ alphas + lam
        lrg, srg = _log_abs_rgamma(arg)
        logt = log_multi + comps @ logw + lrg
        sign = srg * np.where(np.sum(comps[:, negw], axis=1) % 2, -1.0, 1.0)
        mags = np.exp(logt)
        deg_abs = float(np.sum(mags))
        total += float(np.sum(sign * mags))
        abs_total += deg_abs
        round_off = 4.0 * _EPS * abs_total
        # partial sums can dwarf the final value, so a known bound takes precedence
        limit = max(1.0, abs(total) if bound is None else bound)
        if round_off > tol * limit:
            raise NonConvergence(
                f"cancellation in multivariate series (degree {k}, "
                f"absolute sum {abs_total:.3g}) exceeds tolerance {tol:g}"
            )
        settled = float(np.min(arg)) > 2.0
        if prev_abs is not None and settled and prev_abs > 0:
            ratio = deg_abs / prev_abs
            if deg_abs == 0.0:
                return EvalReport(total, round_off, Regime.TAYLOR)
            if ratio < 1.0 and (prev_ratio is None or ratio <= prev_ratio * (1 + 1e-12)):
                tail = deg_abs * ratio / (1.0 - ratio)
                if tail <= 0.1 * tol * max(1.0, abs(total)):
                    return EvalReport(total, tail + round_off, Regime.TAYLOR)
            prev_ratio = ratio
        prev_abs = deg_abs
    raise NonConvergence(f"multivariate series not converged by degree {max_degree}")
