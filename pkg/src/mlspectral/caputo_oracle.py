"""Discrete Riemann-Liouville integrals and Caputo derivatives on time grids.

These operators are deliberately simple (L1-type, O(N^2) history sums) because
their job is to check solver output mode by mode, independently of the
Mittag-Leffler machinery used to produce it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from .errors import InvalidParameter, ResolutionTooLow


# residuals below this are round-off, not discretisation error
EXACT_FLOOR = 1e-11


class GridKind(str, enum.Enum):
    UNIFORM = "Uniform"
    GRADED = "Graded"


@dataclass(frozen=True, eq=False)
class TimeGrid:
    nodes: np.ndarray
    kind: GridKind = GridKind.UNIFORM
    exponent: float = 1.0
    t_start: float = 0.0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ResolutionTooLow("a time grid needs at least 3 nodes")
        if not np.all(np.isfinite(nodes)):
            raise InvalidParameter("time nodes must be finite")
        if nodes[0] != self.t_start:
            raise InvalidParameter("nodes[0] must equal t_start")
        if np.any(np.diff(nodes) <= 0):
            raise InvalidParameter("time nodes must be strictly increasing")
        if self.exponent < 1:
            raise InvalidParameter("grading exponent must be >= 1")

    @classmethod
    def uniform(cls, t_end: float, n_nodes: int) -> "TimeGrid":
        if n_nodes < 3:
            raise ResolutionTooLow("a time grid needs at least 3 nodes")
        if not t_end > 0:
            raise InvalidParameter("t_end must be > 0")
        return cls(np.linspace(0.0, t_end, n_nodes), GridKind.UNIFORM, 1.0)

    @classmethod
    def graded(cls, t_end: float, n_nodes: int, exponent: float) -> "TimeGrid":
        """Nodes ``t_end * (j/N)**exponent``, clustered at the origin."""
        if n_nodes < 3:
            raise ResolutionTooLow("a time grid needs at least 3 nodes")
        if not t_end > 0:
            raise InvalidParameter("t_end must be > 0")
        if exponent < 1:
            raise InvalidParameter("grading exponent must be >= 1")
        s = np.linspace(0.0, 1.0, n_nodes)
        kind = GridKind.UNIFORM if exponent == 1 else GridKind.GRADED
        return cls(t_end * s**exponent, kind, float(exponent))

    @property
    def t_end(self) -> float:
        return float(self.nodes[-1])

    def __len__(self):
        return self.nodes.size

    def refined(self) -> "TimeGrid":
        """Same family with the number of intervals doubled."""
        n = 2 * (self.nodes.size - 1) + 1
        if self.kind is GridKind.UNIFORM:
            return TimeGrid.uniform(self.t_end, n)
        return TimeGrid.graded(self.t_end, n, self.exponent)


@dataclass(frozen=True, eq=False)
class TimeSeries:
    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        vals = np.asarray(self.values)
        if not np.iscomplexobj(vals):
            vals = vals.astype(float)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        # a leading batch axis holds several modes sampled on the same grid
        if vals.ndim not in (1, 2) or vals.shape[-1] != self.grid.nodes.size:
            raise InvalidParameter(
                f"values of shape {vals.shape} for {self.grid.nodes.size} nodes"
            )


def _pow_diff(x, h, p):
    """``x**p - (x - h)**p`` for ``0 < h <= x`` without cancellation."""
    ratio = h / x
    out = np.empty_like(x)
    full = ratio >= 1.0
    out[full] = x[full] ** p
    r = ~full
    out[r] = -(x[r] ** p) * np.expm1(p * np.log1p(-ratio[r]))
    return out


def rl_integral(beta: float, f: TimeSeries) -> TimeSeries:
    """Riemann-Liouville integral of order ``beta`` of the piecewise-linear interpolant."""
    if not beta > 0:
        raise InvalidParameter(f"beta must be > 0, got {beta!r}")
    t = f.grid.nodes
    v = f.values
    out = np.zeros(v.shape, dtype=v.dtype if np.iscomplexobj(v) else float)
    h_all = np.diff(t)
    for n in range(1, t.size):
        a = t[n] - t[:n]  # distance to left ends
        h = h_all[:n]
        b = a - h
        i0 = _pow_diff(a, h, beta) / beta
        # int_b^a u^(beta-1) (a-u) du, split so that tiny intervals stay accurate
        i1 = a * i0 - _pow_diff(a, h, beta + 1.0) / (beta + 1.0)
        w_right = i1 / h
        w_left = i0 - w_right
        out[..., n] = v[..., :n] @ w_left + v[..., 1 : n + 1] @ w_right
    return TimeSeries(f.grid, out / gamma(beta))


def caputo_l1(alpha: float, f: TimeSeries) -> TimeSeries:
    """L1 approximation of the Caputo derivative of order ``alpha`` in (0, 1)."""
    if not 0 < alpha < 1:
        raise InvalidParameter(f"alpha must lie in (0, 1), got {alpha!r}")
    t = f.grid.nodes
    h_all = np.diff(t)
    slopes = np.diff(f.values, axis=-1) / h_all
    out = np.zeros(f.values.shape, dtype=slopes.dtype)
    p = 1.0 - alpha
    for n in range(1, t.size):
        w = _pow_diff(t[n] - t[:n], h_all[:n], p)
        out[..., n] = slopes[..., :n] @ w
    return TimeSeries(f.grid, out / gamma(2.0 - alpha))


def _second_derivative(t, y):
    """Three-point second derivative along the last axis; one-sided at the ends."""
    d2 = np.empty_like(y)

    def stencil(i0):
        h1 = t[i0 + 1] - t[i0]
        h2 = t[i0 + 2] - t[i0 + 1]
        return 2.0 * (
            y[..., i0] / (h1 * (h1 + h2))
            - y[..., i0 + 1] / (h1 * h2)
            + y[..., i0 + 2] / (h2 * (h1 + h2))
        )

    d2[..., 1:-1] = stencil(np.arange(t.size - 2))
    d2[..., 0] = stencil(0)
    d2[..., -1] = stencil(t.size - 3)
    return d2


def caputo_l1_order2(alpha: float, f: TimeSeries, f_prime_0) -> TimeSeries:
    """Caputo derivative of order ``alpha`` in (1, 2).

    ``f - f(0) - t f'(0)`` is integrated with order ``2 - alpha`` and then
    differentiated twice by finite differences. For batched series
    ``f_prime_0`` may be an array with one entry per row.
    """
    if not 1 < alpha < 2:
        raise InvalidParameter(f"alpha must lie in (1, 2), got {alpha!r}")
    t = f.grid.nodes
    v = f.values
    fp = np.asarray(f_prime_0)
    g = v - v[..., :1] - t * fp[..., None] if fp.ndim else v - v[..., :1] - t * fp
    if not np.any(g):
        return TimeSeries(f.grid, np.zeros_like(g))
    integ = rl_integral(2.0 - alpha, TimeSeries(f.grid, g)).values
    return TimeSeries(f.grid, _second_derivative(t, integ))


def _log_derivative(t, u):
    """Backward derivative that is exact for exponentials (log-linear interpolant)."""
    u = np.asarray(u, dtype=complex)
    du = np.full(u.shape, np.nan, dtype=complex)
    h = np.diff(t)
    prev, cur = u[..., :-1], u[..., 1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.log(cur / prev) / h
    ok = (prev != 0) & (cur != 0) & np.isfinite(rate)
    du[..., 1:] = np.where(ok, cur * rate, (cur - prev) / h)
    return du


def mode_residuals(alpha: float, mu, u_hat: TimeSeries, u_prime_0=None) -> np.ndarray:
    """Pointwise ``|D^alpha u + mu u|`` on every node (batched over rows).

    Node 0 is set to 0; for ``alpha`` in (1, 2) the last node, where the
    second difference is one-sided, is set to 0 as well.
    """
    if not 0 < alpha < 2:
        raise InvalidParameter(f"alpha must lie in (0, 2), got {alpha!r}")
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu >= 0)):
        raise InvalidParameter("mu must be >= 0")
    t = u_hat.grid.nodes
    u = u_hat.values
    if alpha < 1:
        d = caputo_l1(alpha, u_hat).values
    elif alpha == 1:
        d = _log_derivative(t, u)
    else:
        if u_prime_0 is None:
            raise InvalidParameter("u_prime_0 is required for alpha in (1, 2)")
        d = caputo_l1_order2(alpha, u_hat, u_prime_0).values
    mu_b = mu[..., None] if mu.ndim else mu
    r = np.abs(d + mu_b * u)
    r[..., 0] = 0.0
    if alpha > 1:
        r[..., -1] = 0.0
    return r


def _backward_difference(t, u):
    d = np.zeros(u.shape, dtype=np.result_type(u, float))
    d[..., 1:] = np.diff(u, axis=-1) / np.diff(t)
    return d


def multiterm_residuals(alphas, gammas, mu, u_hat: TimeSeries) -> np.ndarray:
    """Pointwise ``|D^a0 u + sum_k g_k D^ak u + mu u|``; node 0 is set to 0.

    Orders below one use the L1 scheme; an order equal to one uses the
    backward difference, which is the L1 scheme's limit.
    """
    alphas = [float(a) for a in alphas]
    gammas = [1.0] + [float(g) for g in gammas]
    if len(gammas) != len(alphas):
        raise InvalidParameter("need one coefficient per lower order")
    if any(not 0 < a <= 1 for a in alphas):
        raise InvalidParameter(f"multi-term orders must lie in (0, 1], got {alphas}")
    mu = np.asarray(mu, dtype=float)
    if np.any(~(mu >= 0)):
        raise InvalidParameter("mu must be >= 0")
    t = u_hat.grid.nodes
    u = u_hat.values
    total = (mu[..., None] if mu.ndim else mu) * u
    for a, g in zip(alphas, gammas):
        d = _backward_difference(t, u) if a == 1 else caputo_l1(a, u_hat).values
        total = total + g * d
    r = np.abs(total)
    r[..., 0] = 0.0
    return r


def residual_mode(
    alpha: float,
    mu: float,
    u_hat: TimeSeries,
    u_prime_0=None,
    t_min: float = 0.0,
) -> float:
    """``max |D^alpha u + mu u|`` over interior nodes with ``t >= t_min``.

    ``alpha == 1`` uses the derivative of the piecewise-exponential
    interpolant, which is exact for ``exp(-mu t)`` samples. For ``alpha`` in
    (1, 2) the final node is excluded as well, its stencil being one-sided.
    Batched input returns the maximum over all rows.
    """
    r = mode_residuals(alpha, mu, u_hat, u_prime_0)
    return float(np.max(interior_max(alpha, r, u_hat.grid.nodes, t_min)))


@dataclass(frozen=True)
class OrderStudy:
    """Residual maxima per refinement level; arrays have shape (levels, modes)."""

    n_nodes: tuple[int, ...]
    residuals: np.ndarray
    orders: np.ndarray

    @property
    def observed_order(self) -> float:
        """Worst mode's order between the two finest levels."""
        return float(np.min(self.orders[-1]))


def interior_max(alpha, r, nodes, t_min=0.0):
    mask = (np.arange(nodes.size) > 0) & (nodes >= t_min)
    if alpha > 1:
        mask[-1] = False
    if not mask.any():
        raise ResolutionTooLow(f"no interior nodes with t >= {t_min}")
    return np.max(r[..., mask], axis=-1)


def order_study(alpha, mu, sampler, grid: TimeGrid, levels: int = 2, u_prime_0=None, t_min=0.0):
    """Residuals under repeated halving of the steps starting from ``grid``.

    ``sampler(nodes)`` returns the mode values on the given nodes, optionally
    batched as ``(modes, nodes)`` with ``mu`` of length ``modes``. The
    observed order between consecutive levels is ``log2(r_coarse / r_fine)``.
    """
    if levels < 2:
        raise InvalidParameter("need at least two levels")
    sizes, res = [], []
    g = grid
    for _ in range(levels):
        series = TimeSeries(g, np.asarray(sampler(g.nodes)))
        r = mode_residuals(alpha, mu, series, u_prime_0)
        res.append(np.atleast_1d(interior_max(alpha, r, g.nodes, t_min)))
        sizes.append(len(g))
        if len(res) < levels:
            g = g.refined()
    r = np.asarray(res)
    with np.errstate(divide="ignore", invalid="ignore"):
        orders = np.log2(r[:-1] / r[1:])
    # modes reproduced to round-off (e.g. the constant zero mode) have no
    # measurable order; they count as exact
    exact = (r[:-1] <= EXACT_FLOOR) & (r[1:] <= EXACT_FLOOR)
    orders = np.where(exact, np.inf, orders)
    return OrderStudy(tuple(sizes), r, orders)
