"""Harmonic analysis on the torus T^n and on SU(2).

Conventions
-----------
* Fourier coefficients: ``F(xi)[i, j] = int f(x) conj(xi(x)[j, i]) dx`` with
  normalised Haar measure; inversion ``f(x) = sum d_xi tr(xi(x) F(xi))``.
* SU(2) is parametrised by zyz Euler angles ``(a, b, c)`` with ``a`` in
  [0, 2pi), ``b`` in [0, pi], ``c`` in [0, 4pi); matrix elements are
  ``D^l_{m'm} = exp(-i m' a) d^l_{m'm}(b) exp(-i m c)``, rows and columns
  ordered by ascending weight ``m = -l, ..., l``.
* Row ``i`` of ``F(xi)`` carries the operator eigenvalue ``mu_i``. For the
  sub-Laplacian ``-X^2 - Y^2`` on SU(2) this is ``l(l+1) - m_i^2``.
* Half-integer spins are stored as ``two_l = 2l``.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from .errors import InvalidParameter, ResolutionTooLow, TruncationInsufficient


class Operator(str, enum.Enum):
    LAPLACIAN = "Laplacian"
    SUBLAPLACIAN = "SubLaplacian"


@dataclass(frozen=True)
class GroupSpec:
    """``group`` is ``"torus"`` (with ``n``) or ``"su2"``.

    ``truncation`` bounds ``|m|_inf`` on the torus and ``2l`` on SU(2).
    """

    group: str
    truncation: int
    operator: Operator = Operator.LAPLACIAN
    n: int = 1

    def __post_init__(self):
        group = str(self.group).lower()
        object.__setattr__(self, "group", group)
        object.__setattr__(self, "operator", Operator(self.operator))
        if group not in ("torus", "su2"):
            raise InvalidParameter(f"unknown group {self.group!r}")
        if int(self.truncation) != self.truncation or self.truncation < 1:
            raise InvalidParameter("truncation must be a positive integer")
        if group == "torus":
            if int(self.n) != self.n or self.n < 1:
                raise InvalidParameter("torus dimension must be a positive integer")
            if self.operator is Operator.SUBLAPLACIAN:
                raise InvalidParameter("the sub-Laplacian is only available on SU(2)")
        else:
            object.__setattr__(self, "n", 3)

    @classmethod
    def torus(cls, n: int, truncation: int) -> "GroupSpec":
        return cls("torus", truncation, Operator.LAPLACIAN, n)

    @classmethod
    def su2(cls, truncation: int, operator=Operator.LAPLACIAN) -> "GroupSpec":
        return cls("su2", truncation, operator)

    @property
    def is_torus(self) -> bool:
        return self.group == "torus"

    def label(self) -> str:
        if self.is_torus:
            return f"torus(n={self.n}) {self.operator.value} truncation={self.truncation}"
        return f"su2 {self.operator.value} truncation={self.truncation}"


@dataclass(frozen=True)
class DualPoint:
    index: tuple[int, ...]
    dim: int
    eigenvalues: tuple[float, ...]

    def __post_init__(self):
        if self.dim < 1 or len(self.eigenvalues) != self.dim:
            raise InvalidParameter("eigenvalue count must equal the dimension")
        if any(mu < 0 for mu in self.eigenvalues):
            raise InvalidParameter("eigenvalues must be nonnegative")


def su2_weights(two_l: int) -> np.ndarray:
    """Weights ``m = -l, ..., l`` in ascending order."""
    return np.arange(two_l + 1) - two_l / 2.0


def _su2_eigenvalues(two_l: int, operator: Operator) -> tuple[float, ...]:
    l = two_l / 2.0
    cas = l * (l + 1.0)
    if operator is Operator.LAPLACIAN:
        return (cas,) * (two_l + 1)
    return tuple(float(cas - m * m) for m in su2_weights(two_l))


@lru_cache(maxsize=64)
def _enumerate(spec: GroupSpec) -> tuple[DualPoint, ...]:
    if spec.is_torus:
        rng = range(-spec.truncation, spec.truncation + 1)
        return tuple(
            DualPoint(m, 1, (float(sum(k * k for k in m)),))
            for m in itertools.product(rng, repeat=spec.n)
        )
    return tuple(
        DualPoint((tl,), tl + 1, _su2_eigenvalues(tl, spec.operator))
        for tl in range(spec.truncation + 1)
    )


def enumerate_dual(spec: GroupSpec) -> tuple[DualPoint, ...]:
    """Dual points within the truncation, in lexicographic index order."""
    return _enumerate(spec)


# -- spin matrices -----------------------------------------------------------


def spin_matrices(two_l: int):
    """Hermitian ``(Jx, Jy, Jz)`` of the spin-l representation in the ascending weight basis."""
    m = su2_weights(two_l)
    l = two_l / 2.0
    # J+ |m> = sqrt(l(l+1) - m(m+1)) |m+1>
    up = np.sqrt(np.maximum(l * (l + 1) - m[:-1] * (m[:-1] + 1), 0.0))
    jp = np.diag(up, -1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2.0
    jy = (jp - jm) / 2.0j
    jz = np.diag(m).astype(complex)
    return jx, jy, jz


def sublaplacian_oracle(two_l: int) -> np.ndarray:
    """Eigenvalues of ``-X^2 - Y^2`` in the spin-l representation, by diagonalisation."""
    jx, jy, _ = spin_matrices(two_l)
    return np.sort(np.linalg.eigvalsh(jx @ jx + jy @ jy))


@lru_cache(maxsize=256)
def _jy_eig(two_l: int):
    _, jy, _ = spin_matrices(two_l)
    lam, vec = np.linalg.eigh(jy)
    return lam, vec


def wigner_small_d(two_l: int, beta) -> np.ndarray:
    """``d^l(beta) = exp(-i beta Jy)``, shape ``beta.shape + (2l+1, 2l+1)``."""
    lam, vec = _jy_eig(two_l)
    beta = np.asarray(beta, dtype=float)
    phase = np.exp(-1j * beta[..., None] * lam)
    d = np.einsum("ik,...k,jk->...ij", vec, phase, vec.conj())
    return d.real


def wigner_D(two_l: int, a, b, c) -> np.ndarray:
    """``D^l_{m'm}(a, b, c)`` for broadcastable angle arrays."""
    m = su2_weights(two_l)
    a, b, c = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (a, b, c)))
    d = wigner_small_d(two_l, b)
    left = np.exp(-1j * a[..., None] * m)
    right = np.exp(-1j * c[..., None] * m)
    return left[..., :, None] * d * right[..., None, :]


# -- quadrature grids --------------------------------------------------------


def nyquist_size(spec: GroupSpec) -> tuple[int, ...]:
    """Smallest grid shape for which the transforms are exact on the truncation."""
    t = spec.truncation
    if spec.is_torus:
        return (2 * t + 1,) * spec.n
    return (2 * t + 1, t + 1, 2 * t + 1)


@dataclass(frozen=True, eq=False)
class GroupGrid:
    """Quadrature grid with normalised Haar weights.

    Torus: ``shape = (N,) * n`` equispaced points per axis. SU(2):
    ``shape = (Na, Nb, Nc)`` with Gauss-Legendre nodes in ``cos b``.
    """

    spec: GroupSpec
    shape: tuple[int, ...]
    weights: np.ndarray = field(repr=False)
    axes: tuple[np.ndarray, ...] = field(repr=False)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")


@lru_cache(maxsize=32)
def make_grid(spec: GroupSpec, shape: tuple[int, ...] | None = None) -> GroupGrid:
    shape = tuple(int(s) for s in (shape or nyquist_size(spec)))
    if spec.is_torus:
        if len(shape) != spec.n:
            raise InvalidParameter(f"torus grid needs {spec.n} axes, got {len(shape)}")
        axes = tuple(2 * np.pi * np.arange(s) / s for s in shape)
        w = np.full(int(np.prod(shape)), 1.0 / np.prod(shape))
    else:
        if len(shape) != 3:
            raise InvalidParameter("SU(2) grid shape is (Na, Nb, Nc)")
        na, nb, nc = shape
        x, wx = np.polynomial.legendre.leggauss(nb)
        # descending x gives ascending b
        b = np.arccos(x[::-1])
        wb = wx[::-1] / 2.0
        axes = (2 * np.pi * np.arange(na) / na, b, 4 * np.pi * np.arange(nc) / nc)
        w = np.broadcast_to(wb[None, :, None], shape) / (na * nc)
        w = np.ascontiguousarray(w).ravel()
    w.setflags(write=False)
    return GroupGrid(spec, shape, w, axes)


def _check_resolution(grid: GroupGrid):
    need = nyquist_size(grid.spec)
    if any(g < n for g, n in zip(grid.shape, need)):
        raise ResolutionTooLow(
            f"grid {grid.shape} under-resolves truncation {grid.spec.truncation}; need >= {need}"
        )


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: GroupGrid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=complex).reshape(-1)
        if s.size != self.grid.size:
            raise InvalidParameter(f"{s.size} samples for a grid of {self.grid.size} nodes")
        object.__setattr__(self, "samples", s)

    @property
    def spec(self) -> GroupSpec:
        return self.grid.spec

    @property
    def weights(self) -> np.ndarray:
        return self.grid.weights

    @classmethod
    def from_callable(cls, grid: GroupGrid, func) -> "GridFunction":
        """Sample ``func(*mesh)``; mesh axes are torus angles or SU(2) Euler angles."""
        vals = func(*grid.mesh())
        return cls(grid, np.broadcast_to(vals, grid.shape))


# -- spectral fields ---------------------------------------------------------


@lru_cache(maxsize=64)
def _layout(spec: GroupSpec):
    dual = enumerate_dual(spec)
    dims = np.array([p.dim for p in dual])
    sizes = dims * dims
    offsets = np.concatenate([[0], np.cumsum(sizes)])
    # per-entry eigenvalue (row index) and dimension
    mu = np.concatenate([np.repeat(np.asarray(p.eigenvalues), p.dim) for p in dual])
    dim_flat = np.repeat(dims, sizes).astype(float)
    for a in (offsets, mu, dim_flat):
        a.setflags(write=False)
    return dual, offsets, mu, dim_flat


@dataclass(frozen=True, eq=False)
class SpectralField:
    """Matrix-valued Fourier coefficients stored as one flat complex vector.

    Blocks follow :func:`enumerate_dual`; each ``d x d`` block is row-major.
    """

    spec: GroupSpec
    data: np.ndarray = field(repr=False)

    def __post_init__(self):
        d = np.asarray(self.data, dtype=complex).reshape(-1)
        _, offsets, _, _ = _layout(self.spec)
        if d.size != offsets[-1]:
            raise InvalidParameter(f"expected {offsets[-1]} coefficients, got {d.size}")
        object.__setattr__(self, "data", d)

    @classmethod
    def zeros(cls, spec: GroupSpec) -> "SpectralField":
        return cls(spec, np.zeros(_layout(spec)[1][-1], dtype=complex))

    @property
    def dual(self) -> tuple[DualPoint, ...]:
        return _layout(self.spec)[0]

    @property
    def entry_eigenvalues(self) -> np.ndarray:
        """Eigenvalue attached to every stored entry (its row's ``mu_i``)."""
        return _layout(self.spec)[2]

    @property
    def entry_dims(self) -> np.ndarray:
        return _layout(self.spec)[3]

    def block(self, k: int) -> np.ndarray:
        _, offsets, _, _ = _layout(self.spec)
        d = self.dual[k].dim
        return self.data[offsets[k] : offsets[k + 1]].reshape(d, d)

    def blocks(self):
        return [self.block(k) for k in range(len(self.dual))]

    def with_data(self, data) -> "SpectralField":
        return SpectralField(self.spec, data)

    def index_of(self, index: Sequence[int]) -> int:
        index = tuple(index)
        for k, p in enumerate(self.dual):
            if p.index == index:
                return k
        raise KeyError(index)


def basis_field(spec: GroupSpec, index, i: int, j: int, value: complex = 1.0) -> SpectralField:
    """Field with a single nonzero entry ``value`` at block ``index``, entry (i, j)."""
    f = SpectralField.zeros(spec)
    data = f.data.copy()
    k = f.index_of(index)
    _, offsets, _, _ = _layout(spec)
    d = f.dual[k].dim
    data[offsets[k] + i * d + j] = value
    return SpectralField(spec, data)


def random_field(spec: GroupSpec, rng: np.random.Generator, scale: float = 1.0) -> SpectralField:
    n = _layout(spec)[1][-1]
    return SpectralField(spec, scale * (rng.standard_normal(n) + 1j * rng.standard_normal(n)))


# -- transforms --------------------------------------------------------------


@lru_cache(maxsize=16)
def _su2_tables(grid: GroupGrid):
    """Per band: ``D^l`` at all grid nodes, shape ``(nodes, d, d)``."""
    a, b, c = grid.mesh()
    a, b, c = a.ravel(), b.ravel(), c.ravel()
    return tuple(wigner_D(tl, a, b, c) for tl in range(grid.spec.truncation + 1))


def _torus_slices(spec: GroupSpec, shape):
    rng = np.arange(-spec.truncation, spec.truncation + 1)
    idx = [np.mod(rng, s) for s in shape]
    return np.ix_(*idx)


def forward_transform(f: GridFunction) -> SpectralField:
    grid = f.grid
    spec = grid.spec
    _check_resolution(grid)
    if spec.is_torus:
        full = np.fft.fftn(f.samples.reshape(grid.shape)) / grid.size
        coeffs = full[_torus_slices(spec, grid.shape)]
        return SpectralField(spec, coeffs.reshape(-1))
    fw = f.samples * grid.weights
    parts = []
    for D in _su2_tables(grid):
        # F[i, j] = sum_x f w conj(D[x, j, i])
        parts.append(np.einsum("x,xji->ij", fw, D.conj()).reshape(-1))
    return SpectralField(spec, np.concatenate(parts))


def inverse_transform(F: SpectralField, grid: GroupGrid | None = None) -> GridFunction:
    spec = F.spec
    grid = grid or make_grid(spec)
    if grid.spec != spec:
        raise InvalidParameter("grid and field belong to different specs")
    _check_resolution(grid)
    if spec.is_torus:
        full = np.zeros(grid.shape, dtype=complex)
        side = 2 * spec.truncation + 1
        full[_torus_slices(spec, grid.shape)] = F.data.reshape((side,) * spec.n)
        return GridFunction(grid, np.fft.ifftn(full) * grid.size)
    out = np.zeros(grid.size, dtype=complex)
    for k, D in enumerate(_su2_tables(grid)):
        block = F.block(k)
        # d * tr(D(x) F) = d * sum_{a,b} D[x, a, b] F[b, a]
        out += block.shape[0] * np.einsum("xab,ba->x", D, block)
    return GridFunction(grid, out)


# -- norms ---------------------------------------------------------------------


def plancherel_norm(F: SpectralField) -> float:
    return float(np.sqrt(np.sum(F.entry_dims * np.abs(F.data) ** 2)))


def sobolev_norm(F: SpectralField, beta: float) -> float:
    """``(sum d sum_ij (1 + mu_i)^beta |F_ij|^2)^(1/2)``."""
    w = (1.0 + F.entry_eigenvalues) ** beta
    return float(np.sqrt(np.sum(F.entry_dims * w * np.abs(F.data) ** 2)))


def linf_dual_norm(F: SpectralField) -> float:
    """``sup_xi d^(-1/2) ||F(xi)||_HS``."""
    _, offsets, _, _ = _layout(F.spec)
    best = 0.0
    for k, p in enumerate(F.dual):
        hs = np.linalg.norm(F.data[offsets[k] : offsets[k + 1]])
        best = max(best, hs / math.sqrt(p.dim))
    return float(best)


def lq_norm(f: GridFunction, q: float) -> float:
    """Discrete ``L^q`` norm with the grid's normalised Haar weights; ``q = inf`` allowed."""
    if not q >= 1:
        raise InvalidParameter(f"q must be >= 1, got {q!r}")
    a = np.abs(f.samples)
    if np.isinf(q):
        return float(np.max(a))
    return float(np.sum(f.weights * a**q) ** (1.0 / q))


# -- spectral counting ---------------------------------------------------------


def counting_limit(spec: GroupSpec) -> float:
    """Smallest eigenvalue outside the truncation; counts are exact for ``s`` up to it."""
    t = spec.truncation
    if spec.is_torus:
        return float((t + 1) ** 2)
    l_next = (t + 1) / 2.0
    if spec.operator is Operator.LAPLACIAN:
        return l_next * (l_next + 1.0)
    return l_next


def counting_function(spec: GroupSpec, s: float) -> int:
    """``sum_xi d_xi #{i : mu_i < s}`` over the truncated dual."""
    if not s > 0:
        raise InvalidParameter(f"s must be > 0, got {s!r}")
    if s > counting_limit(spec):
        raise TruncationInsufficient(
            f"s={s} exceeds {counting_limit(spec)}, the first eigenvalue beyond the truncation"
        )
    if spec.is_torus:
        return _torus_count(spec.n, spec.truncation, s)
    total = 0
    for tl in range(spec.truncation + 1):
        l = tl / 2.0
        cas = l * (l + 1.0)
        if spec.operator is Operator.LAPLACIAN:
            if cas < s:
                total += (tl + 1) ** 2
            continue
        if cas - l * l >= s:
            # the band minimum l grows with l; later bands contribute nothing
            break
        m = su2_weights(tl)
        total += (tl + 1) * int(np.count_nonzero(cas - m * m < s))
    return total


def _torus_count(n: int, trunc: int, s: float) -> int:
    vmax = int(math.ceil(s)) - 1  # integer eigenvalues below s
    k = np.arange(0, min(trunc, math.isqrt(max(vmax, 0))) + 1)
    one = np.zeros(vmax + 1, dtype=np.int64)
    one[k * k] = np.where(k == 0, 1, 2)
    acc = one
    for _ in range(n - 1):
        acc = np.convolve(acc, one)[: vmax + 1]
    return int(acc.sum())


# -- serialisation -------------------------------------------------------------

_HEADER = "# mlspectral SpectralField v1"


def _fmt(x: float) -> str:
    return repr(float(x))


def dumps_field(F: SpectralField) -> str:
    spec = F.spec
    lines = [
        _HEADER,
        f"# group {spec.group}",
        f"# n {spec.n}",
        f"# operator {spec.operator.value}",
        f"# truncation {spec.truncation}",
        "index\ti\tj\tre\tim",
    ]
    for k, p in enumerate(F.dual):
        block = F.block(k)
        label = ",".join(str(v) for v in p.index)
        for i in range(p.dim):
            for j in range(p.dim):
                z = block[i, j]
                lines.append(f"{label}\t{i}\t{j}\t{_fmt(z.real)}\t{_fmt(z.imag)}")
    return "\n".join(lines) + "\n"


def loads_field(text: str) -> SpectralField:
    lines = text.splitlines()
    if not lines or lines[0] != _HEADER:
        raise InvalidParameter("not a serialised SpectralField")
    meta = {}
    body_start = None
    for no, line in enumerate(lines[1:], start=1):
        if line.startswith("# "):
            key, _, val = line[2:].partition(" ")
            meta[key] = val
        else:
            body_start = no + 1  # skip the column header
            break
    try:
        spec = GroupSpec(meta["group"], int(meta["truncation"]), Operator(meta["operator"]), int(meta["n"]))
    except (KeyError, ValueError) as exc:
        raise InvalidParameter(f"bad SpectralField header: {exc}") from exc
    F = SpectralField.zeros(spec)
    data = F.data.copy()
    _, offsets, _, _ = _layout(spec)
    where = {p.index: (k, p.dim) for k, p in enumerate(F.dual)}
    for line in lines[body_start or len(lines) :]:
        if not line.strip():
            continue
        label, i, j, re, im = line.split("\t")
        k, d = where[tuple(int(v) for v in label.split(","))]
        data[offsets[k] + int(i) * d + int(j)] = complex(float(re), float(im))
    return SpectralField(spec, data)
