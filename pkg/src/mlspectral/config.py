"""Experiment configuration: JSON documents validated up front.

Every precondition of the library calls an experiment will make is checked
while parsing, and failures carry the line of the offending entry.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from . import group_harmonics as gh
from .errors import ConfigError, MLSpectralError

STUDIES = ("none", "decay", "sobolev", "velocity", "verify")
EQUATIONS = ("heat", "wave", "multiterm")


@dataclass(frozen=True)
class DataConfig:
    kind: str = "random"
    seed: int = 0
    zero_mean: bool = False
    mode: tuple = ()
    entry: tuple = (0, 0)
    value: complex = 1.0
    path: str | None = None
    u1: "DataConfig | None" = None


@dataclass(frozen=True)
class TimeConfig:
    t_min: float
    t_max: float
    samples: int
    spacing: str = "log"
    T: float | None = None

    def samples_array(self) -> np.ndarray:
        if self.spacing == "log":
            return np.logspace(math.log10(self.t_min), math.log10(self.t_max), self.samples)
        return np.linspace(self.t_min, self.t_max, self.samples)


@dataclass(frozen=True)
class StudyConfig:
    kind: str = "none"
    p: float | None = None
    q: float | None = None
    beta: float = 0.0
    case: int | None = None
    branch: int | None = None
    grid_nodes: int = 2000
    grading: str = "auto"
    t_window: float | None = None
    grid_factor: int = 2


@dataclass(frozen=True)
class ExperimentConfig:
    spec: gh.GroupSpec
    equation: str
    alphas: tuple
    gammas: tuple
    data: DataConfig
    time: TimeConfig
    study: StudyConfig
    csv_path: str
    svg_path: str | None = None
    tolerance: float = 1e-12
    source: str = field(default="", repr=False)
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.source.encode("utf-8")).hexdigest()

    @property
    def alpha(self) -> float:
        return self.alphas[0]


class _Locator:
    """Maps dotted key paths to 1-based line numbers of the source text."""

    def __init__(self, text: str):
        self.text = text

    def line(self, *path) -> int | None:
        pos = 0
        for key in path:
            m = re.compile(r'"%s"\s*:' % re.escape(str(key))).search(self.text, pos)
            if m is None:
                return None
            pos = m.start()
        return self.text.count("\n", 0, pos) + 1


class _Section:
    def __init__(self, data, loc: _Locator, path: tuple):
        if not isinstance(data, dict):
            raise ConfigError(f"section {'.'.join(path) or 'root'} must be an object", loc.line(*path))
        self.data = data
        self.loc = loc
        self.path = path

    def fail(self, key, msg):
        raise ConfigError(f"{'.'.join(self.path + (key,))}: {msg}", self.loc.line(*self.path, key))

    def has(self, key):
        return key in self.data

    def allow(self, *keys):
        for key in self.data:
            if key not in keys:
                self.fail(key, f"unknown key; expected one of {', '.join(keys)}")
        return self

    def section(self, key, required=True):
        if key not in self.data:
            if required:
                raise ConfigError(f"missing section {'.'.join(self.path + (key,))}", self.loc.line(*self.path))
            return None
        return _Section(self.data[key], self.loc, self.path + (key,))

    def get(self, key, kind, default=..., check=None, what=None):
        if key not in self.data:
            if default is ...:
                raise ConfigError(
                    f"missing {'.'.join(self.path + (key,))}", self.loc.line(*self.path)
                )
            return default
        v = self.data[key]
        try:
            if kind is float:
                if isinstance(v, bool) or not isinstance(v, (int, float)):
                    raise TypeError
                v = float(v)
                if not math.isfinite(v):
                    raise ValueError
            elif kind is int:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise TypeError
            elif kind is bool:
                if not isinstance(v, bool):
                    raise TypeError
            elif kind is str:
                if not isinstance(v, str):
                    raise TypeError
            elif kind is list:
                if not isinstance(v, list):
                    raise TypeError
        except (TypeError, ValueError):
            self.fail(key, f"expected {kind.__name__}, got {v!r}")
        if check is not None and not check(v):
            self.fail(key, what or f"invalid value {v!r}")
        return v


def _float_list(sec: _Section, key, default=...):
    vals = sec.get(key, list, default)
    if vals is default:
        return vals
    if not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vals):
        sec.fail(key, "expected a list of numbers")
    return tuple(float(x) for x in vals)


def _group(sec: _Section) -> gh.GroupSpec:
    sec.allow("name", "operator", "n", "truncation", "l_max")
    name = sec.get("name", str, check=lambda v: v.lower() in ("torus", "su2"), what="must be torus or su2").lower()
    op = sec.get("operator", str, "Laplacian", check=lambda v: v in ("Laplacian", "SubLaplacian"),
                 what="must be Laplacian or SubLaplacian")
    if name == "torus":
        if op != "Laplacian":
            sec.fail("operator", "the sub-Laplacian is only available on su2")
        n = sec.get("n", int, check=lambda v: v >= 1, what="must be a positive integer")
        trunc = sec.get("truncation", int, check=lambda v: v >= 1, what="must be a positive integer")
        return gh.GroupSpec.torus(n, trunc)
    if sec.has("l_max"):
        l_max = sec.get("l_max", float, check=lambda v: v > 0 and float(2 * v).is_integer(),
                        what="must be a positive multiple of 1/2")
        trunc = int(round(2 * l_max))
    else:
        trunc = sec.get("truncation", int, check=lambda v: v >= 1, what="must be a positive integer")
    return gh.GroupSpec.su2(trunc, op)


def _equation(sec: _Section):
    sec.allow("type", "alphas", "gammas")
    kind = sec.get("type", str, check=lambda v: v in EQUATIONS, what=f"must be one of {EQUATIONS}")
    alphas = _float_list(sec, "alphas")
    gammas = _float_list(sec, "gammas", ())
    if not alphas:
        sec.fail("alphas", "needs at least one order")
    if kind == "heat":
        if len(alphas) != 1 or not 0 < alphas[0] <= 1:
            sec.fail("alphas", "heat needs a single order in (0, 1]")
    elif kind == "wave":
        if len(alphas) != 1 or not 1 <= alphas[0] <= 2:
            sec.fail("alphas", "wave needs a single order in [1, 2]")
    else:
        if len(alphas) < 2:
            sec.fail("alphas", "multiterm needs alpha_0 and at least one lower order")
        if not (alphas[0] <= 1 and alphas[-1] > 0 and all(a > b for a, b in zip(alphas, alphas[1:]))):
            sec.fail("alphas", "orders must satisfy 1 >= a0 > a1 > ... > am > 0")
        if len(gammas) != len(alphas) - 1:
            sec.fail("gammas", f"expected {len(alphas) - 1} coefficients")
        if any(g <= 0 for g in gammas):
            sec.fail("gammas", "coefficients must be > 0")
    return kind, alphas, gammas


def _data(sec: _Section, spec: gh.GroupSpec, nested=False) -> DataConfig:
    keys = ("kind", "seed", "zero_mean", "mode", "entry", "value", "path")
    sec.allow(*(keys if nested else keys + ("u1",)))
    kind = sec.get("kind", str, "random", check=lambda v: v in ("random", "single_mode", "file", "zero"),
                   what="must be random, single_mode, file or zero")
    seed = sec.get("seed", int, 0, check=lambda v: v >= 0, what="must be a nonnegative integer")
    zero_mean = sec.get("zero_mean", bool, False)
    mode, entry, value, path = (), (0, 0), 1.0, None
    if kind == "single_mode":
        mode = tuple(sec.get("mode", list))
        if not all(isinstance(x, int) and not isinstance(x, bool) for x in mode):
            sec.fail("mode", "expected a list of integers")
        dual = {p.index: p for p in gh.enumerate_dual(spec)}
        if mode not in dual:
            sec.fail("mode", f"{list(mode)} is not a dual point within the truncation")
        entry = tuple(sec.get("entry", list, [0, 0]))
        d = dual[mode].dim
        if len(entry) != 2 or not all(isinstance(x, int) and 0 <= x < d for x in entry):
            sec.fail("entry", f"expected [i, j] with 0 <= i, j < {d}")
        value = sec.get("value", float, 1.0)
    elif kind == "file":
        path = sec.get("path", str)
    u1 = None
    if not nested and sec.has("u1"):
        u1 = _data(sec.section("u1"), spec, nested=True)
    return DataConfig(kind, seed, zero_mean, mode, entry, value, path, u1)


def _time(sec: _Section, equation: str) -> TimeConfig:
    sec.allow("t_min", "t_max", "samples", "spacing", "T")
    t_min = sec.get("t_min", float, check=lambda v: v > 0, what="must be > 0")
    t_max = sec.get("t_max", float, check=lambda v: v > t_min, what="must exceed t_min")
    samples = sec.get("samples", int, check=lambda v: v >= 2, what="must be an integer >= 2")
    spacing = sec.get("spacing", str, "log", check=lambda v: v in ("log", "linear"), what="must be log or linear")
    T = sec.get("T", float, None, check=lambda v: v > 0, what="must be > 0")
    if equation == "multiterm":
        if T is None:
            raise ConfigError("time.T is required for multiterm problems", sec.loc.line("time"))
        if t_max > T:
            sec.fail("t_max", f"must not exceed T = {T}")
    return TimeConfig(t_min, t_max, samples, spacing, T)


def _study(sec: _Section | None, spec, equation, alphas, time: TimeConfig) -> StudyConfig:
    if sec is None:
        return StudyConfig()
    sec.allow("kind", "p", "q", "grid_factor", "beta", "case", "branch", "grid_nodes", "grading", "t_window")
    kind = sec.get("kind", str, check=lambda v: v in STUDIES, what=f"must be one of {STUDIES}")
    if kind == "none":
        return StudyConfig()
    if kind == "decay":
        if equation != "heat":
            sec.fail("kind", "decay studies need a heat equation")
        p = sec.get("p", float, check=lambda v: 1 < v <= 2, what="must lie in (1, 2]")
        q = sec.get("q", float, check=lambda v: 2 <= v, what="must lie in [2, inf)")
        from .estimates import counting_exponent

        lam = counting_exponent(spec)
        if 1.0 / lam < 1.0 / p - 1.0 / q - 1e-12:
            sec.fail("q", f"admissibility 1/lambda >= 1/p - 1/q fails (lambda = {lam:g})")
        factor = sec.get("grid_factor", int, 2, check=lambda v: v >= 1, what="must be >= 1")
        lt = np.log10(time.samples_array())
        if np.count_nonzero(lt >= lt.max() - 1.0 - 1e-12) < 5:
            raise ConfigError("decay fit window (last decade) holds fewer than 5 samples", sec.loc.line("time"))
        return StudyConfig("decay", p=p, q=q, grid_factor=factor)
    if kind == "sobolev":
        beta = sec.get("beta", float, 0.0, check=lambda v: v >= 0, what="must be >= 0")
        if equation == "heat":
            sec.fail("kind", "sobolev studies need a wave or multiterm equation")
        n_cases = 6 if equation == "wave" else 2
        case = sec.get("case", int, check=lambda v: 1 <= v <= n_cases, what=f"must be in 1..{n_cases}")
        return StudyConfig("sobolev", beta=beta, case=case)
    if kind == "velocity":
        if equation != "wave":
            sec.fail("kind", "velocity studies need a wave equation")
        beta = sec.get("beta", float, 0.0, check=lambda v: v >= 0, what="must be >= 0")
        branch = sec.get("branch", int, check=lambda v: v in (1, 2), what="must be 1 or 2")
        return StudyConfig("velocity", beta=beta, branch=branch)
    nodes = sec.get("grid_nodes", int, 2000, check=lambda v: v >= 5, what="must be an integer >= 5")
    grading = sec.get("grading", str, "auto", check=lambda v: v in ("auto", "uniform", "graded"),
                      what="must be auto, uniform or graded")
    window = sec.get("t_window", float, None, check=lambda v: v >= 0, what="must be >= 0")
    if window is not None and window >= time.t_max:
        sec.fail("t_window", "must be below time.t_max")
    return StudyConfig("verify", grid_nodes=nodes, grading=grading, t_window=window)


def parse_config(text: str, base_dir: Path | str = ".") -> ExperimentConfig:
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc.msg}", exc.lineno) from None
    loc = _Locator(text)
    root = _Section(raw, loc, ()).allow("group", "equation", "data", "time", "study", "output")
    try:
        spec = _group(root.section("group"))
        equation, alphas, gammas = _equation(root.section("equation"))
        data = _data(root.section("data"), spec)
        if equation != "wave" and data.u1 is not None:
            raise ConfigError("data.u1 only applies to wave problems", loc.line("data", "u1"))
        time = _time(root.section("time"), equation)
        study = _study(root.section("study", required=False), spec, equation, alphas, time)
        if study.kind == "decay" and (data.kind != "random" or not data.zero_mean):
            raise ConfigError("decay studies draw seeded zero-mean data: set data.kind random and "
                              "data.zero_mean true", loc.line("data"))
        out = root.section("output").allow("csv_path", "svg_path", "tolerance")
        csv_path = out.get("csv_path", str)
        svg_path = out.get("svg_path", str, None)
        tol = out.get("tolerance", float, 1e-12, check=lambda v: 0 < v < 1, what="must lie in (0, 1)")
    except ConfigError:
        raise
    except MLSpectralError as exc:
        raise ConfigError(str(exc)) from None
    return ExperimentConfig(spec, equation, alphas, gammas, data, time, study, csv_path, svg_path, tol,
                            text, Path(base_dir))


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, path.parent)


def build_field(cfg: ExperimentConfig, data: DataConfig) -> gh.SpectralField:
    from .estimates import random_data

    spec = cfg.spec
    if data.kind == "random":
        return random_data(spec, data.seed, data.zero_mean)
    if data.kind == "zero":
        return gh.SpectralField.zeros(spec)
    if data.kind == "single_mode":
        i, j = data.entry
        return gh.basis_field(spec, data.mode, i, j, data.value)
    p = Path(data.path)
    if not p.is_absolute():
        p = cfg.base_dir / p
    try:
        F = gh.loads_field(p.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ConfigError(f"cannot read data file {p}: {exc.strerror}") from None
    if F.spec != spec:
        raise ConfigError(f"data file {p} holds a field for {F.spec.label()}, not {spec.label()}")
    return F


def initial_data(cfg: ExperimentConfig):
    u0 = build_field(cfg, cfg.data)
    if cfg.equation != "wave":
        return u0, None
    if cfg.data.u1 is not None:
        return u0, build_field(cfg, cfg.data.u1)
    if cfg.data.kind == "random":
        return u0, build_field(cfg, DataConfig("random", cfg.data.seed + 1, cfg.data.zero_mean))
    return u0, gh.SpectralField.zeros(cfg.spec)


def to_jsonable(obj: Any):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(type(obj))
