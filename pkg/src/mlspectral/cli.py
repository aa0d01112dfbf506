"""Command-line front end: ``mlspectral ml-eval | run | verify | presets``.

Exit codes: 0 success, 2 parameter or config error, 3 numerical
non-convergence, 4 study criterion failed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from . import caputo_oracle as co
from . import config as cf
from . import estimates as es
from . import group_harmonics as gh
from . import ml_special as ml
from . import propagators as pr
from .errors import ConfigError, MLSpectralError, NonConvergence

EXIT_OK, EXIT_PARAM, EXIT_NONCONV, EXIT_CRITERION = 0, 2, 3, 4
VERIFY_SLACK = 0.2
ANALYTIC_RESIDUAL = 1e-10


# -- output helpers --------------------------------------------------------------


def fmt(x) -> str:
    """17 significant digits: enough to round-trip any double."""
    if isinstance(x, (str, bool)):
        return str(x)
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def thread_count() -> int:
    raw = os.environ.get("MLSPECTRAL_THREADS", "0").strip() or "0"
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"MLSPECTRAL_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ConfigError("MLSPECTRAL_THREADS must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


class _Pool:
    """Order-preserving map; work items are fixed, so results do not depend on the thread count."""

    def __init__(self, n):
        self.n = n
        self.ex = ThreadPoolExecutor(n) if n > 1 else None

    def map(self, fn, items):
        if self.ex is None:
            return list(map(fn, items))
        return list(self.ex.map(fn, items))

    def close(self):
        if self.ex is not None:
            self.ex.shutdown()


# -- ml-eval ---------------------------------------------------------------------


def cmd_ml_eval(args, out=None) -> int:
    out = out or sys.stdout
    if args.one is not None:
        alpha, rho = args.one, 1.0
    else:
        alpha, rho = args.two
    if args.at is not None:
        xs = np.asarray(args.at, dtype=float)
    else:
        if args.range is None:
            raise ConfigError("give --at X [X ...] or --range A B")
        if args.points < 1:
            raise ConfigError("--points must be >= 1")
        xs = np.linspace(args.range[0], args.range[1], args.points)
    vals, errs, regs = ml.ml_values(alpha, rho, xs, args.tol)
    rows = [(x, v, e, r.value) for x, v, e, r in zip(xs, vals, errs, regs)]
    out.write(csv_text(("x", "value", "est_error", "regime"), rows))
    return EXIT_OK


# -- runs ------------------------------------------------------------------------


@dataclass
class Outcome:
    header: tuple
    rows: list
    passed: bool
    summary: dict
    warnings: list = field(default_factory=list)
    achieved: dict = field(default_factory=dict)
    plot: object = None


def _ml_achieved(cfg: cf.ExperimentConfig, rhos, mus, ts):
    """Largest relative error estimate of the ML factors a run relies on, at the configured tolerance."""
    z = -np.unique(mus)[:, None] * np.asarray(ts)[None, :] ** cfg.alpha
    worst = 0.0
    for rho in rhos:
        v, e, _ = ml.ml_values(cfg.alpha, rho, z, cfg.tolerance)
        worst = max(worst, float(np.max(e / np.maximum(1.0, np.abs(v)))))
    return {"ml_requested": cfg.tolerance, "ml_max_rel_error_estimate": worst}


def _report_rows(rep: es.BoundReport):
    return [(t, l, r, q) for t, l, r, q in rep.ratios]


def _report_summary(rep: es.BoundReport):
    return {
        "label": rep.label,
        "max_ratio": rep.max_ratio,
        "slope_small_t": rep.slope_small_t,
        "slope_large_t": rep.slope_large_t,
        "slope_slack": es.SLOPE_SLACK,
        "passed": rep.passed,
    }


def _run_none(cfg, u0, u1, pool):
    ts = cfg.time.samples_array()
    if cfg.equation == "heat":
        states = pr.heat_evolve_many(pr.HeatProblem(cfg.spec, cfg.alpha, u0), ts)
    elif cfg.equation == "wave":
        states = pr.wave_evolve_many(pr.WaveProblem(cfg.spec, cfg.alpha, u0, u1), ts)
    else:
        p = pr.MultiTermProblem(cfg.spec, cfg.alphas, cfg.gammas, u0)
        states = pr.multiterm_evolve_many(p, ts, cfg.time.T)
    rows = [(t, gh.plancherel_norm(u), gh.linf_dual_norm(u)) for t, u in zip(ts, states)]
    return Outcome(("t", "l2_norm", "linf_dual_norm"), rows, True, {"samples": len(rows)})


def _run_decay(cfg, u0, u1, pool):
    st = cfg.study
    dcfg = es.DecayStudyConfig(cfg.spec, cfg.alpha, st.p, st.q, cfg.time.samples_array(), cfg.data.seed,
                               st.grid_factor)
    res = es.heat_decay_study(dcfg, mapper=pool.map)
    rep = res.report
    passed = res.fitted_slope <= res.predicted_slope + es.SLOPE_SLACK
    summary = {
        "fitted_slope": res.fitted_slope,
        "predicted_slope": res.predicted_slope,
        "slope_slack": es.SLOPE_SLACK,
        "u0_lp_norm": res.u0_norm_p,
        "passed": passed,
    }

    def plot(path):
        from . import plotting

        plotting.decay_plot(path, rep.t, res.norms, res.predicted_slope, f"heat decay, {cfg.spec.label()}")

    out = Outcome(("t", "lhs", "rhs", "ratio"), _report_rows(rep), passed, summary, list(rep.flags),
                  plot=plot)
    out.achieved = _ml_achieved(cfg, (1.0,), u0.entry_eigenvalues, rep.t)
    return out


def _bound_outcome(cfg, rep, mus, rhos):
    def plot(path):
        from . import plotting

        plotting.ratio_plot(path, rep.t, rep.ratio, rep.label)

    out = Outcome(("t", "lhs", "rhs", "ratio"), _report_rows(rep), rep.passed, _report_summary(rep),
                  list(rep.flags), plot=plot)
    if rhos:
        out.achieved = _ml_achieved(cfg, rhos, mus, rep.t)
    return out


def _run_sobolev(cfg, u0, u1, pool):
    st = cfg.study
    ts = cfg.time.samples_array()
    if cfg.equation == "wave":
        p = pr.WaveProblem(cfg.spec, cfg.alpha, u0, u1)
        rep = es.wave_sobolev_check(p, st.beta, st.case, ts)
        return _bound_outcome(cfg, rep, u0.entry_eigenvalues, (1.0, 2.0))
    p = pr.MultiTermProblem(cfg.spec, cfg.alphas, cfg.gammas, u0)
    rep = es.multiterm_bound_check(p, st.beta, st.case, cfg.time.T, ts)
    out = _bound_outcome(cfg, rep, None, ())
    out.achieved = {"multiterm_requested": pr.MULTI_TOL, "talbot_nodes_fallback": 48}
    return out


def _run_velocity(cfg, u0, u1, pool):
    st = cfg.study
    p = pr.WaveProblem(cfg.spec, cfg.alpha, u0, u1)
    rep = es.wave_velocity_check(p, st.beta, st.branch, cfg.time.samples_array())
    return _bound_outcome(cfg, rep, u0.entry_eigenvalues, (1.0, cfg.alpha))


# -- verify ----------------------------------------------------------------------


def verify_plan(cfg: cf.ExperimentConfig):
    """Grid, window and claimed scheme order of the residual check."""
    alpha = cfg.alpha
    st = cfg.study if cfg.study.kind == "verify" else cf.StudyConfig("verify")
    t_end = cfg.time.t_max
    if cfg.equation == "multiterm":
        raise ConfigError("verify supports heat and wave problems")
    if cfg.equation == "wave" and not 1 < alpha < 2:
        raise ConfigError(f"verify needs a wave order strictly inside (1, 2), got {alpha}")
    if cfg.equation == "heat" and alpha < 1:
        graded = st.grading in ("auto", "graded")
        exponent = (2.0 - alpha) / alpha if graded else 1.0
        grid = co.TimeGrid.graded(t_end, st.grid_nodes, max(1.0, exponent))
        order = 2.0 - alpha
    else:
        grid = co.TimeGrid.uniform(t_end, st.grid_nodes)
        order = math.inf if cfg.equation == "heat" else 1.0
    window = st.t_window if st.t_window is not None else (0.0 if cfg.equation == "heat" and alpha == 1 else t_end / 10)
    return grid, window, order


def _verify_mode(cfg, grid, window, mu):
    alpha = cfg.alpha
    if cfg.equation == "heat":
        def sampler(t):
            return pr.heat_factors(alpha, [mu], t)[0]

        return co.order_study(alpha, mu, sampler, grid, 2, None, window)

    def sampler(t):
        A, B, _, _ = pr.wave_factors(alpha, [mu], t)
        return np.stack([A[0], B[0]])

    return co.order_study(alpha, np.array([mu, mu]), sampler, grid, 2, np.array([0.0, 1.0]), window)


def _run_verify(cfg, u0, u1, pool):
    grid, window, order = verify_plan(cfg)
    mus = np.unique(np.concatenate([np.asarray(p.eigenvalues, float) for p in gh.enumerate_dual(cfg.spec)]))
    studies = pool.map(lambda mu: _verify_mode(cfg, grid, window, float(mu)), mus)
    rows = []
    coarse, fine, orders = [], [], []
    for mu, s in zip(mus, studies):
        rc, rf = float(np.max(s.residuals[0])), float(np.max(s.residuals[1]))
        o = float(np.min(s.orders[-1]))
        coarse.append(rc)
        fine.append(rf)
        orders.append(o)
        rows.append((mu, s.n_nodes[0], rc, s.n_nodes[1], rf, o))
    worst = max(fine)
    observed = min(orders)
    if math.isinf(order):
        passed = worst <= ANALYTIC_RESIDUAL
    else:
        passed = observed >= order - VERIFY_SLACK
    summary = {
        "distinct_eigenvalues": int(mus.size),
        "grid": grid.kind.value,
        "grading_exponent": grid.exponent,
        "t_window": window,
        "n_nodes": [int(grid.nodes.size), int(grid.refined().nodes.size)],
        "worst_residual": worst,
        "observed_order": observed,
        "scheme_order": "analytic" if math.isinf(order) else order,
        "order_slack": VERIFY_SLACK,
        "passed": passed,
    }

    def plot(path):
        from . import plotting

        plotting.order_plot(path, mus, coarse, fine, "mode residuals")

    header = ("mu", "n_coarse", "residual_coarse", "n_fine", "residual_fine", "order")
    return Outcome(header, rows, passed, summary, plot=plot)


RUNNERS = {"none": _run_none, "decay": _run_decay, "sobolev": _run_sobolev, "velocity": _run_velocity,
           "verify": _run_verify}


def manifest_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".manifest.json")


def _resolve(path_str, out_dir):
    p = Path(path_str)
    if out_dir is not None:
        return Path(out_dir) / p.name
    return p


def execute(cfg: cf.ExperimentConfig, study_kind=None, out_dir=None, timing=False, log=None) -> int:
    """Run a parsed config; files are written once, after every result is in memory."""
    log = log or sys.stdout
    kind = study_kind or cfg.study.kind
    start = time.perf_counter()
    pool = _Pool(thread_count())
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            u0, u1 = cf.initial_data(cfg)
            outcome = RUNNERS[kind](cfg, u0, u1, pool)
    finally:
        pool.close()
    warn = sorted({str(w.message) for w in caught} | set(outcome.warnings))
    csv_path = _resolve(cfg.csv_path, out_dir)
    svg_path = _resolve(cfg.svg_path, out_dir) if cfg.svg_path else None
    code = EXIT_OK if outcome.passed else EXIT_CRITERION
    manifest = {
        "config_sha256": cfg.sha256,
        "library_version": __version__,
        "group": cfg.spec.label(),
        "equation": cfg.equation,
        "alphas": list(cfg.alphas),
        "gammas": list(cfg.gammas),
        "seed": cfg.data.seed,
        "study": kind,
        "summary": outcome.summary,
        "tolerances": outcome.achieved,
        "warnings": warn,
        "outputs": {"csv": csv_path.name, "svg": svg_path.name if svg_path else None},
        "status": "pass" if outcome.passed else "fail",
        "exit_code": code,
        "wall_clock_s": round(time.perf_counter() - start, 3) if timing else None,
    }
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    data = csv_text(outcome.header, outcome.rows)
    with open(csv_path, "w", encoding="utf-8", newline="") as fh:
        fh.write(data)
    with open(manifest_path(csv_path), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=cf.to_jsonable, allow_nan=True)
        fh.write("\n")
    if svg_path is not None and outcome.plot is not None:
        svg_path.parent.mkdir(parents=True, exist_ok=True)
        outcome.plot(svg_path)
    for key, val in outcome.summary.items():
        log.write(f"{key}: {format(val, '.6g') if isinstance(val, float) else val}\n")
    for w in warn:
        log.write(f"warning: {w}\n")
    log.write(f"status: {manifest['status']}\n")
    return code


# -- presets ---------------------------------------------------------------------


def preset_names():
    root = resources.files("mlspectral") / "presets"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def preset_text(name: str) -> str:
    res = resources.files("mlspectral") / "presets" / f"{name}.json"
    if not res.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(preset_names())}")
    return res.read_text(encoding="utf-8")


def _load(args) -> cf.ExperimentConfig:
    if args.preset:
        return cf.parse_config(preset_text(args.preset))
    if not args.config:
        raise ConfigError("give a config path or --preset NAME")
    return cf.load_config(args.config)


def cmd_run(args) -> int:
    return execute(_load(args), out_dir=args.out_dir, timing=args.timing)


def cmd_verify(args) -> int:
    return execute(_load(args), study_kind="verify", out_dir=args.out_dir, timing=args.timing)


def cmd_presets(args) -> int:
    for name in preset_names():
        print(name)
    return EXIT_OK


# -- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mlspectral", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("ml-eval", help="evaluate Mittag-Leffler functions, CSV to stdout")
    kind = ev.add_mutually_exclusive_group(required=True)
    kind.add_argument("--one", type=float, metavar="ALPHA", help="E_alpha")
    kind.add_argument("--two", type=float, nargs=2, metavar=("ALPHA", "RHO"), help="E_{alpha,rho}")
    where = ev.add_mutually_exclusive_group(required=True)
    where.add_argument("--at", type=float, nargs="+", metavar="X")
    where.add_argument("--range", type=float, nargs=2, metavar=("A", "B"))
    ev.add_argument("--points", type=int, default=50)
    ev.add_argument("--tol", type=float, default=ml.DEFAULT_TOL)
    ev.set_defaults(func=cmd_ml_eval)

    for name, func, hlp in (
        ("run", cmd_run, "run the study of a config"),
        ("verify", cmd_verify, "Caputo residual check of a config's mode equations"),
    ):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("config", nargs="?")
        p.add_argument("--preset", metavar="NAME")
        p.add_argument("--out-dir", metavar="DIR")
        p.add_argument("--timing", action="store_true", help="record wall-clock time in the manifest")
        p.set_defaults(func=func)

    ps = sub.add_parser("presets", help="list shipped presets")
    ps.set_defaults(func=cmd_presets)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NONCONV
    except (ConfigError, MLSpectralError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAM


if __name__ == "__main__":
    sys.exit(main())
