"""Experiment driver CLI.

Subcommands: ``run`` (seeded traces to CSV), ``rates`` (active vs passive
budget sweep with fitted slopes), ``verify`` (statistical acceptance
suites), ``minimax-check`` (lower-bound construction certificates).

Every command is a pure function of (config, seed): per-run streams are
derived from (seed, run_id, iteration, kind) counters, so output files are
byte-identical across invocations and adding replications never perturbs
existing runs.  Config files are plain ``key = value`` lines; any key can be
overridden by the command-line flag of the same name.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .evaluation import excess_risk, fit_rate
from .learner import (
    DEFAULT_BAND_D,
    DEFAULT_LEARNER_K1,
    LearnerConfig,
    run_active,
    run_passive,
)
from .problems import PROBLEM_NAMES, get_problem

RUN_CSV_COLUMNS = (
    "run_id", "seed", "problem", "variant", "budget", "row_kind", "k", "N_k",
    "N_act", "m_hat", "delta_k", "pi_active", "remaining_LB", "excess_risk",
    "termination_reason",
)
RATES_CSV_COLUMNS = (
    "row_kind", "method", "budget", "n_reps", "mean_excess", "stderr",
    "slope", "intercept", "slope_stderr",
)
MINIMAX_CSV_COLUMNS = ("certificate", "quantity", "value", "bound", "passed")


@dataclass(frozen=True)
class ExperimentConfig:
    problem: str = "ramp1d"
    budgets: tuple[int, ...] = (1024,)
    replications: int = 1
    alpha: float = 0.05
    k1: float = DEFAULT_LEARNER_K1
    band_d: float = DEFAULT_BAND_D
    variant: str = "1a"
    seed: int = 0
    out_path: str = "runs.csv"
    jobs: int = 1

    def __post_init__(self):
        if not self.budgets:
            raise ValueError("budgets must be nonempty")
        if tuple(sorted(self.budgets)) != tuple(self.budgets):
            raise ValueError("budgets must be sorted ascending")
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if self.jobs < 1:
            raise ValueError("jobs must be at least 1")

    def learner_config(self, budget: int) -> LearnerConfig:
        return LearnerConfig(budget=budget, alpha=self.alpha, k1=self.k1,
                             band_d=self.band_d, variant=self.variant)


def _fnum(x: float) -> str:
    return format(float(x), ".10g")


def _quad_level(problem) -> int:
    return 13 if problem.dim == 1 else 9


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------

def _one_active_run(args):
    """Worker: rebuild the problem by name so nothing unpicklable crosses."""
    cfg_dict, budget, rep = args
    cfg = ExperimentConfig(**cfg_dict)
    problem = get_problem(cfg.problem)
    run_id = _run_index(cfg, budget, rep)
    trace = run_active(problem, cfg.learner_config(budget), cfg.seed, run_id=run_id)
    risk = excess_risk(trace.final_estimate, problem, _quad_level(problem))
    return budget, rep, trace, risk


def _run_index(cfg: ExperimentConfig, budget: int, rep: int) -> int:
    return cfg.budgets.index(budget) * 100_000 + rep


def _run_label(cfg: ExperimentConfig, budget: int, rep: int) -> str:
    return f"{cfg.problem}-{cfg.variant}-n{budget}-r{rep:04d}"


def cmd_run(cfg: ExperimentConfig) -> list[dict]:
    """Execute the configured runs and write one CSV row per iteration plus
    a summary row per run; deterministic and byte-stable for a fixed seed."""
    work = [(asdict(cfg), b, r) for b in cfg.budgets for r in range(cfg.replications)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_one_active_run, work))
    else:
        results = [_one_active_run(w) for w in work]
    results.sort(key=lambda t: (cfg.budgets.index(t[0]), t[1]))

    rows = []
    for budget, rep, trace, risk in results:
        label = _run_label(cfg, budget, rep)
        base = {"run_id": label, "seed": str(cfg.seed), "problem": cfg.problem,
                "variant": cfg.variant, "budget": str(budget)}
        for it in trace.iterations:
            rows.append(base | {
                "row_kind": "iteration", "k": str(it.k), "N_k": str(it.n_k),
                "N_act": str(it.n_act), "m_hat": str(it.m_hat),
                "delta_k": _fnum(it.delta_k), "pi_active": _fnum(it.pi_active),
                "remaining_LB": str(it.remaining_budget),
                "excess_risk": "", "termination_reason": "",
            })
        rows.append(base | {
            "row_kind": "summary", "k": "", "N_k": "", "N_act": "", "m_hat": "",
            "delta_k": "", "pi_active": _fnum(trace.final_active_mass),
            "remaining_LB": "", "excess_risk": _fnum(risk),
            "termination_reason": trace.termination_reason,
        })
    _write_csv(cfg.out_path, RUN_CSV_COLUMNS, rows)
    return rows


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

def _one_rate_run(args):
    cfg_dict, budget, rep, method = args
    cfg = ExperimentConfig(**cfg_dict)
    problem = get_problem(cfg.problem)
    run_id = _run_index(cfg, budget, rep)
    lcfg = cfg.learner_config(budget)
    if method == "active":
        trace = run_active(problem, lcfg, cfg.seed, run_id=run_id)
        fn = trace.final_estimate
    else:
        fn = run_passive(problem, budget, lcfg, cfg.seed + 1, run_id=run_id)
    return method, budget, rep, excess_risk(fn, problem, _quad_level(problem))


def cmd_rates(cfg: ExperimentConfig) -> dict:
    """Budget sweep for both methods; emits per-budget means and fitted slopes."""
    work = [(asdict(cfg), b, r, meth)
            for meth in ("active", "passive")
            for b in cfg.budgets for r in range(cfg.replications)]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            results = list(pool.map(_one_rate_run, work))
    else:
        results = [_one_rate_run(w) for w in work]

    table: dict[tuple[str, int], list[float]] = {}
    for method, budget, rep, risk in results:
        table.setdefault((method, budget), []).append(risk)

    rows, fits = [], {}
    for method in ("active", "passive"):
        points = []
        for budget in cfg.budgets:
            risks = table[(method, budget)]
            mean = float(np.mean(risks))
            stderr = float(np.std(risks) / math.sqrt(len(risks)))
            rows.append({
                "row_kind": "mean", "method": method, "budget": str(budget),
                "n_reps": str(len(risks)), "mean_excess": _fnum(mean),
                "stderr": _fnum(stderr), "slope": "", "intercept": "",
                "slope_stderr": "",
            })
            points.append((budget, mean))
        if all(r > 0 for _, r in points) and len(points) >= 4:
            fit = fit_rate(points)
            fits[method] = fit
            rows.append({
                "row_kind": "fit", "method": method, "budget": "", "n_reps": "",
                "mean_excess": "", "stderr": "", "slope": _fnum(fit.slope),
                "intercept": _fnum(fit.intercept),
                "slope_stderr": _fnum(fit.stderr),
            })
    _write_csv(cfg.out_path, RATES_CSV_COLUMNS, rows)
    for method, fit in fits.items():
        print(f"{method}: slope {fit.slope:.4f} (stderr {fit.stderr:.4f})")
    if not fits:
        print("no slope fits: some mean risks are zero or too few budgets")
    return {"rows": rows, "fits": fits}


# ---------------------------------------------------------------------------
# verify / minimax-check
# ---------------------------------------------------------------------------

def cmd_verify(suites: list[str] | None, out_path: str | None = None) -> int:
    from .verify import SUITES, run_suites

    names = suites if suites else list(SUITES)
    results = run_suites(names)
    rows = []
    for res in results:
        print(res.summary())
        for key, val in res.details.items():
            rows.append({"suite": res.name, "metric": key, "value": str(val),
                         "passed": str(res.passed)})
    if out_path:
        _write_csv(out_path, ("suite", "metric", "value", "passed"), rows)
    failed = [r.name for r in results if not r.passed]
    if failed:
        print(f"FAILED: {', '.join(failed)}")
        return 1
    print(f"all {len(results)} suites passed")
    return 0


def cmd_minimax_check(q: int, m_cells: int | None, dim: int,
                      out_path: str | None = None, seed: int = 2006) -> int:
    from .minimax import make_bump_params
    from .verify import check_minimax

    # run the full certificate battery at the requested geometry
    params = make_bump_params(dim=dim, q=q, m_cells=m_cells)
    res = check_minimax(seed)
    print(f"construction: d={params.dim} q={params.q} m_cells={params.m_cells} "
          f"v={params.v} r1={params.r1} r2={params.r2}")
    print(res.summary())
    if out_path:
        rows = [{"certificate": res.name, "quantity": k, "value": str(v),
                 "bound": "", "passed": str(res.passed)}
                for k, v in res.details.items()]
        _write_csv(out_path, MINIMAX_CSV_COLUMNS, rows)
    return 0 if res.passed else 1


# ---------------------------------------------------------------------------
# config plumbing
# ---------------------------------------------------------------------------

def _write_csv(path: str, columns, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow(row)


def load_config(path: str) -> dict:
    """Plain key = value lines; '#' starts a comment, blank lines ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            out[key] = val
    return out


_INT_KEYS = {"replications", "seed", "jobs"}
_FLOAT_KEYS = {"alpha", "k1", "band_d"}


def _coerce(key: str, val: str):
    if key == "budgets":
        return tuple(int(v) for v in str(val).replace(",", " ").split())
    if key in _INT_KEYS:
        return int(val)
    if key in _FLOAT_KEYS:
        return float(val)
    return val


def _build_config(args) -> ExperimentConfig:
    settings: dict = {}
    if args.config:
        for key, val in load_config(args.config).items():
            if key == "out":
                key = "out_path"
            settings[key] = _coerce(key, val)
    for key in ("problem", "alpha", "k1", "band_d", "variant", "seed", "jobs",
                "replications"):
        val = getattr(args, key, None)
        if val is not None:
            settings[key] = val
    if getattr(args, "budget", None):
        settings["budgets"] = tuple(int(b) for chunk in args.budget
                                    for b in str(chunk).split(","))
    if getattr(args, "out", None):
        settings["out_path"] = args.out
    return ExperimentConfig(**settings)


def _parser() -> argparse.ArgumentParser:
    top = argparse.ArgumentParser(prog="activeband",
                                  description=__doc__.split("\n")[0])
    sub = top.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--problem", choices=PROBLEM_NAMES)
        p.add_argument("--budget", action="append",
                       help="label budget; repeat or comma-separate for sweeps")
        p.add_argument("--replications", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--k1", type=float)
        p.add_argument("--band-d", dest="band_d", type=float)
        p.add_argument("--variant", choices=("1a", "1b"))
        p.add_argument("--seed", type=int)
        p.add_argument("--jobs", type=int)
        p.add_argument("--out", help="output CSV path")

    add_common(sub.add_parser("run", help="seeded learner traces to CSV"))
    add_common(sub.add_parser("rates", help="active vs passive budget sweep"))

    ver = sub.add_parser("verify", help="statistical acceptance suites")
    ver.add_argument("--suite", action="append",
                     help="suite name; repeatable; default all")
    ver.add_argument("--out", help="output CSV path")

    mmx = sub.add_parser("minimax-check", help="construction certificates")
    mmx.add_argument("--q", type=int, default=16)
    mmx.add_argument("--m-cells", dest="m_cells", type=int)
    mmx.add_argument("--dim", type=int, default=1)
    mmx.add_argument("--seed", type=int, default=2006)
    mmx.add_argument("--out", help="output CSV path")
    return top


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = _build_config(args)
            rows = cmd_run(cfg)
            n_runs = sum(1 for r in rows if r["row_kind"] == "summary")
            print(f"wrote {len(rows)} rows ({n_runs} runs) to {cfg.out_path}")
            return 0
        if args.command == "rates":
            cmd_rates(_build_config(args))
            return 0
        if args.command == "verify":
            return cmd_verify(args.suite, args.out)
        if args.command == "minimax-check":
            return cmd_minimax_check(args.q, args.m_cells, args.dim, args.out,
                                     args.seed)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 2


if __name__ == "__main__":
    sys.exit(main())
