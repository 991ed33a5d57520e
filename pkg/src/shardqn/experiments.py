"""Experiment configs, sweep runners and CSV rows behind the command line."""
from __future__ import annotations

import csv
import io
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional

from . import analytic as an
from .errors import ConfigError
from .model import COMPUTATION, ShardingParams, SimConfig, validate

EXPERIMENTS = ("max-throughput", "sim-vs-theory", "dynamics", "comp-sharding-max-shards",
               "comp-sharding-sub-saturation", "qr-verify")
ANALYTIC_ONLY = ("max-throughput", "dynamics", "qr-verify")
HEADER = ("experiment", "M", "lambda", "system_throughput", "rho_p", "rho_n", "mean_block",
          "source", "seed", "E_d")
SOURCES = ("analytic", "sim", "both")

PARAM_KEYS = ("m", "m_range", "b", "mu_p", "mu_nc", "zeta", "dest_dist", "gamma", "mu_nh")
SIM_KEYS = ("horizon", "warmup", "seed", "step", "window", "aggregate_blocks", "strategy")
OTHER_KEYS = ("experiment", "output", "rho_p", "pairs", "lam", "alpha", "mu", "alpha_neg",
              "alpha_pos", "extra_departure", "k")
KEYS = PARAM_KEYS + SIM_KEYS + OTHER_KEYS

REQUIRED = {
    "max-throughput": ("b", "mu_p", "dest_dist"),
    "sim-vs-theory": ("b", "mu_p", "mu_nc", "zeta", "dest_dist"),
    "dynamics": ("pairs",),
    "comp-sharding-max-shards": ("b", "mu_p", "mu_nc", "zeta", "gamma"),
    "comp-sharding-sub-saturation": ("b", "mu_p", "mu_nc", "zeta", "gamma", "lam"),
    "qr-verify": ("alpha", "mu"),
}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict
    lines: dict = field(default_factory=dict)
    path: str = "<config>"

    def where(self, key) -> str:
        return f"{self.path}:{self.lines[key]}" if key in self.lines else self.path

    def fail(self, key, msg):
        raise ConfigError(f"{self.where(key)}: {key}: {msg}")

    def has(self, key) -> bool:
        return key in self.values

    def raw(self, key, default=None):
        return self.values.get(key, default)

    def number(self, key, default=None) -> float:
        if key not in self.values:
            if default is None:
                self.fail(key, "missing")
            return default
        return _number(self, key, self.values[key])

    def integer(self, key, default=None) -> int:
        x = self.number(key, default)
        if x != int(x):
            self.fail(key, f"expected an integer, got {self.values[key]!r}")
        return int(x)

    def numbers(self, key, default=None) -> list:
        if key not in self.values:
            if default is None:
                self.fail(key, "missing")
            return list(default)
        return [_number(self, key, v) for v in _split(self.values[key], ",")]

    def flag(self, key, default=False) -> bool:
        v = self.values.get(key)
        if v is None:
            return default
        if v.lower() in ("1", "true", "yes", "on"):
            return True
        if v.lower() in ("0", "false", "no", "off"):
            return False
        self.fail(key, f"expected true/false, got {v!r}")

    def m_values(self, default=(1,)) -> list:
        if self.has("m") and self.has("m_range"):
            self.fail("m_range", "give either m or m_range")
        key = "m_range" if self.has("m_range") else "m"
        if key not in self.values:
            return list(default)
        out = []
        for part in _split(self.values[key], ","):
            sep = ".." if ".." in part else "-" if "-" in part[1:] else None
            try:
                if part.lower() == "inf":
                    vals = [math.inf]
                elif sep:
                    lo, hi = (int(x) for x in part.split(sep))
                    vals = list(range(lo, hi + 1))
                else:
                    vals = [int(part)]
            except ValueError:
                self.fail(key, f"bad shard count {part!r}")
            if not vals:
                self.fail(key, f"empty range {part!r}")
            out.extend(vals)
        if not out:
            self.fail(key, "empty range")
        return out

    def curves(self, default=((1.0,),)) -> list:
        if "dest_dist" not in self.values:
            return [tuple(d) for d in default]
        out = []
        for curve in _split(self.values["dest_dist"], ";"):
            out.append(tuple(_number(self, "dest_dist", v) for v in _split(curve, ",")))
        if not out:
            self.fail("dest_dist", "empty")
        return out

    def params(self, m=1, dest=(1.0,), **kw) -> ShardingParams:
        b = self.integer("b")
        p = ShardingParams(
            m=m, b=b, mu_p=self.number("mu_p"),
            mu_nc=self.number("mu_nc", math.inf),
            zeta=self.number("zeta", 1.0), dest_dist=dest, gamma=kw.get("gamma", 1.0),
            mu_nh=self.number("mu_nh") if self.has("mu_nh") else None)
        errs = validate(p)
        if errs:
            raise ConfigError(f"{self.path}: invalid parameters: " + "; ".join(errs))
        return p


def _split(text, sep):
    return [t.strip() for t in text.split(sep) if t.strip()]


def _number(cfg, key, text) -> float:
    t = text.strip().lower()
    if t in ("inf", "infinity"):
        return math.inf
    try:
        return float(Fraction(t))
    except (ValueError, ZeroDivisionError):
        cfg.fail(key, f"not a number: {text!r}")


def parse_config(text: str, experiment: str, path: str = "<config>") -> ExperimentConfig:
    """Parse flat ``key = value`` lines; ``#`` starts a comment."""
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    values, lines = {}, {}
    for no, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.lower()
        if key not in KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{no}: duplicate key {key!r}")
        if not val:
            raise ConfigError(f"{path}:{no}: empty value for {key!r}")
        values[key], lines[key] = val, no
    cfg = ExperimentConfig(experiment, values, lines, path)
    if "experiment" in values and values["experiment"] != experiment:
        cfg.fail("experiment", f"config is for {values['experiment']!r}, not {experiment!r}")
    for key in REQUIRED[experiment]:
        if key not in values:
            raise ConfigError(f"{path}: missing required key {key!r} for {experiment}")
    return cfg


def load_config(path: str, experiment: str) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    return parse_config(text, experiment, path)


@dataclass(frozen=True)
class ResultRow:
    experiment: str
    e_d: float
    m: float
    lam: float
    source: str
    system_throughput: float = math.nan
    rho_p: Optional[float] = None
    rho_n: Optional[float] = None
    mean_block: Optional[float] = None
    seed: Optional[int] = None

    def cells(self) -> list:
        def fmt(x):
            if x is None or (isinstance(x, float) and math.isnan(x)):
                return ""
            if isinstance(x, float):
                return "inf" if math.isinf(x) else repr(x)
            return str(x)
        m = "inf" if math.isinf(self.m) else str(int(self.m))
        return [self.experiment, m, fmt(self.lam), fmt(self.system_throughput), fmt(self.rho_p),
                fmt(self.rho_n), fmt(self.mean_block), self.source, fmt(self.seed), fmt(self.e_d)]

    def sort_key(self):
        lam = -math.inf if math.isnan(self.lam) else self.lam
        return (self.experiment, self.e_d, self.m, lam, self.source)


def row(experiment, p, lam, source, **kw) -> ResultRow:
    sys_thr = p.m * lam if not math.isinf(p.m) else math.inf
    return ResultRow(experiment, p.mean_d, p.m, float(lam), source, sys_thr, **kw)


def write_csv(rows, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(HEADER)
    for r in sorted(rows, key=ResultRow.sort_key):
        w.writerow(r.cells())


def csv_text(rows) -> str:
    buf = io.StringIO()
    write_csv(rows, buf)
    return buf.getvalue()


# analytic experiments

def max_throughput(cfg: ExperimentConfig, **_) -> list:
    out = []
    for dest in cfg.curves():
        for m in cfg.m_values(default=range(1, 65)):
            p = cfg.params(m=m, dest=dest)
            lam = an.lambda_max(p)
            out.append(row(cfg.experiment, p, lam, "analytic", rho_p=1.0, mean_block=float(p.b)))
    return out


def dynamics(cfg: ExperimentConfig, **_) -> list:
    rho = cfg.number("rho_p", 0.9995)
    if not 0 <= rho <= 1:
        cfg.fail("rho_p", "must lie in [0, 1]")
    out = []
    for pair in _split(cfg.raw("pairs"), ";"):
        try:
            b_txt, mu_txt = pair.split(":")
            b, mu = int(b_txt), float(Fraction(mu_txt.strip()))
        except ValueError:
            cfg.fail("pairs", f"expected 'b:mu_p', got {pair!r}")
        for dest in cfg.curves():
            for m in cfg.m_values(default=range(1, 65)):
                p = ShardingParams(m=m, b=b, mu_p=mu, dest_dist=dest)
                errs = validate(p)
                if errs:
                    cfg.fail("pairs", "; ".join(errs))
                lam = an.lambda_general(rho, p)
                tag = f"{cfg.experiment}:b={b}:mu_p={mu_txt.strip()}"
                out.append(row(tag, p, lam, "analytic", rho_p=rho,
                               mean_block=an.mean_block_size(rho, b)))
    return out


# simulation-backed experiments; each task is a picklable tuple

def _sim_base(cfg: ExperimentConfig, p, seed, mode="full", step=0.05) -> SimConfig:
    from .simulator import auto_horizon
    if cfg.has("horizon") and cfg.raw("horizon").lower() != "auto":
        horizon = cfg.number("horizon")
    elif mode == COMPUTATION:
        horizon = 1e5
    else:
        horizon = auto_horizon(p, step)
    warmup = cfg.number("warmup", horizon / 10)
    window = cfg.number("window") if cfg.has("window") else None
    sc = SimConfig(params=p, lam=0.0, mode=mode, horizon=horizon, warmup=warmup, seed=seed,
                   window=window, aggregate_blocks=cfg.flag("aggregate_blocks"))
    errs = [e for e in sc.violations() if "lam" not in e]
    if errs:
        raise ConfigError(f"{cfg.path}: invalid simulation settings: " + "; ".join(errs))
    return sc


def _task_saturation(args):
    from .simulator import saturation_search
    experiment, base, step, strategy = args
    res = saturation_search(base, step, strategy=strategy)
    pr = res.at(res.lam_sat)
    kw = {}
    if pr is not None:
        kw = dict(rho_p=pr.rho_p, rho_n=pr.rho_n, mean_block=pr.mean_block)
    return [row(experiment, base.params, res.lam_sat, "simulation", seed=base.seed, **kw)]


def _task_max_shards(args):
    from .simulator import max_shards_search
    experiment, base, gamma, lam = args
    m, reports = max_shards_search(base, gamma, lam)
    p = replace(base.params, m=max(m, 1))
    if m == 0:
        return [ResultRow(experiment, p.mean_d, 0, math.nan, "simulation", 0.0, seed=base.seed)]
    rep = reports[m]
    return [row(experiment, replace(p, m=m), rep.config.lam, "simulation",
                rho_p=float(rep.cons_utilization.mean()), rho_n=rep.rho_n_measured,
                mean_block=rep.mean_block, seed=base.seed)]


def sim_vs_theory(cfg: ExperimentConfig, source="both", seed=0, **_):
    step = cfg.number("step", 0.05)
    if step <= 0:
        cfg.fail("step", "must be > 0")
    strategy = cfg.raw("strategy", "bisect")
    if strategy not in ("bisect", "sweep"):
        cfg.fail("strategy", "must be bisect or sweep")
    rows, tasks = [], []
    for dest in cfg.curves():
        for m in cfg.m_values(default=(1, 2, 4, 8)):
            p = cfg.params(m=m, dest=dest)
            if source in ("analytic", "both"):
                rows.append(row(cfg.experiment, p, an.lambda_max(p), "analytic", rho_p=1.0,
                                mean_block=float(p.b)))
            if source in ("sim", "both"):
                if math.isinf(m):
                    cfg.fail("m", "simulation needs finite shard counts")
                tasks.append((_task_saturation,
                              (cfg.experiment, _sim_base(cfg, p, seed, step=step), step, strategy)))
    return rows, tasks


def _comp_points(cfg):
    if cfg.experiment == "comp-sharding-max-shards":
        lams = ["saturated"] if cfg.raw("lam", "saturated").lower() == "saturated" else cfg.numbers("lam")
    else:
        lams = cfg.numbers("lam")
    for lam in lams:
        if lam != "saturated" and lam <= 0:
            cfg.fail("lam", "rates must be > 0")
    return cfg.numbers("gamma"), lams


def comp_sharding(cfg: ExperimentConfig, source="both", seed=0, **_):
    gammas, lams = _comp_points(cfg)
    rows, tasks = [], []
    for dest in cfg.curves():
        for gamma in gammas:
            if not 0 < gamma <= 1:
                cfg.fail("gamma", "must lie in (0, 1]")
            p = cfg.params(m=1, dest=dest, gamma=gamma)
            if not math.isfinite(p.mu_nc):
                cfg.fail("mu_nc", "computation sharding needs a finite mu_nc")
            for lam in lams:
                tag = f"{cfg.experiment}:gamma={gamma!r}"
                if source in ("analytic", "both"):
                    m = an.max_shards_computation(p, lam)
                    q = replace(p, m=max(m, 1))
                    rate = an.lambda_max(q) if lam == "saturated" else lam
                    if m == 0:
                        rows.append(ResultRow(tag, p.mean_d, 0, math.nan, "analytic", 0.0))
                    elif lam == "saturated":
                        rows.append(row(tag, q, rate, "analytic", rho_p=1.0, mean_block=float(p.b),
                                        rho_n=an.network_load_computation(p, m, lam)))
                    else:
                        sol = an.solve_traffic_computation(lam, q)
                        rows.append(row(tag, q, rate, "analytic", rho_p=sol.rho_p,
                                        rho_n=sol.rho_n, mean_block=sol.mean_block))
                if source in ("sim", "both"):
                    base = _sim_base(cfg, p, seed, mode=COMPUTATION)
                    tasks.append((_task_max_shards, (tag, base, gamma, lam)))
    return rows, tasks


def _run_task(task):
    fn, args = task
    return fn(args)


def execute(cfg: ExperimentConfig, source: str = "both", seed: int = 0,
            jobs: Optional[int] = None) -> list:
    """Run one experiment and return its rows (unsorted)."""
    if source not in SOURCES:
        raise ConfigError(f"source must be one of {SOURCES}")
    exp = cfg.experiment
    if exp in ANALYTIC_ONLY:
        if source == "sim":
            raise ConfigError(f"{exp} has no simulation source")
        return {"max-throughput": max_throughput, "dynamics": dynamics}[exp](cfg)
    runner = sim_vs_theory if exp == "sim-vs-theory" else comp_sharding
    rows, tasks = runner(cfg, source=source, seed=seed)
    jobs = jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) <= 1:
        results = [_run_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(jobs, len(tasks))) as pool:
            results = list(pool.map(_run_task, tasks))
    for r in results:
        rows.extend(r)
    return rows


def qr_verify(cfg: ExperimentConfig):
    """Build the configured signal queue, check it, and return (report, text)."""
    from .qrlab import SignalQueueSpec, check_qr
    spec = SignalQueueSpec(
        arrival_rate=cfg.number("alpha"), service_rate=cfg.number("mu"),
        negative_rate=cfg.number("alpha_neg", 0.0), positive_rate=cfg.number("alpha_pos", 0.0),
        extra_departure=cfg.flag("extra_departure", True))
    k = cfg.integer("k", 300)
    if k < 2:
        cfg.fail("k", "truncation must be ≥ 2")
    if spec.load >= 1:
        raise ConfigError(f"{cfg.path}: queue load {spec.load:.6g} must be < 1")
    rep = check_qr(spec, k)
    lines = [
        f"load = {spec.load!r}",
        f"truncation = {k}",
        f"extra_departure = {str(spec.extra_departure).lower()}",
    ]
    for u in sorted(rep.beta):
        lines.append(f"beta[{u}] = {rep.beta[u]!r}")
    lines += [
        f"max_arrival_violation = {rep.max_arrival_violation:.3e}",
        f"max_departure_violation = {rep.max_departure_violation:.3e}",
        f"truncation_tail_mass = {rep.truncation_tail_mass:.3e}",
        f"balance_residual = {rep.residual:.3e}",
        f"verdict = {'quasi-reversible' if rep.ok(1e-6) else 'violation'}",
    ]
    return rep, "\n".join(lines) + "\n"


PLOT_TEMPLATE = """# gnuplot script; run with: gnuplot -p {script}
set datafile separator ","
set key autotitle columnhead left
set xlabel "{xlabel}"
set ylabel "{ylabel}"
set grid
plot for [src in "analytic simulation"] '{csv}' \\
    using (strcol(8) eq src ? ${xcol} : 1/0):(strcol(8) eq src ? ${ycol} : 1/0) \\
    with linespoints title src
"""


def plot_script(experiment: str, csv_path: str, script_path: str) -> str:
    if experiment.startswith("comp-sharding"):
        xcol, ycol, xl, yl = 3, 2, "per-shard rate lambda (1/s)", "max shards M"
    elif experiment == "dynamics":
        xcol, ycol, xl, yl = 2, 4, "shards M", "system throughput M*lambda (1/s)"
    else:
        xcol, ycol, xl, yl = 2, 3, "shards M", "lambda_max per shard (1/s)"
    return PLOT_TEMPLATE.format(script=script_path, xlabel=xl, ylabel=yl, csv=csv_path,
                                xcol=xcol, ycol=ycol)
