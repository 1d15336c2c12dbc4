"""Batch experiments: success probability of exact graph recovery vs. sample size.

For each method, each point of the rescaled sample-size grid
``beta = n / (20 d log p)`` and each trial, a fresh model is drawn (random
coupling signs), ``n`` samples are generated by Gibbs sampling, and every
requested method is run on that same sample matrix. A trial succeeds when
the estimated edge set equals the true one.
"""

from __future__ import annotations

import csv
import dataclasses
import io
import math
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import GreedyIsingError, IoFailure
from .greedy import GreedyConfig
from .ising import (
    TOPOLOGIES,
    GibbsSettings,
    IsingModel,
    Skeleton,
    assign_couplings,
    gibbs_sample,
    make_star,
    seed_stream,
)
from .structure import CombineRule, learn_structure, learn_structure_l1
from .svgplot import write_svg

# Greedy stopping-threshold constant c in eps = c log(n p) / n. Chosen by
# scripts/calibrate_threshold.py as the smallest value on {0.25, 0.5, 1, 2}
# whose false-edge rate under the independent (zero-coupling) model, at the
# p = 16 chain sample sizes, is at most 1 in 10 (seed 0: 0.014 for c = 1).
# Calibrated here, not taken from the literature.
CALIBRATED_THRESHOLD_C = 1.0

DEFAULT_BETAS = (0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 3.0)
METHODS = ("greedy", "l1")
CSV_HEADER = ("method", "beta", "n", "p", "d", "trials", "successes", "success_rate", "mean_seconds")
TRIAL_HEADER = ("method", "beta", "n", "trial", "exact", "missed", "extra", "l1_constant", "error")


def fmt(x) -> str:
    """Six significant digits; Python rounds the exact binary value, half to even."""
    if isinstance(x, float):
        return format(x, ".6g")
    return str(x)


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str = "chain"
    p: int = 16
    omega: float = 0.5
    betas: tuple = DEFAULT_BETAS
    trials: int = 10
    methods: tuple = METHODS
    c: float = CALIBRATED_THRESHOLD_C
    nu: float = 0.5
    l1_constant: object = "sweep"
    seed: int = 0
    rule: str = "or"
    hub_degree: Optional[int] = None
    burn_in: int = 200
    thin: int = 10
    workers: int = 1
    timings: bool = False
    output_dir: Optional[str] = None

    def __post_init__(self):
        object.__setattr__(self, "betas", tuple(float(b) for b in self.betas))
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.topology not in TOPOLOGIES:
            raise ValueError(f"unknown topology {self.topology!r}")
        if not self.betas:
            raise ValueError("beta grid is empty")
        if any(b <= 0 for b in self.betas) or any(
            b2 <= b1 for b1, b2 in zip(self.betas, self.betas[1:])
        ):
            raise ValueError("beta grid must be positive and strictly increasing")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.methods or set(self.methods) - set(METHODS):
            raise ValueError(f"methods must be a non-empty subset of {METHODS}")
        if not self.omega > 0 or not self.c > 0:
            raise ValueError("omega and c must be positive")
        if self.l1_constant != "sweep":
            object.__setattr__(self, "l1_constant", float(self.l1_constant))
        CombineRule(self.rule)
        for b in self.betas:
            self.n_for_beta(b)

    def skeleton(self) -> Skeleton:
        if self.topology == "star":
            return make_star(self.p, self.hub_degree)
        return TOPOLOGIES[self.topology](self.p)

    @property
    def d(self) -> int:
        return self.skeleton().max_degree

    def n_for_beta(self, beta: float) -> int:
        n = math.ceil(beta * 20 * self.d * math.log(self.p))
        if n < 2:
            raise ValueError(f"beta={beta} gives n={n} < 2")
        return n


def greedy_threshold(c: float, n: int, p: int) -> float:
    return c * math.log(n * p) / n


def _beta_key(beta: float) -> int:
    return int(round(beta * 1_000_000))


def trial_streams(seed: int, trial: int, beta: float):
    """(model, sampler) generators for one trial; independent of run order."""
    key = _beta_key(beta)
    return seed_stream(seed, 0, trial, key), seed_stream(seed, 1, trial, key)


@dataclass
class TrialRecord:
    method: str
    beta: float
    n: int
    trial: int
    exact: bool
    missed: int
    extra: int
    seconds: float
    l1_constant: Optional[float] = None
    error: str = ""


def make_trial_data(config: ExperimentConfig, beta: float, trial: int):
    model_rng, sample_rng = trial_streams(config.seed, trial, beta)
    model = assign_couplings(config.skeleton(), config.omega, model_rng)
    n = config.n_for_beta(beta)
    settings = GibbsSettings(config.burn_in, config.thin, config.seed)
    return model, gibbs_sample(model, n, settings, rng=sample_rng)


def run_method(method: str, data, config: ExperimentConfig):
    rule = CombineRule(config.rule)
    if method == "greedy":
        eps = greedy_threshold(config.c, data.n, data.p)
        edges, _ = learn_structure(data, GreedyConfig(eps, config.nu), rule)
        return edges, None
    edges, _, const = learn_structure_l1(data, config.l1_constant, rule)
    return edges, const


def run_trial(config: ExperimentConfig, beta: float, trial: int, methods=None) -> list:
    """One model draw and sample matrix, shared by every requested method.

    Solver failures are recorded as failed trials rather than raised.
    """
    methods = tuple(methods) if methods is not None else config.methods
    model, data = make_trial_data(config, beta, trial)
    records = []
    for method in methods:
        start = time.perf_counter()
        try:
            edges, const = run_method(method, data, config)
            cmp = edges.compare(model.edges)
            rec = TrialRecord(method, beta, data.n, trial, cmp.exact, len(cmp.missed),
                              len(cmp.extra), 0.0, const)
        except GreedyIsingError as exc:
            rec = TrialRecord(method, beta, data.n, trial, False, -1, -1, 0.0,
                              error=f"{type(exc).__name__}: {exc}".splitlines()[0])
        rec.seconds = time.perf_counter() - start
        records.append(rec)
    return records


def _run_trial_args(args):
    return run_trial(*args)


@dataclass
class SweepResult:
    config: ExperimentConfig
    records: list = field(default_factory=list)
    complete: bool = True

    def aggregate(self) -> list:
        rows = []
        d = self.config.d
        for method in self.config.methods:
            for beta in self.config.betas:
                recs = [r for r in self.records if r.method == method and r.beta == beta]
                if not recs:
                    continue
                succ = sum(r.exact for r in recs)
                rows.append({
                    "method": method,
                    "beta": beta,
                    "n": self.config.n_for_beta(beta),
                    "p": self.config.p,
                    "d": d,
                    "trials": len(recs),
                    "successes": succ,
                    "success_rate": succ / len(recs),
                    "mean_seconds": sum(r.seconds for r in recs) / len(recs),
                })
        return rows

    def success_rate(self, method: str, beta: float) -> float:
        for row in self.aggregate():
            if row["method"] == method and row["beta"] == float(beta):
                return row["success_rate"]
        raise KeyError((method, beta))

    def results_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for row in self.aggregate():
            vals = [fmt(row[k]) for k in CSV_HEADER]
            if not self.config.timings:
                vals[-1] = "NA"
            w.writerow(vals)
        return buf.getvalue()

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(TRIAL_HEADER)
        for r in sorted(self.records, key=lambda r: (r.method, r.beta, r.trial)):
            const = "" if r.l1_constant is None else fmt(r.l1_constant)
            w.writerow([r.method, fmt(r.beta), r.n, r.trial, int(r.exact), r.missed, r.extra,
                        const, r.error])
        return buf.getvalue()

    def series(self) -> dict:
        out = {}
        for row in self.aggregate():
            out.setdefault(row["method"], []).append((row["beta"], row["success_rate"]))
        return out


def version_string() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True, text=True, cwd=Path(__file__).parent, timeout=5,
        )
        if out.returncode == 0 and out.stdout.strip():
            return out.stdout.strip()
    except (OSError, subprocess.SubprocessError):
        pass
    from . import __version__

    return __version__


def metadata_text(result: SweepResult) -> str:
    cfg = result.config
    lines = [f"version: {version_string()}", f"status: {'complete' if result.complete else 'interrupted'}"]
    for f in dataclasses.fields(cfg):
        lines.append(f"config.{f.name}: {config_value_text(getattr(cfg, f.name))}")
    lines.append(f"d: {cfg.d}")
    for beta in cfg.betas:
        lines.append(f"n[beta={fmt(beta)}]: {cfg.n_for_beta(beta)}")
        lines.append(f"eps[beta={fmt(beta)}]: {fmt(greedy_threshold(cfg.c, cfg.n_for_beta(beta), cfg.p))}")
    for beta in cfg.betas:
        for trial in range(cfg.trials):
            lines.append(
                f"trial_seed[beta={fmt(beta)},trial={trial}]: "
                f"model=({cfg.seed},0,{trial},{_beta_key(beta)}) "
                f"sampler=({cfg.seed},1,{trial},{_beta_key(beta)})"
            )
    return "\n".join(lines) + "\n"


def config_value_text(v) -> str:
    if isinstance(v, (tuple, list)):
        return ",".join(fmt(x) for x in v)
    if v is None:
        return ""
    return fmt(v)


def write_outputs(result: SweepResult, out_dir) -> dict:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        paths = {
            "results": out / "results.csv",
            "trials": out / "trials.csv",
            "metadata": out / "metadata.txt",
        }
        paths["results"].write_text(result.results_csv())
        paths["trials"].write_text(result.trials_csv())
        paths["metadata"].write_text(metadata_text(result))
    except OSError as exc:
        raise IoFailure(str(exc)) from exc
    series = result.series()
    if series:
        paths["plot"] = emit_plot(result, out / "plot.svg")
    return paths


def emit_plot(result: SweepResult, path) -> Path:
    cfg = result.config
    title = f"{cfg.topology}, p={cfg.p}, d={cfg.d}, ω={fmt(cfg.omega)}"
    return write_svg(result.series(), path, title)


def run_sweep(config: ExperimentConfig, progress=None) -> SweepResult:
    """Run every (beta, trial) with all methods and write outputs if configured.

    On interrupt the finished trials are written and the interrupt re-raised.
    """
    result = SweepResult(config)
    jobs = [(config, beta, trial) for beta in config.betas for trial in range(config.trials)]
    try:
        if config.workers > 1:
            with ProcessPoolExecutor(config.workers) as pool:
                for recs in pool.map(_run_trial_args, jobs):
                    result.records.extend(recs)
                    if progress:
                        progress(recs)
        else:
            for job in jobs:
                recs = run_trial(*job)
                result.records.extend(recs)
                if progress:
                    progress(recs)
    except KeyboardInterrupt:
        result.complete = False
        if config.output_dir:
            write_outputs(result, config.output_dir)
        raise
    if config.output_dir:
        write_outputs(result, config.output_dir)
    return result


def null_false_positive_rate(c: float, p: int, ns, trials: int, seed: int = 0,
                             nu: float = 0.5) -> float:
    """Fraction of null-model runs (all couplings zero) returning any edge.

    A run whose node fits fail also counts against ``c``.
    """
    model = IsingModel(p, [0.0] * p, {}, "null")
    hits = total = 0
    for n in ns:
        for trial in range(trials):
            data = gibbs_sample(model, n, GibbsSettings(seed=seed),
                                rng=seed_stream(seed, 2, trial, n))
            try:
                edges, _ = learn_structure(data, GreedyConfig(greedy_threshold(c, n, p), nu))
                hits += len(edges) > 0
            except GreedyIsingError:
                hits += 1
            total += 1
    return hits / total


def calibrate_threshold_constant(grid=(0.25, 0.5, 1.0, 2.0), p=16, topology="chain",
                                 betas=DEFAULT_BETAS, trials=10, seed=0,
                                 max_false_positive_rate=0.1):
    """Smallest c in ``grid`` whose null-model false-positive rate is acceptable.

    Null runs use the sample sizes of the ``topology`` sweep. The tolerance
    matches the null sanity requirement (at most 1 run in 10 with a false
    edge); pass 0 for the strict zero-false-positive rule. Returns
    ``(c, rates)``; ``c`` is None when no value qualifies.
    """
    cfg = ExperimentConfig(topology=topology, p=p, betas=betas)
    ns = [cfg.n_for_beta(b) for b in betas]
    rates = {}
    chosen = None
    for c in sorted(grid):
        rates[c] = null_false_positive_rate(c, p, ns, trials, seed)
        if rates[c] <= max_false_positive_rate and chosen is None:
            chosen = c
    return chosen, rates


def parse_config_text(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def coerce_config(raw: dict) -> ExperimentConfig:
    """Build a config from string values (config file or command-line flags)."""
    fields = {f.name: f for f in dataclasses.fields(ExperimentConfig)}
    kwargs = {}
    for key, value in raw.items():
        if key not in fields:
            raise ValueError(f"unknown config key {key!r}")
        if value is None:
            continue
        if not isinstance(value, str):
            kwargs[key] = value
            continue
        if key in ("betas",):
            kwargs[key] = tuple(float(v) for v in value.split(",") if v.strip())
        elif key == "methods":
            kwargs[key] = tuple(v.strip() for v in value.split(",") if v.strip())
        elif key in ("p", "trials", "seed", "burn_in", "thin", "workers"):
            kwargs[key] = int(value)
        elif key == "hub_degree":
            kwargs[key] = int(value) if value else None
        elif key in ("omega", "c", "nu"):
            kwargs[key] = float(value)
        elif key == "l1_constant":
            kwargs[key] = value if value == "sweep" else float(value)
        elif key == "timings":
            kwargs[key] = value.lower() in ("1", "true", "yes", "on")
        else:
            kwargs[key] = value or None
    return ExperimentConfig(**kwargs)
