"""Command-line driver for experiments and privacy reports.

Every subcommand writes one table, CSV by default or JSON with
``--format json``.  A run is determined by its configuration and seed;
wall-clock timing goes to the log on stderr so that result files are
byte-identical across reruns.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .apps import (
    MPJInstance,
    PCInstance,
    SupportInstance,
    check_delta_for_support,
    default_threshold,
    required_samples,
    sample_instance,
    solve_mpj,
    solve_pc,
    solve_support,
    success_rate,
)
from .core import Dataset, InvalidParamsError, ProtocolParams
from .hist import (
    FAITHFUL_BUDGET,
    HistParams,
    TrueHistogram,
    aggregate_simulate,
    hist_execute,
    local_rr_estimates,
    local_rr_randomize_batch,
    simultaneous_error,
)
from .privacy import (
    brute_force_shuffled_dp,
    mneg_privacy_check,
    shifted_binomial_delta,
    zsum_privacy_delta,
)
from .puredp import (
    count_support_reachability,
    max_ratio_witness,
    pre_shuffle_law,
    r_gap_law,
    r_infinity_law,
    shuffled_count_pmf,
    shuffled_pure_dp_level,
)
from .zsum import ZsumParams, zsum_alpha, zsum_run

log = logging.getLogger("shuffledp")

DEFAULT_SEED = 20200601
SCHEMA_VERSION = 1

COLUMNS = {
    "run-zsum": ["input", "n", "epsilon", "delta", "beta", "trials", "alpha",
                 "err_median", "err_q95", "err_max", "failure_rate", "failure_band"],
    "run-hist": ["d", "protocol", "n", "epsilon", "delta", "trials",
                 "err_median", "err_q95", "err_max", "zero_bins_exact"],
    "verify-privacy": ["check", "epsilon", "delta", "n", "epsilon_target",
                       "delta_achieved", "delta_reference", "direction", "method", "passed"],
    "solve-support": ["problem", "h", "d", "n", "t", "trials", "successes", "success_rate"],
    "solve-pc": ["problem", "ell", "k", "n", "t", "trials", "successes", "success_rate"],
    "solve-mpj": ["problem", "s", "h", "code_space", "n", "t", "trials", "successes",
                  "success_rate"],
    "puredp-demo": ["witness", "n", "max_log_ratio", "witness_outcome", "full_support"],
}

DEFAULT_TRIALS = {"run-zsum": 2000, "run-hist": 500, "solve-support": 200,
                  "solve-pc": 200, "solve-mpj": 200}


class ConfigError(ValueError):
    pass


def _int_list(text) -> tuple:
    if isinstance(text, (tuple, list)):
        return tuple(int(v) for v in text)
    return tuple(int(float(v)) for v in str(text).split(",") if v.strip())


@dataclass
class ExperimentConfig:
    command: str = ""
    epsilon: Optional[float] = None
    delta: Optional[float] = None
    n: Optional[int] = None
    d: Optional[tuple] = None
    beta: Optional[float] = None
    trials: Optional[int] = None
    seed: int = DEFAULT_SEED
    mode: str = "aggregate"
    format: str = "csv"
    out: Optional[str] = None
    h: Optional[int] = None
    t: Optional[int] = None
    ell: Optional[tuple] = None
    k: Optional[int] = None
    s: Optional[int] = None

    _PARSERS = {"epsilon": float, "delta": float, "beta": float, "n": int, "trials": int,
                "seed": int, "h": int, "t": int, "k": int, "s": int,
                "d": _int_list, "ell": _int_list, "command": str, "mode": str,
                "format": str, "out": str}

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                continue
            if isinstance(value, tuple):
                value = ",".join(str(v) for v in value)
            elif isinstance(value, float):
                value = repr(value)
            lines.append(f"{f.name} = {value}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ExperimentConfig":
        return cls(**parse_config_text(text))

    def trial_count(self) -> int:
        return DEFAULT_TRIALS.get(self.command, 0) if self.trials is None else self.trials


def parse_config_text(text: str) -> dict:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        parser = ExperimentConfig._PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        try:
            values[key] = parser(value)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return values


@dataclass
class ResultTable:
    columns: list
    rows: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def add(self, **row):
        missing = set(self.columns) ^ set(row)
        if missing:
            raise ValueError(f"row keys do not match schema: {sorted(missing)}")
        self.rows.append(row)

    def render(self, fmt: str = "csv") -> str:
        if fmt == "json":
            doc = {"metadata": self.metadata, "columns": self.columns,
                   "rows": [{c: _json_value(r[c]) for c in self.columns} for r in self.rows]}
            return json.dumps(doc, indent=2) + "\n"
        if fmt != "csv":
            raise ConfigError(f"unknown format {fmt!r}")
        buf = io.StringIO()
        for key in sorted(self.metadata):
            buf.write(f"# {key}: {self.metadata[key]}\n")
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for r in self.rows:
            writer.writerow([_csv_value(r[c]) for c in self.columns])
        return buf.getvalue()


def _csv_value(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return "" if v is None else v


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    if isinstance(v, np.generic):
        return v.item()
    return v


def _params(cfg: ExperimentConfig, n=None, eps=1.0, delta=0.1) -> ProtocolParams:
    params = ProtocolParams(cfg.epsilon if cfg.epsilon is not None else eps,
                            cfg.delta if cfg.delta is not None else delta,
                            n if n is not None else (cfg.n if cfg.n is not None else 1000))
    return params.check()


def _quantiles(errors: np.ndarray) -> tuple:
    return (float(np.median(errors)), float(np.quantile(errors, 0.95)), float(errors.max()))


# -- subcommands ------------------------------------------------------------------

def run_zsum(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["run-zsum"])
    params = _params(cfg)
    beta = 0.05 if cfg.beta is None else cfg.beta
    trials = cfg.trial_count()
    alpha = zsum_alpha(params, beta)
    zp = ZsumParams.from_params(params)
    if cfg.mode not in ("faithful", "aggregate"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if trials == 0:
        return table
    n = params.n
    inputs = {"all-zeros": 0, "all-ones": n, "half-ones": n // 2,
              "threshold": int(round(n * (1 - zp.p)))}
    for i, (name, ones) in enumerate(inputs.items()):
        rng = np.random.default_rng([cfg.seed, i])
        data = Dataset.bits([1] * ones + [0] * (n - ones))
        errors = np.abs(zsum_run(data, zp, rng, trials, mode=cfg.mode) - ones / n)
        med, q95, mx = _quantiles(errors)
        table.add(input=name, n=n, epsilon=params.epsilon, delta=params.delta, beta=beta,
                  trials=trials, alpha=alpha, err_median=med, err_q95=q95, err_max=mx,
                  failure_rate=float(np.mean(errors > alpha)),
                  failure_band=beta + 3 * math.sqrt(beta / trials))
    return table


def hist_counts(n: int, d: int) -> dict:
    """Fixed workload: 50/30/20 percent on the first bins.

    Every share is above the truncation point ``1 - p`` at the default
    parameters, so the error reflects the noise and not the cutoff.
    """
    used = min(d, 3)
    weights = np.array([0.5, 0.3, 0.2][:used])
    counts = np.floor(n * weights / weights.sum()).astype(int)
    counts[0] += n - counts.sum()
    return {j + 1: int(c) for j, c in enumerate(counts) if c}


def hist_trials(params: ProtocolParams, d: int, trials: int, seed: int, mode: str = "aggregate",
                check_zero_bins: bool = True) -> tuple[np.ndarray, bool]:
    """Simultaneous errors of the shuffled protocol on the fixed workload.

    Occupied bins draw from a stream shared by every ``d``; empty bins use a
    separate per-``d`` stream.
    """
    hp = HistParams.from_params(params, d)
    counts = hist_counts(params.n, d)
    truth = TrueHistogram(d, {j: c / params.n for j, c in counts.items()})
    rng = np.random.default_rng([seed, 1])
    zero_rng = np.random.default_rng([seed, 2, d]) if check_zero_bins else None
    if mode == "faithful":
        rows = np.repeat(np.array(list(counts), dtype=np.int64), list(counts.values()))
        dataset = Dataset(rows, d)
    errors = np.empty(trials)
    zero_exact = True
    for t in range(trials):
        if mode == "faithful":
            est = hist_execute(dataset, hp, rng, mode="faithful")
        else:
            est = aggregate_simulate(counts, hp, rng, zero_rng=zero_rng)
        if any(j not in counts for j in est.values):
            zero_exact = False
        errors[t] = simultaneous_error(est, truth)
    return errors, zero_exact


def local_trials(params: ProtocolParams, d: int, trials: int, seed: int) -> np.ndarray:
    counts = hist_counts(params.n, d)
    rows = np.repeat(np.array(list(counts), dtype=np.int64), list(counts.values()))
    truth = np.zeros(d)
    for j, c in counts.items():
        truth[j - 1] = c / params.n
    rng = np.random.default_rng([seed, 3, d])
    errors = np.empty(trials)
    for t in range(trials):
        msgs = local_rr_randomize_batch(rows, params.epsilon, d, rng)
        errors[t] = np.abs(local_rr_estimates(msgs, params.epsilon, d) - truth).max()
    return errors


def run_hist(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["run-hist"])
    params = _params(cfg)
    trials = cfg.trial_count()
    domains = cfg.d or (10**2, 10**4, 10**6)
    if cfg.mode not in ("faithful", "aggregate"):
        raise ConfigError(f"unknown mode {cfg.mode!r}")
    if cfg.mode == "faithful":
        too_big = [d for d in domains if params.n * d > FAITHFUL_BUDGET]
        if too_big:
            raise ConfigError(f"faithful mode needs n*d <= {FAITHFUL_BUDGET}; "
                              f"d={too_big} too large, use --mode aggregate")
    if trials == 0:
        return table
    base = dict(n=params.n, epsilon=params.epsilon, delta=params.delta, trials=trials)
    for d in domains:
        errors, zero_exact = hist_trials(params, d, trials, cfg.seed, cfg.mode)
        med, q95, mx = _quantiles(errors)
        table.add(d=d, protocol="shuffled", err_median=med, err_q95=q95, err_max=mx,
                  zero_bins_exact=zero_exact, **base)
        med, q95, mx = _quantiles(local_trials(params, d, trials, cfg.seed))
        table.add(d=d, protocol="local", err_median=med, err_q95=q95, err_max=mx,
                  zero_bins_exact=None, **base)
        log.info("run-hist d=%d done", d)
    return table


DEFAULT_PRIVACY_GRID = ((1.0, 0.1), (1.0, 0.01), (0.5, 0.1), (0.5, 0.01))
BRUTE_FORCE_USERS = (2, 4, 6, 8)
BRUTE_FORCE_P = 0.7


def verify_privacy(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["verify-privacy"])
    if cfg.epsilon is not None or cfg.delta is not None or cfg.n is not None:
        eps = 1.0 if cfg.epsilon is None else cfg.epsilon
        delta = 0.1 if cfg.delta is None else cfg.delta
        probe = ProtocolParams(eps, delta, 10**9).check()
        ns = [cfg.n if cfg.n is not None else math.ceil(probe.min_users())]
        grid = [(eps, delta, ns)]
    else:
        grid = []
        for eps, delta in DEFAULT_PRIVACY_GRID:
            base = math.ceil(ProtocolParams(eps, delta, 1).min_users())
            grid.append((eps, delta, [base, 2 * base, 10 * base]))
    for eps, delta, ns in grid:
        for n in ns:
            params = ProtocolParams(eps, delta, n).check()
            for target in (eps, 0.0):
                rep = zsum_privacy_delta(params, target)
                table.add(check="zsum-exact", epsilon=eps, delta=delta, n=n,
                          epsilon_target=target, delta_achieved=rep.delta_achieved,
                          delta_reference=delta, direction=rep.direction, method=rep.method,
                          passed=rep.passed if target == eps else None)
            mneg = mneg_privacy_check(params)
            table.add(check="mneg-smoothness", epsilon=eps, delta=delta, n=n,
                      epsilon_target=eps, delta_achieved=mneg.smooth.delta_achieved,
                      delta_reference=mneg.bound_delta, direction=mneg.smooth.direction,
                      method=mneg.smooth.method, passed=mneg.passed)
        # half the required users: the noise rate clamps at 1, so no noise is left
        noise_mean = 50.0 * math.log(2.0 / delta) / eps**2
        n_small = math.ceil(noise_mean / 2)
        achieved, direction = shifted_binomial_delta(n_small, min(1.0, noise_mean / n_small), eps)
        table.add(check="zsum-undersized", epsilon=eps, delta=delta, n=n_small,
                  epsilon_target=eps, delta_achieved=achieved, delta_reference=delta,
                  direction=direction, method="exact-divergence", passed=achieved <= delta)
    eps = 1.0 if cfg.epsilon is None else cfg.epsilon
    p = BRUTE_FORCE_P
    law = {0: {(): 1 - p, (1,): p}, 1: {(1,): 1 - p, (1, 1): p}}
    for n in BRUTE_FORCE_USERS:
        brute = brute_force_shuffled_dp(law, n, eps)
        analytic, _ = shifted_binomial_delta(n, p, eps)
        table.add(check="brute-force", epsilon=eps, delta=None, n=n, epsilon_target=eps,
                  delta_achieved=brute, delta_reference=analytic, direction="max",
                  method="brute-force", passed=abs(brute - analytic) <= 1e-12)
    return table


def _support_setup(cfg, h):
    eps = 1.0 if cfg.epsilon is None else cfg.epsilon
    delta = 0.01 if cfg.delta is None else cfg.delta
    check_delta_for_support(delta, h)
    probe = ProtocolParams(eps, delta, 10**9).check()
    t = cfg.t if cfg.t is not None else default_threshold(probe, h)
    n = cfg.n if cfg.n is not None else max(required_samples(h, t), math.ceil(probe.min_users()))
    return ProtocolParams(eps, delta, n).check(), t


def solve_support_cmd(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["solve-support"])
    h = cfg.h or 4
    d = cfg.d[0] if cfg.d else 100
    if h > d:
        raise ConfigError(f"h={h} exceeds d={d}")
    params, t = _support_setup(cfg, h)
    trials = cfg.trial_count()
    if trials == 0:
        return table

    def run(r):
        rng = np.random.default_rng([cfg.seed, r])
        inst = SupportInstance(d, (rng.permutation(d)[:h] + 1).tolist())
        found = solve_support(sample_instance(inst, params.n, rng), params, t, rng)
        return found == set(inst.support)

    wins = success_rate(run, True, trials)
    table.add(problem="support", h=h, d=d, n=params.n, t=t, trials=trials, successes=wins,
              success_rate=wins / trials)
    return table


def solve_pc_cmd(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["solve-pc"])
    params, t = _support_setup(cfg, 2)
    k = cfg.k or 2
    trials = cfg.trial_count()
    if trials == 0:
        return table
    for ell in cfg.ell or (4, 16, 64):
        def run(r):
            rng = np.random.default_rng([cfg.seed, ell, r])
            inst = PCInstance.random(ell, k, rng)
            return solve_pc(sample_instance(inst, params.n, rng), params, inst, t, rng) == inst.answer()

        wins = success_rate(run, True, trials)
        table.add(problem="pointer-chasing", ell=ell, k=k, n=params.n, t=t, trials=trials,
                  successes=wins, success_rate=wins / trials)
    return table


def solve_mpj_cmd(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["solve-mpj"])
    s, h = cfg.s or 3, cfg.h or 3
    params, t = _support_setup(cfg, h)
    trials = cfg.trial_count()
    if trials == 0:
        return table

    def run(r):
        rng = np.random.default_rng([cfg.seed, r])
        inst = MPJInstance.random(s, h, rng)
        return solve_mpj(sample_instance(inst, params.n, rng), params, inst, t, rng) == inst.answer()

    wins = success_rate(run, True, trials)
    table.add(problem="pointer-jumping", s=s, h=h,
              code_space=MPJInstance.random(s, h, np.random.default_rng(0)).code_space,
              n=params.n, t=t, trials=trials, successes=wins, success_rate=wins / trials)
    return table


def puredp_demo(cfg: ExperimentConfig) -> ResultTable:
    table = ResultTable(COLUMNS["puredp-demo"])
    inf_law = r_infinity_law()
    for n in range(1, 5):
        table.add(witness="r-infinity shuffled", n=n,
                  max_log_ratio=shuffled_pure_dp_level(inf_law, n),
                  witness_outcome="", full_support=None)
    ratio, where = max_ratio_witness(inf_law[0], inf_law[1])
    table.add(witness="r-infinity message vector", n=1, max_log_ratio=ratio,
              witness_outcome=str(where), full_support=False)
    gap = r_gap_law()
    ratio, where = max_ratio_witness(pre_shuffle_law(gap, 0), pre_shuffle_law(gap, 1))
    table.add(witness="r-gap pre-shuffle", n=1, max_log_ratio=ratio,
              witness_outcome=str(where), full_support=False)
    for n in range(2, 7):
        worst, worst_at = 0.0, ""
        for ones in range(n):
            here = [1] * ones + [0] * (n - ones)
            there = [1] * (ones + 1) + [0] * (n - ones - 1)
            r, y = max_ratio_witness(shuffled_count_pmf(gap, here), shuffled_count_pmf(gap, there))
            if r >= worst:
                worst, worst_at = r, f"{y} ones"
        reach = count_support_reachability([0, 1, 3, 4], n)
        table.add(witness="r-gap shuffled", n=n, max_log_ratio=worst, witness_outcome=worst_at,
                  full_support=reach == set(range(4 * n + 1)))
    return table


COMMANDS = {
    "run-zsum": run_zsum,
    "run-hist": run_hist,
    "verify-privacy": verify_privacy,
    "solve-support": solve_support_cmd,
    "solve-pc": solve_pc_cmd,
    "solve-mpj": solve_mpj_cmd,
    "puredp-demo": puredp_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shuffledp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--delta", type=float)
        p.add_argument("--n", type=int)
        p.add_argument("--d", type=_int_list, help="domain size, or comma list for run-hist")
        p.add_argument("--beta", type=float)
        p.add_argument("--trials", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--mode", choices=("faithful", "aggregate"))
        p.add_argument("--format", choices=("csv", "json"))
        p.add_argument("--out", type=str)
        p.add_argument("--h", type=int, help="support size / tree depth")
        p.add_argument("--t", type=int, help="recovery threshold")
        p.add_argument("--ell", type=_int_list, help="comma list of permutation lengths")
        p.add_argument("--k", type=int, help="pointer-chasing step")
        p.add_argument("--s", type=int, help="tree arity")
    return parser


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    values = {}
    if args.config is not None:
        try:
            values.update(parse_config_text(args.config.read_text()))
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    for key, value in vars(args).items():
        if key != "config" and value is not None:
            values[key] = value
    values["command"] = args.command
    return ExperimentConfig(**values)


def run(cfg: ExperimentConfig) -> ResultTable:
    table = COMMANDS[cfg.command](cfg)
    table.metadata.update({"command": cfg.command, "seed": cfg.seed, "version": __version__,
                           "schema_version": SCHEMA_VERSION,
                           "config": dataclasses.replace(cfg, out=None).to_text().strip()
                           .replace("\n", "; ")})
    return table


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s",
                        stream=sys.stderr)
    args = build_parser().parse_args(argv)
    start = time.perf_counter()
    try:
        cfg = resolve_config(args)
        table = run(cfg)
        text = table.render(cfg.format)
    except (ConfigError, InvalidParamsError) as exc:
        log.error("invalid configuration: %s", exc)
        return 1
    except Exception as exc:  # noqa: BLE001 - reported through the exit code
        log.error("run failed: %s: %s", type(exc).__name__, exc)
        return 2
    try:
        if cfg.out:
            Path(cfg.out).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        log.error("cannot write output: %s", exc)
        return 2
    log.info("%s finished in %.2fs (%d rows)", cfg.command, time.perf_counter() - start,
             len(table.rows))
    return 0
