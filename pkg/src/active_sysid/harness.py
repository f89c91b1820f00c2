"""Closed-loop runs: choose control, step the plant, update the posterior, log.

Each replica owns its plant, posterior and generators; replicas may run in
worker processes (``ACTIVE_SYSID_THREADS`` caps the pool size). All
randomness comes from ``SeedSequence`` streams keyed on the config seed and
the replica index, so runs are reproducible bit for bit.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .config import ConfigError, ExperimentConfig
from .control import StrategySpec, random_control, select_control
from .distributions import f1
from .dynamics import (
    History,
    LinkDomainError,
    build_regressor,
    linearize_observation,
    stack_parameters,
    step,
)
from .estimator import EstimatorError, estimate_noise, update_inplace
from .linalg import NotPositiveDefiniteError, logdet_pd

log = logging.getLogger(__name__)

METRICS = ("param_error", "noise_error", "logdetK", "logdetQ", "joint_entropy", "gamma")


@dataclass
class TraceRecord:
    t: int
    u: np.ndarray
    r: np.ndarray
    y: np.ndarray
    param_error: float
    noise_error: float
    logdetK: float
    logdetQ: float
    joint_entropy: float
    gamma: float


@dataclass
class ReplicaResult:
    replica: int
    strategy: str
    initial_param_error: float
    records: list = field(default_factory=list)
    error: str | None = None

    def metric(self, name: str) -> np.ndarray:
        return np.array([getattr(rec, name) for rec in self.records])

    def final(self, name: str) -> float:
        return getattr(self.records[-1], name) if self.records else float("nan")


@lru_cache(maxsize=4096)
def _f1(d: int, m: int, n: float) -> float:
    return f1(d, m, n)


def run_replica(cfg: ExperimentConfig, replica: int) -> ReplicaResult:
    model = cfg.build_model(replica)
    A_true = stack_parameters(model)
    s = cfg.build_prior()
    h = History.for_model(model)
    noise_rng = cfg.noise_rng(replica)
    control_rng = cfg.control_rng(replica)
    d, m = s.d, s.m
    result = ReplicaResult(replica, cfg.strategy.label, float(np.linalg.norm(A_true - s.M)))

    zero = np.zeros(model.c)
    for _ in range(model.warmup):
        r, _ = step(model, h, zero, noise_rng)
        h.advance(r, zero)

    post_update = cfg.noise_estimate == "post_update"
    for t in range(cfg.T):
        try:
            u = select_control(cfg.strategy, s, h, t, control_rng)
            x = build_regressor(h, u)
            r, e = step(model, h, u, noise_rng)
            y = linearize_observation(model, r)
            e_hat = None if post_update else estimate_noise(s, x, y)
            gamma = update_inplace(s, x, y)
            if post_update:
                e_hat = y - s.M @ x
            h.advance(r, u)
            logdet_k = logdet_pd(s.K, "K")
            logdet_q = logdet_pd(s.Q, "Q")
        except (EstimatorError, LinkDomainError, NotPositiveDefiniteError, ArithmeticError) as exc:
            result.error = f"step {t + 1}: {type(exc).__name__}: {exc}"
            log.warning("replica %d aborted at %s", replica, result.error)
            break
        result.records.append(
            TraceRecord(
                t=t + 1,
                u=np.asarray(u, dtype=float),
                r=r,
                y=y,
                param_error=float(np.linalg.norm(A_true - s.M)),
                noise_error=float(np.linalg.norm(e - e_hat)),
                logdetK=logdet_k,
                logdetQ=logdet_q,
                joint_entropy=-0.5 * d * logdet_k + 0.5 * (m + d + 1) * logdet_q + _f1(d, m, s.n),
                gamma=float(gamma),
            )
        )
    return result


def worker_count(replicas: int) -> int:
    env = os.environ.get("ACTIVE_SYSID_THREADS")
    cap = int(env) if env else (os.cpu_count() or 1)
    return max(1, min(cap, replicas))


def _run_one(args):
    cfg, replica = args
    return run_replica(cfg, replica)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None) -> list:
    """One :class:`ReplicaResult` per replica, in replica order."""
    workers = worker_count(cfg.replicas) if workers is None else workers
    jobs = [(cfg, k) for k in range(cfg.replicas)]
    if workers <= 1:
        return [_run_one(job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_one, jobs))


def checkpoints(T: int) -> list:
    return sorted({k for k in (T // 4, T // 2, T) if k >= 1})


def _quantiles(values) -> dict:
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return {"median": None, "q25": None, "q75": None}
    q25, med, q75 = np.percentile(values, [25, 50, 75])
    return {"median": float(med), "q25": float(q25), "q75": float(q75)}


def summarize(results: list, T: int, metrics=("param_error", "noise_error")) -> dict:
    out = {}
    for k in checkpoints(T):
        entry = {}
        for name in metrics:
            vals = [getattr(r.records[k - 1], name) for r in results if len(r.records) >= k]
            entry[name] = _quantiles(vals)
        entry["replicas"] = sum(len(r.records) >= k for r in results)
        out[str(k)] = entry
    return out


def _comparable(cfg: ExperimentConfig) -> dict:
    doc = cfg.to_dict()
    doc.pop("strategy")
    doc.pop("strategies")
    doc.pop("output")
    return doc


def compare_strategies(cfgs: list, workers: int | None = None, return_results: bool = False):
    """Summary keyed by strategy label, then checkpoint, then metric.

    Configs must agree on everything except the strategy.
    """
    if not cfgs:
        raise ValueError("need at least one config")
    ref = _comparable(cfgs[0])
    for cfg in cfgs[1:]:
        if _comparable(cfg) != ref:
            raise ConfigError("configs to compare must share model, prior, horizon and seeds", "strategies")
    summary, all_results = {}, {}
    for cfg in cfgs:
        label = cfg.strategy.label
        if label in summary:
            k = 2
            while f"{label}#{k}" in summary:
                k += 1
            label = f"{label}#{k}"
        results = run_experiment(cfg, workers)
        summary[label] = summarize(results, cfg.T)
        all_results[label] = results
    return (summary, all_results) if return_results else summary


def expand_strategies(cfg: ExperimentConfig, strategies) -> list:
    return [cfg.with_strategy(s) for s in strategies]


def noise_strategies(cfg: ExperimentConfig) -> list:
    """Default strategy set for noise interrogation runs."""
    dom = cfg.strategy.domain
    return [
        StrategySpec("noise_optimal", dom),
        StrategySpec("tau_infomax", dom, tau=cfg.tau),
        StrategySpec("tau_zero", dom, tau=cfg.tau),
    ]


# -- serialization ----------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def trace_header(d: int, c: int) -> list:
    return (
        ["t"]
        + [f"u_{i}" for i in range(c)]
        + [f"r_{i}" for i in range(d)]
        + [f"y_{i}" for i in range(d)]
        + list(METRICS)
    )


def trace_to_csv(result: ReplicaResult, d: int, c: int) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(trace_header(d, c))
    for rec in result.records:
        writer.writerow(
            [rec.t]
            + [_fmt(v) for v in rec.u]
            + [_fmt(v) for v in rec.r]
            + [_fmt(v) for v in rec.y]
            + [_fmt(getattr(rec, name)) for name in METRICS]
        )
    return buf.getvalue()


def read_trace_csv(text: str) -> list:
    rows = list(csv.DictReader(io.StringIO(text)))
    return [{k: float(v) for k, v in row.items()} for row in rows]


def summary_to_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"


def rollout(cfg: ExperimentConfig, replica: int = 0) -> str:
    """Open-loop plant rollout as CSV (``t, u_*, r_*, e_*``).

    Controls are uniform on the domain unless the strategy is ``zero``.
    """
    model = cfg.build_model(replica)
    h = History.for_model(model)
    noise_rng = cfg.noise_rng(replica)
    control_rng = cfg.control_rng(replica)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["t"] + [f"u_{i}" for i in range(model.c)] + [f"r_{i}" for i in range(model.d)]
                    + [f"e_{i}" for i in range(model.d)])
    for t in range(model.warmup + cfg.T):
        if t < model.warmup or cfg.strategy.kind == "zero":
            u = np.zeros(model.c)
        else:
            u = random_control(cfg.strategy.domain, model.c, control_rng)
        r, e = step(model, h, u, noise_rng)
        h.advance(r, u)
        if t >= model.warmup:
            writer.writerow([t - model.warmup + 1] + [_fmt(v) for v in (*u, *r, *e)])
    return buf.getvalue()
