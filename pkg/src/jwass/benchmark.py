"""Rotated two-moons benchmark across critic kinds and seeds.

One cell = (critic kind, seed): generate a domain pair related by a rigid
rotation, mask most labels, train, and evaluate on the fully labeled data.
The headline comparison is the median over seeds of the final transport
distance and of the per-domain accuracies, kind against kind.
"""

from __future__ import annotations

import dataclasses
import json
import statistics
from dataclasses import dataclass, field

from .distributions import (
    DatasetSplit,
    gen_two_moons_domains,
    gen_two_moons_raw,
)
from .errors import ContractError
from .objective import CriticNet
from .trainer import (
    Metrics,
    MetricsLog,
    ModelPair,
    TrainConfig,
    evaluate,
    train,
)

@dataclass
class BenchmarkConfig:
    kinds: tuple = ("none", "marginal", "class_dependent")
    seeds: tuple = (0, 1, 2, 3, 4)
    n_per_domain: int = 2000
    rotation_deg: float = 35.0
    noise_sd: float = 0.24
    labeled_fraction: float = 0.1  # applied to both domains
    epochs: int = 50
    w_critic: float = 0.1
    batch_size: int = 64
    eval_max_points: int = 500

    def __post_init__(self):
        if not self.kinds or not self.seeds:
            raise ContractError("benchmark needs at least one kind and seed")
        if len(set(self.seeds)) != len(self.seeds):
            raise ContractError("benchmark seeds must be distinct")


@dataclass
class RunOutcome:
    """One trained cell. The model objects ride along for follow-up work
    (fine-tuning, exports) but stay out of the serialized summary."""

    kind: str
    seed: int
    metrics: Metrics
    model: ModelPair
    critic: CriticNet | None
    log: MetricsLog

    def row(self) -> dict:
        return {"seed": self.seed, **self.metrics.to_dict()}


def benchmark_datasets(config: BenchmarkConfig, seed: int
                       ) -> tuple[DatasetSplit, DatasetSplit,
                                  DatasetSplit, DatasetSplit]:
    """(masked P, masked Q, full P, full Q) for one seed's cell.

    Training sees the semi-supervised splits; the fully labeled twins
    (same seed, so identical points) are kept for evaluation only.
    """
    masked_p, masked_q = gen_two_moons_domains(
        config.n_per_domain, config.rotation_deg, config.noise_sd,
        alpha=config.labeled_fraction, beta=config.labeled_fraction,
        seed=seed)
    full_p, full_q = gen_two_moons_raw(
        config.n_per_domain, config.rotation_deg, config.noise_sd, seed=seed)
    return masked_p, masked_q, full_p, full_q


def make_train_config(config: BenchmarkConfig, kind: str,
                      seed: int) -> TrainConfig:
    return TrainConfig(critic_kind=kind, seed=seed, epochs=config.epochs,
                       w_critic=config.w_critic,
                       batch_size=config.batch_size)


def run_cell(config: BenchmarkConfig, kind: str, seed: int) -> RunOutcome:
    masked_p, masked_q, full_p, full_q = benchmark_datasets(config, seed)
    tc = make_train_config(config, kind, seed)
    model, critic, log = train(tc, masked_p, masked_q)
    metrics = evaluate(model, critic, full_p, full_q,
                       label_scale=tc.label_scale,
                       max_points=config.eval_max_points)
    return RunOutcome(kind, seed, metrics, model, critic, log)


@dataclass
class BenchmarkResult:
    config: BenchmarkConfig
    outcomes: list[RunOutcome] = field(default_factory=list)

    def cell(self, kind: str, seed: int) -> RunOutcome:
        for o in self.outcomes:
            if o.kind == kind and o.seed == seed:
                return o
        raise ContractError(f"no outcome for kind={kind!r} seed={seed}")

    def of_kind(self, kind: str) -> list[RunOutcome]:
        got = [o for o in self.outcomes if o.kind == kind]
        if not got:
            raise ContractError(f"no outcomes for kind={kind!r}")
        return got

    def median_w(self, kind: str) -> float:
        return statistics.median(o.metrics.w_dist for o in self.of_kind(kind))

    def median_min_acc(self, kind: str) -> float:
        return statistics.median(o.metrics.acc_min for o in self.of_kind(kind))

    def median_avg_acc(self, kind: str) -> float:
        return statistics.median(o.metrics.acc_avg for o in self.of_kind(kind))

    def summary(self) -> dict:
        cells = {}
        for kind in self.config.kinds:
            rows = sorted((o.row() for o in self.of_kind(kind)),
                          key=lambda r: r["seed"])
            cells[kind] = {"per_seed": rows,
                           "median_w_dist": self.median_w(kind),
                           "median_min_acc": self.median_min_acc(kind),
                           "median_avg_acc": self.median_avg_acc(kind)}
        return {"config": dataclasses.asdict(self.config), "cells": cells}

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2)
            fh.write("\n")


def run_rotation_benchmark(config: BenchmarkConfig | None = None
                           ) -> BenchmarkResult:
    """Train every (kind, seed) cell sequentially; deterministic per
    config. Seeds share datasets across kinds so the comparison is
    paired."""
    config = config if config is not None else BenchmarkConfig()
    result = BenchmarkResult(config)
    for kind in config.kinds:
        for seed in config.seeds:
            result.outcomes.append(run_cell(config, kind, seed))
    return result
