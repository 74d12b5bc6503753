"""Solve-rate evaluation and the generate -> train -> eval experiment pipeline."""

from __future__ import annotations

import csv
import io
import json
import logging
import re
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .crisp import is_stable
from .dprop import random_assignment, rdprop_solve
from .generators import build_dataset, load_dataset
from .policy import (
    PolicyWeights,
    TrainConfig,
    evaluate,
    init_weights,
    save_weights,
    train,
)

log = logging.getLogger(__name__)

CSV_COLUMNS = ("split", "mode", "solve_rate", "mean_decisions", "wall_ms", "seed")
CSV_SCHEMA = "# ndprop-eval v1"


class InvariantViolation(RuntimeError):
    """A solver claimed a model that fails the stability check."""


@dataclass(frozen=True)
class Mode:
    kind: str            # rdprop | ndprop | random
    restarts: int = 1

    @property
    def label(self) -> str:
        return f"rdprop-{self.restarts}" if self.kind == "rdprop" else self.kind

    @classmethod
    def parse(cls, text: str, restarts: int | None = None) -> "Mode":
        m = re.fullmatch(r"rdprop(?:[-(](\d+)\)?)?", text.strip().lower())
        if m:
            k = int(m.group(1)) if m.group(1) else (restarts or 1)
            if k < 1:
                raise ValueError("rdprop needs at least one restart")
            return cls("rdprop", k)
        if text in ("ndprop", "random"):
            return cls(text)
        raise ValueError(f"unknown eval mode {text!r} (rdprop-K, ndprop, random)")


@dataclass
class EvalRow:
    split: str
    mode: str
    solve_rate: float
    mean_decisions: float
    wall_ms: float
    seed: int
    solved: int = 0
    total: int = 0
    models: list = field(default_factory=list, repr=False)

    def csv_fields(self) -> list[str]:
        return [self.split, self.mode, f"{self.solve_rate:.2f}", f"{self.mean_decisions:.3f}",
                f"{self.wall_ms:.0f}", str(self.seed)]


@dataclass
class EvalReport:
    rows: list[EvalRow] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write(CSV_SCHEMA + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for row in self.rows:
            w.writerow(row.csv_fields())
        return buf.getvalue()

    def table(self) -> str:
        head = f"{'split':<8} {'mode':<12} {'solved':>9} {'rate%':>7} {'decisions':>9} {'ms':>8}"
        lines = [head, "-" * len(head)]
        for r in self.rows:
            lines.append(f"{r.split:<8} {r.mode:<12} {f'{r.solved}/{r.total}':>9} "
                         f"{r.solve_rate:>7.2f} {r.mean_decisions:>9.3f} {r.wall_ms:>8.0f}")
        return "\n".join(lines) + "\n"


def read_csv(text: str) -> list[dict]:
    lines = [ln for ln in text.splitlines() if not ln.startswith("#")]
    return list(csv.DictReader(lines))


def run_eval(mode: Mode, programs, seed: int = 0, split: str = "test",
             weights: PolicyWeights | None = None, config: TrainConfig | None = None,
             timing: bool = False) -> EvalRow:
    """Solve every program once under ``mode`` and re-verify each claimed model.

    Wall time is only measured with ``timing``; otherwise it is reported as 0
    so that reports are byte-reproducible.
    """
    start = time.perf_counter()
    found: list = []
    decisions: list[int] = []
    if mode.kind == "ndprop":
        if weights is None:
            raise ValueError("ndprop evaluation needs weights")
        config = config or TrainConfig(hidden_dim=weights.hidden_dim,
                                       logical_dim=weights.logical_dim)
        for r in evaluate(weights, list(programs), config, seed=seed):
            found.append(r.model)
            decisions.append(config.test_outer_iterations)
    else:
        for idx, p in enumerate(programs):
            rng = np.random.default_rng([int(seed), idx])
            if mode.kind == "rdprop":
                outcome, stats = rdprop_solve(p, mode.restarts, rng)
                found.append(outcome.model if outcome.success else None)
                decisions.append(stats.decisions)
            else:
                found.append(random_assignment(p, rng))
                decisions.append(0)
    solved = 0
    solved_decisions = []
    for p, model, d in zip(programs, found, decisions):
        if model is None:
            continue
        if not is_stable(p, model):
            raise InvariantViolation(f"{mode.label} returned a non-stable model {sorted(model)}")
        solved += 1
        solved_decisions.append(d)
    total = len(found)
    wall = 1000.0 * (time.perf_counter() - start) if timing else 0.0
    return EvalRow(
        split=split,
        mode=mode.label,
        solve_rate=100.0 * solved / total if total else 0.0,
        mean_decisions=float(np.mean(solved_decisions)) if solved_decisions else 0.0,
        wall_ms=wall,
        seed=int(seed),
        solved=solved,
        total=total,
        models=found,
    )


def eval_dataset(root, modes, seed=0, part="test", weights=None, config=None,
                 timing=False) -> EvalReport:
    ds = load_dataset(root)
    programs = [inst.program for inst in ds[part]]
    split = ds.manifest.get("split", part)
    report = EvalReport()
    for mode in modes:
        report.rows.append(run_eval(mode, programs, seed, split, weights, config, timing))
    return report


# -- experiment suite -------------------------------------------------------------

DEFAULT_SUITE = {
    "generator": "n2l",
    "split": "easy",
    "counts": [500, 100, 100],
    "seed": 0,
    "c1": 5.0,
    "c2": 1.0,
    "ratio": 5.0,
    "oracle_cap": 20,
    "modes": ["rdprop-1", "rdprop-10", "rdprop-100", "random", "ndprop"],
    "eval_seed": 0,
    "timing": False,
    "train": {"epochs": 200, "hidden_dim": 32, "logical_dim": 8, "lr": 1e-3,
              "tnorm": "godel", "batch_size": 8, "loss_mode": "min", "train_inner_sweeps": 2,
              "val_every": 5, "seed": 0},
}


def resolve_suite_config(config: dict | None) -> dict:
    resolved = json.loads(json.dumps(DEFAULT_SUITE))
    for key, value in (config or {}).items():
        if key not in resolved:
            raise ValueError(f"unknown suite config key {key!r}")
        if key == "train":
            unknown = set(value) - set(TrainConfig().to_dict())
            if unknown:
                raise ValueError(f"unknown train config keys {sorted(unknown)}")
            resolved["train"].update(value)
        else:
            resolved[key] = value
    TrainConfig(**resolved["train"])
    [Mode.parse(m) for m in resolved["modes"]]
    return resolved


def run_experiment_suite(config: dict | None, out_dir, progress=None) -> dict:
    """Generate a dataset, train (unless epochs=0), evaluate all modes, write artifacts."""
    from .plotting import plot_solve_rates, plot_training

    cfg = resolve_suite_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data_dir = out / "data"
    ds = build_dataset(data_dir, cfg["generator"], cfg["split"], cfg["counts"], cfg["seed"],
                       cfg["oracle_cap"], cfg["c1"], cfg["c2"], cfg["ratio"])
    tcfg = TrainConfig(**cfg["train"])
    train_set = [(i.program, i.models) for i in ds["train"]]
    val_set = [(i.program, i.models) for i in ds["val"]]
    if tcfg.epochs > 0 and train_set:
        weights, tlog = train(train_set, tcfg, val_set, progress=progress)
        log_dict = tlog.to_dict()
    else:
        rng = np.random.default_rng(tcfg.seed)
        weights = init_weights(tcfg.hidden_dim, tcfg.logical_dim, rng.integers(2**32), tcfg.tnorm)
        log_dict = {"epoch_loss": [], "val_rate": [], "best_epoch": 0, "best_val_rate": None}
    save_weights(weights, out / "weights.bin")
    (out / "train_log.json").write_text(json.dumps(log_dict, indent=1) + "\n", encoding="utf-8")

    programs = [i.program for i in ds["test"]]
    report = EvalReport()
    for text in cfg["modes"]:
        mode = Mode.parse(text)
        report.rows.append(run_eval(mode, programs, cfg["eval_seed"], cfg["split"],
                                    weights if mode.kind == "ndprop" else None, tcfg,
                                    cfg["timing"]))
    (out / "report.csv").write_text(report.to_csv(), encoding="utf-8")
    (out / "report.txt").write_text(report.table(), encoding="utf-8")
    plot_solve_rates(report, out / "solve_rates.png")
    plot_training(log_dict, out / "training.png")
    (out / "config.json").write_text(json.dumps(cfg, indent=1, sort_keys=True) + "\n",
                                     encoding="utf-8")
    return {"dir": out, "report": report, "config": cfg, "weights": weights, "train_log": log_dict}
