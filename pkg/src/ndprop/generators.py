"""Random program generators and oracle-labelled dataset directories."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .crisp import DEFAULT_ATOM_CAP, enumerate_stable_models, format_models
from .program import GroundProgram, Rule, load_program

log = logging.getLogger(__name__)

SPLIT_RANGES = {"easy": (5, 10), "medium": (11, 50), "hard": (51, 100)}
PARTS = ("train", "val", "test")
KINDS = ("n2l", "3lp")
MANIFEST = "manifest"


class DatasetConfigError(ValueError):
    pass


@dataclass(frozen=True)
class N2LParams:
    n: int
    c1: float = 5.0
    c2: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("N2L needs n >= 2")
        if self.c1 < 0 or self.c2 < 0 or self.c1 > self.n or self.c2 > self.n:
            raise ValueError("need 0 <= c1, c2 <= n so that c/n is a probability")


@dataclass(frozen=True)
class ThreeLPParams:
    n: int
    l: int
    seed: int = 0

    def __post_init__(self):
        if self.n < 4:
            raise ValueError("3-LP needs n >= 4")
        if self.l < 1:
            raise ValueError("3-LP needs at least one rule")


def _names(n: int) -> tuple[str, ...]:
    return tuple(f"a{i}" for i in range(n))


def gen_n2l(params: N2LParams) -> GroundProgram:
    """Linear-model N2L program.

    Every ordered pair ``a != b`` gives ``a :- not b.`` with probability
    ``c1/n``; every atom gives ``a :- not a.`` with probability ``c2/n``.
    """
    n = params.n
    rng = np.random.default_rng(params.seed)
    pair = rng.random((n, n)) < params.c1 / n
    self_rule = rng.random(n) < params.c2 / n
    rules = []
    for a in range(n):
        for b in range(n):
            if a != b and pair[a, b]:
                rules.append(Rule(a, (), (b,)))
        if self_rule[a]:
            rules.append(Rule(a, (), (a,)))
    return GroundProgram.from_rules(_names(n), rules)


def gen_3lp(params: ThreeLPParams) -> GroundProgram:
    """``l`` rules, each with a uniform head and three distinct non-head body
    atoms, each negated with probability 1/2."""
    n = params.n
    rng = np.random.default_rng(params.seed)
    # distinct rules only: a repeated draw is redrawn, so exactly l rules come out
    capacity = n * (n - 1) * (n - 2) * (n - 3) // 6 * 8
    if params.l > capacity:
        raise ValueError(f"at most {capacity} distinct 3-literal rules over {n} atoms")
    rules: dict[Rule, None] = {}
    while len(rules) < params.l:
        head = int(rng.integers(n))
        others = np.delete(np.arange(n), head)
        body = rng.choice(others, size=3, replace=False)
        negated = rng.random(3) < 0.5
        rules.setdefault(Rule.make(head, body[~negated].tolist(), body[negated].tolist()))
    return GroundProgram(_names(n), tuple(rules))


def generate(kind: str, n: int, seed, c1=5.0, c2=1.0, ratio=5.0) -> GroundProgram:
    if kind == "n2l":
        return gen_n2l(N2LParams(n, c1, c2, _seed_int(seed)))
    if kind == "3lp":
        return gen_3lp(ThreeLPParams(n, max(1, int(round(ratio * n))), _seed_int(seed)))
    raise ValueError(f"unknown generator {kind!r}")


def _seed_int(seed) -> int:
    if isinstance(seed, (list, tuple)):
        return int(np.random.SeedSequence(list(seed)).generate_state(1, dtype=np.uint64)[0])
    return int(seed)


# -- datasets -----------------------------------------------------------------------

@dataclass
class Instance:
    name: str
    part: str
    program: GroundProgram
    models: list | None          # None when labels are unavailable
    meta: dict = field(default_factory=dict)

    @property
    def labeled(self) -> bool:
        return self.models is not None


@dataclass
class Dataset:
    root: Path
    manifest: dict
    parts: dict[str, list[Instance]]

    def __getitem__(self, part: str) -> list[Instance]:
        return self.parts.get(part, [])


def _instance_seed(seed: int, part: str, idx: int, attempt: int) -> list[int]:
    return [int(seed), PARTS.index(part), idx, attempt]


def build_dataset(
    out_dir,
    kind: str = "n2l",
    split: str = "easy",
    counts=(1000, 100, 100),
    seed: int = 0,
    oracle_cap: int = DEFAULT_ATOM_CAP,
    c1: float = 5.0,
    c2: float = 1.0,
    ratio: float = 5.0,
    max_attempts: int = 10000,
    consistent_test: bool = True,
) -> Dataset:
    """Generate a dataset directory with ``train/``, ``val/``, ``test/`` and a manifest.

    Train/val instances are oracle-labelled and rejection-sampled until they
    have at least one stable model. Test instances are labelled when they fit
    under ``oracle_cap``; labelled test instances are rejection-sampled the same
    way unless ``consistent_test`` is false. Unlabelled ones are kept as drawn.
    """
    if kind not in KINDS:
        raise DatasetConfigError(f"unknown generator kind {kind!r}")
    if split not in SPLIT_RANGES:
        raise DatasetConfigError(f"unknown split {split!r}")
    counts = dict(zip(PARTS, counts)) if not isinstance(counts, dict) else dict(counts)
    if any(counts.get(k, 0) < 0 for k in PARTS) or sum(counts.values()) < 1:
        raise DatasetConfigError("counts must be non-negative and not all zero")
    lo, hi = SPLIT_RANGES[split]
    if (counts.get("train", 0) or counts.get("val", 0)) and lo > oracle_cap:
        raise DatasetConfigError(
            f"split {split!r} has at least {lo} atoms, above the oracle cap {oracle_cap}; "
            "labelled train/val parts cannot be built"
        )
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    records = []
    rejected = {k: 0 for k in PARTS}
    parts: dict[str, list[Instance]] = {}
    for part in PARTS:
        (root / part).mkdir(exist_ok=True)
        parts[part] = []
        for idx in range(counts.get(part, 0)):
            for attempt in range(max_attempts):
                iseed = _instance_seed(seed, part, idx, attempt)
                rng = np.random.default_rng(iseed)
                n = int(rng.integers(lo, hi + 1))
                if part != "test" and n > oracle_cap:
                    raise DatasetConfigError(
                        f"oracle cap exceeded: {part} instance with {n} atoms (cap {oracle_cap})"
                    )
                prog = generate(kind, n, iseed, c1, c2, ratio)
                models = enumerate_stable_models(prog, oracle_cap) if n <= oracle_cap else None
                if models is not None and not models and (part != "test" or consistent_test):
                    rejected[part] += 1
                    continue
                break
            else:
                raise DatasetConfigError(f"no consistent instance after {max_attempts} attempts")
            name = f"{idx:04d}"
            (root / part / f"{name}.lp").write_text(prog.__str__(), encoding="utf-8")
            (root / part / f"{name}.models").write_text(
                format_models(prog, models) if models else "", encoding="utf-8"
            )
            meta = {"part": part, "name": name, "n": n, "rules": len(prog.rules),
                    "seed": iseed, "attempt": attempt, "labeled": models is not None,
                    "models": None if models is None else len(models)}
            records.append(meta)
            parts[part].append(Instance(name, part, prog, models, meta))
        if rejected[part]:
            log.info("%s: rejected %d instances without stable models", part, rejected[part])
    manifest = {
        "format": 1,
        "generator": kind,
        "split": split,
        "atom_range": [lo, hi],
        "params": {"c1": c1, "c2": c2} if kind == "n2l" else {"ratio": ratio},
        "seed": seed,
        "counts": {k: counts.get(k, 0) for k in PARTS},
        "oracle_cap": oracle_cap,
        "consistent_test": consistent_test,
        "rejected": rejected,
        "instances": records,
    }
    (root / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n",
                                 encoding="utf-8")
    return Dataset(root, manifest, parts)


def _read_models(prog: GroundProgram, text: str) -> list[frozenset[int]]:
    models = []
    for line in text.splitlines():
        models.append(frozenset(prog.index_of(tok) for tok in line.split()))
    return models


def load_dataset(root) -> Dataset:
    root = Path(root)
    mpath = root / MANIFEST
    if not mpath.is_file():
        raise FileNotFoundError(f"no dataset manifest at {mpath}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    parts: dict[str, list[Instance]] = {k: [] for k in PARTS}
    for meta in manifest["instances"]:
        part, name = meta["part"], meta["name"]
        prog = load_program(root / part / f"{name}.lp")
        mtext = (root / part / f"{name}.models").read_text(encoding="utf-8")
        models = _read_models(prog, mtext) if meta["labeled"] else None
        parts[part].append(Instance(name, part, prog, models, meta))
    return Dataset(root, manifest, parts)


def regenerate(manifest: dict, out_dir) -> Dataset:
    """Rebuild a dataset from its manifest alone."""
    params = manifest["params"]
    return build_dataset(
        out_dir, manifest["generator"], manifest["split"], manifest["counts"],
        manifest["seed"], manifest["oracle_cap"],
        consistent_test=manifest.get("consistent_test", True),
        c1=params.get("c1", 5.0), c2=params.get("c2", 1.0), ratio=params.get("ratio", 5.0),
    )


def list_files(root) -> list[str]:
    root = Path(root)
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


__all__ = [
    "N2LParams", "ThreeLPParams", "gen_n2l", "gen_3lp", "generate", "build_dataset",
    "load_dataset", "regenerate", "Dataset", "Instance", "DatasetConfigError", "SPLIT_RANGES",
]
