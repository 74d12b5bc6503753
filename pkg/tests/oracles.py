"""Independent reference implementations used only by the tests."""

from itertools import combinations

import numpy as np

from ndprop.generators import generate
from ndprop.program import GroundProgram, Rule


def reduct_least_model(p: GroundProgram, s) -> set:
    """Least model of the Gelfond-Lifschitz reduct of ``p`` w.r.t. ``s``."""
    s = set(s)
    definite = [(r.head, set(r.pos)) for r in p.rules if not set(r.neg) & s]
    model = set()
    changed = True
    while changed:
        changed = False
        for head, pos in definite:
            if head not in model and pos <= model:
                model.add(head)
                changed = True
    return model


def is_stable_reduct(p: GroundProgram, s) -> bool:
    return reduct_least_model(p, s) == set(s)


def stable_models_bruteforce(p: GroundProgram) -> list:
    out = []
    for k in range(p.n + 1):
        for combo in combinations(range(p.n), k):
            if is_stable_reduct(p, combo):
                out.append(frozenset(combo))
    return sorted(out, key=lambda m: sum(1 << a for a in m))


def random_program(rng: np.random.Generator, max_atoms: int = 12) -> GroundProgram:
    """Mixed corpus: N2L, 3-LP, and free-form rules with positive bodies."""
    kind = rng.integers(3)
    if kind == 0:
        n = int(rng.integers(2, max_atoms + 1))
        c1 = float(rng.uniform(0, min(n, 6)))
        return generate("n2l", n, int(rng.integers(2**31)), c1=c1, c2=float(rng.uniform(0, 1.5)))
    if kind == 1:
        n = int(rng.integers(4, max_atoms + 1))
        return generate("3lp", n, int(rng.integers(2**31)), ratio=float(rng.uniform(1, 6)))
    n = int(rng.integers(1, max_atoms + 1))
    rules = []
    for _ in range(int(rng.integers(0, 3 * n + 1))):
        head = int(rng.integers(n))
        k = int(rng.integers(0, min(n, 4) + 1))
        body = rng.choice(n, size=k, replace=False)
        neg = rng.random(k) < 0.5
        r = Rule.make(head, body[~neg].tolist(), body[neg].tolist())
        if not r.self_inconsistent:
            rules.append(r)
    return GroundProgram.from_rules(tuple(f"p{i}" for i in range(n)), rules)
