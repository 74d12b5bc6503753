"""Decision-propagation runs over (true, false, undecided) atom sets.

Each iteration falsifies a policy-chosen set ``E`` of undecided atoms and then
recomputes the true set as the least fixpoint of the consequence operator with
the non-false atoms as the blocking set. A run that empties the undecided set
without the true and false sets meeting yields a stable model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .crisp import fixpoint_mask, from_mask, is_stable, to_mask
from .program import GroundProgram

SUCCESS = "success"
CONTRADICTION = "contradiction"


class GuidanceExhausted(RuntimeError):
    """The guided policy has no non-target undecided atom left to falsify."""


class PolicyError(RuntimeError):
    pass


@dataclass(frozen=True)
class CrispState:
    t: int
    f: int
    u: int
    k: int = 0

    @property
    def t_set(self) -> frozenset[int]:
        return from_mask(self.t)

    @property
    def f_set(self) -> frozenset[int]:
        return from_mask(self.f)

    @property
    def u_set(self) -> frozenset[int]:
        return from_mask(self.u)

    @property
    def contradictory(self) -> bool:
        return bool(self.t & self.f)


DecisionPolicy = Callable[[CrispState, GroundProgram, np.random.Generator], Iterable[int]]


@dataclass
class RunOutcome:
    status: str
    model: frozenset[int] | None
    iterations: int
    trace: list[frozenset[int]] = field(default_factory=list)
    states: list[CrispState] = field(default_factory=list)

    @property
    def success(self) -> bool:
        return self.status == SUCCESS


@dataclass
class SolveStats:
    runs: int = 0
    decisions: int = 0


def init_state(p: GroundProgram) -> CrispState:
    t = fixpoint_mask(p, p.all_mask, 0)
    return CrispState(t=t, f=0, u=p.all_mask & ~t, k=0)


def dprop_step(p: GroundProgram, state: CrispState, policy: DecisionPolicy, rng=None) -> CrispState:
    e = to_mask(policy(state, p, rng))
    if e & ~state.u:
        raise PolicyError("policy selected atoms outside the undecided set")
    return apply_decision(p, state, e)


def apply_decision(p: GroundProgram, state: CrispState, e: int) -> CrispState:
    """One decision+propagation with a fixed falsified set ``e`` (may be empty)."""
    f = state.f | e
    t = fixpoint_mask(p, p.all_mask & ~f, state.t)
    u = state.u & ~(t | f)
    return CrispState(t=t, f=f, u=u, k=state.k + 1)


def dprop_run(
    p: GroundProgram,
    policy: DecisionPolicy,
    rng: np.random.Generator | None = None,
    max_iters: int | None = None,
) -> RunOutcome:
    if max_iters is None:
        max_iters = p.n
    state = init_state(p)
    trace: list[frozenset[int]] = []
    states = [state]
    while state.u:
        if state.k >= max_iters:
            raise RuntimeError(f"run exceeded {max_iters} iterations")
        e = to_mask(policy(state, p, rng))
        if not e:
            raise PolicyError("policy returned an empty decision on a non-empty undecided set")
        if e & ~state.u:
            raise PolicyError("policy selected atoms outside the undecided set")
        trace.append(from_mask(e))
        state = apply_decision(p, state, e)
        states.append(state)
        if state.contradictory:
            return RunOutcome(CONTRADICTION, None, state.k, trace, states)
    if state.contradictory:
        return RunOutcome(CONTRADICTION, None, state.k, trace, states)
    return RunOutcome(SUCCESS, from_mask(state.t), state.k, trace, states)


def random_policy(singleton: bool = True) -> DecisionPolicy:
    """Uniform random decisions; non-singleton mode falsifies a random non-empty subset."""

    def policy(state, p, rng):
        undecided = sorted(state.u_set)
        if singleton:
            return {undecided[int(rng.integers(len(undecided)))]}
        while True:
            keep = rng.integers(0, 2, size=len(undecided)).astype(bool)
            if keep.any():
                return {a for a, k in zip(undecided, keep) if k}

    return policy


def guided_policy(target) -> DecisionPolicy:
    """Falsify one undecided atom outside ``target`` (a known stable model)."""
    target_mask = to_mask(target)

    def policy(state, p, rng):
        cand = sorted(from_mask(state.u & ~target_mask))
        if not cand:
            raise GuidanceExhausted("no undecided atom outside the target model")
        if rng is None:
            return {cand[0]}
        return {cand[int(rng.integers(len(cand)))]}

    return policy


def fixed_policy(decisions: Iterable[Iterable[int]]) -> DecisionPolicy:
    """Replay a precomputed list of decision sets."""
    queue = [to_mask(e) for e in decisions]

    def policy(state, p, rng):
        if not queue:
            raise PolicyError("fixed decision list exhausted")
        return from_mask(queue.pop(0))

    return policy


def _as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    return np.random.default_rng(rng)


def rdprop_solve(p: GroundProgram, restarts: int, rng=None,
                 max_iters: int | None = None) -> tuple[RunOutcome, SolveStats]:
    """Random-decision runs with up to ``restarts`` attempts; first success wins."""
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    rng = _as_generator(rng)
    policy = random_policy(singleton=True)
    stats = SolveStats()
    outcome = None
    for child in rng.spawn(restarts):
        outcome = dprop_run(p, policy, child, max_iters)
        stats.runs += 1
        stats.decisions += len(outcome.trace)
        if outcome.success:
            break
    return outcome, stats


def random_assignment(p: GroundProgram, rng=None) -> frozenset[int] | None:
    """Baseline: one uniformly random interpretation, kept only if stable."""
    rng = _as_generator(rng)
    bits = rng.integers(0, 2, size=p.n)
    s = frozenset(int(i) for i in np.flatnonzero(bits))
    return s if is_stable(p, s) else None
