"""Classical semantics: immediate consequence, least fixpoints, stability.

Interpretations are exchanged as ``frozenset`` of atom indices; internally the
fixpoint loops run on Python ints used as bitsets.
"""

from __future__ import annotations

from typing import Iterable

import numpy as np

from .program import GroundProgram

Interpretation = frozenset

DEFAULT_ATOM_CAP = 20


class OracleScaleExceeded(ValueError):
    pass


def to_mask(atoms: Iterable[int] | int) -> int:
    if isinstance(atoms, (int, np.integer)):
        return int(atoms)
    m = 0
    for a in atoms:
        m |= 1 << int(a)
    return m


def from_mask(mask: int) -> frozenset[int]:
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def consequence_mask(p: GroundProgram, j: int, i: int) -> int:
    out = 0
    for head, pos, neg in p.rule_masks:
        if pos & i == pos and not neg & j:
            out |= head
    return out


def fixpoint_mask(p: GroundProgram, j: int, i0: int = 0) -> int:
    """Iterate ``C_{P,J}`` from ``i0``; stops at a fixpoint or the first repeat."""
    cur = i0
    seen = {cur}
    while True:
        nxt = consequence_mask(p, j, cur)
        if nxt == cur or nxt in seen:
            return nxt
        seen.add(nxt)
        cur = nxt


def immediate_consequence(p: GroundProgram, j, i) -> frozenset[int]:
    """Heads of rules with ``B+ ⊆ i`` and ``B- ∩ j = ∅``."""
    return from_mask(consequence_mask(p, to_mask(j), to_mask(i)))


def least_fixpoint(p: GroundProgram, j, i0=()) -> frozenset[int]:
    return from_mask(fixpoint_mask(p, to_mask(j), to_mask(i0)))


def is_stable(p: GroundProgram, s) -> bool:
    m = to_mask(s)
    return fixpoint_mask(p, m, 0) == m


def _rule_arrays(p: GroundProgram):
    rm = p.rule_masks
    heads = np.array([h for h, _, _ in rm], dtype=np.int64)
    pos = np.array([q for _, q, _ in rm], dtype=np.int64)
    neg = np.array([c for _, _, c in rm], dtype=np.int64)
    return heads, pos, neg


def _stable_chunk(heads, pos, neg, s):
    # least fixpoint of C_{P,S} from the empty set, for every S in the chunk at once
    blocked = (s[:, None] & neg[None, :]) != 0
    cur = np.zeros_like(s)
    while True:
        fire = ((cur[:, None] & pos[None, :]) == pos[None, :]) & ~blocked
        nxt = np.bitwise_or.reduce(np.where(fire, heads[None, :], 0), axis=1)
        if np.array_equal(nxt, cur):
            return cur == s
        cur = nxt


def enumerate_stable_models(
    p: GroundProgram, atom_cap: int = DEFAULT_ATOM_CAP, chunk: int = 1 << 14
) -> list[frozenset[int]]:
    """All stable models by exhaustive subset testing, in bitmask order."""
    n = p.n
    if n > atom_cap or n > 62:
        raise OracleScaleExceeded(
            f"oracle scale exceeded: {n} atoms, cap is {min(atom_cap, 62)}"
        )
    if not p.rules:
        return [frozenset()]
    heads, pos, neg = _rule_arrays(p)
    found = []
    total = 1 << n
    for start in range(0, total, chunk):
        s = np.arange(start, min(total, start + chunk), dtype=np.int64)
        ok = _stable_chunk(heads, pos, neg, s)
        found.extend(int(x) for x in s[ok])
    return [from_mask(m) for m in found]


def format_models(p: GroundProgram, models) -> str:
    return "".join(p.format_model(m) + "\n" for m in models)
