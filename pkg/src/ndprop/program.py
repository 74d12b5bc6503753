"""Ground normal logic programs: parsing, validation, serialization.

A rule ``a :- b1, ..., bm, not c1, ..., not cl.`` is stored as a head atom
index plus sorted tuples of positive and negative body atom indices.
Atoms are indexed in order of first appearance in the source text.
"""

from __future__ import annotations

import re
import warnings
from dataclasses import dataclass, field
from typing import Iterable, Sequence

MAX_NAME_LEN = 255

__all__ = [
    "Rule",
    "GroundProgram",
    "ProgramSyntaxError",
    "parse_program",
    "serialize_program",
    "validate",
    "load_program",
]


class ProgramSyntaxError(ValueError):
    """Raised on malformed program text; carries 1-based line/column."""

    def __init__(self, msg: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {msg}")
        self.line = line
        self.col = col


@dataclass(frozen=True, order=True)
class Rule:
    head: int
    pos: tuple[int, ...] = ()
    neg: tuple[int, ...] = ()

    @classmethod
    def make(cls, head: int, pos: Iterable[int] = (), neg: Iterable[int] = ()) -> "Rule":
        return cls(int(head), tuple(sorted(set(pos))), tuple(sorted(set(neg))))

    @property
    def is_fact(self) -> bool:
        return not self.pos and not self.neg

    @property
    def self_inconsistent(self) -> bool:
        return bool(set(self.pos) & set(self.neg))


@dataclass(frozen=True)
class GroundProgram:
    """Immutable ground program over atoms ``0..n-1``.

    ``heads_index[a]`` lists the ids of the rules whose head is ``a``. It is
    derived from ``rules`` when not given explicitly.
    """

    atoms: tuple[str, ...]
    rules: tuple[Rule, ...]
    heads_index: tuple[tuple[int, ...], ...] | None = None
    dropped: int = field(default=0, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple(self.atoms))
        object.__setattr__(self, "rules", tuple(self.rules))
        if self.heads_index is None:
            idx: list[list[int]] = [[] for _ in self.atoms]
            for rid, r in enumerate(self.rules):
                if 0 <= r.head < len(idx):
                    idx[r.head].append(rid)
            object.__setattr__(self, "heads_index", tuple(tuple(x) for x in idx))
        else:
            object.__setattr__(
                self, "heads_index", tuple(tuple(x) for x in self.heads_index)
            )
        # bitmask form of every rule, used by the crisp engine
        masks = []
        for r in self.rules:
            pos = 0
            for b in r.pos:
                pos |= 1 << b
            neg = 0
            for c in r.neg:
                neg |= 1 << c
            masks.append((1 << r.head, pos, neg))
        object.__setattr__(self, "_masks", tuple(masks))

    @property
    def n(self) -> int:
        return len(self.atoms)

    @property
    def all_mask(self) -> int:
        return (1 << self.n) - 1

    @property
    def rule_masks(self) -> tuple[tuple[int, int, int], ...]:
        """``(head_bit, pos_mask, neg_mask)`` per rule."""
        return self._masks  # type: ignore[attr-defined]

    def index_of(self, name: str) -> int:
        try:
            return self.atoms.index(name)
        except ValueError:
            raise KeyError(name) from None

    def names(self, atoms: Iterable[int]) -> list[str]:
        return [self.atoms[i] for i in sorted(atoms)]

    def format_model(self, model: Iterable[int]) -> str:
        return " ".join(self.names(model))

    @classmethod
    def from_rules(cls, atoms: Sequence[str], rules: Iterable[Rule]) -> "GroundProgram":
        """Build a program, dropping duplicate rules (first occurrence wins)."""
        seen = set()
        kept = []
        for r in rules:
            if r in seen:
                continue
            seen.add(r)
            kept.append(r)
        return cls(tuple(atoms), tuple(kept))

    def __str__(self) -> str:
        return serialize_program(self)


# -- parsing -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>%[^\n]*)
  | (?P<directive>\#atoms\b)
  | (?P<arrow>:-)
  | (?P<dot>\.)
  | (?P<comma>,)
  | (?P<name>[A-Za-z0-9_]+(?:[ \t]*\([^()\n]*\))?)
    """,
    re.VERBOSE,
)


def _tokenize(text: str):
    pos = 0
    line, line_start = 1, 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ProgramSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        col = pos - line_start + 1
        if kind not in ("ws", "comment"):
            out.append((kind, m.group(), line, col))
        chunk = m.group()
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    out.append(("eof", "", line, pos - line_start + 1))
    return out


def _canonical_name(raw: str, line: int, col: int) -> str:
    name = re.sub(r"\s+", "", raw)
    if len(name) > MAX_NAME_LEN:
        raise ProgramSyntaxError(f"atom name longer than {MAX_NAME_LEN} characters", line, col)
    return name


def parse_program(text: str) -> GroundProgram:
    """Parse program text into a :class:`GroundProgram`.

    Grammar::

        rule      := head ( ":-" body )? "."
        body      := lit ( "," lit )*
        lit       := [ "not" ] atomname
        directive := "#atoms" atomname ( ","? atomname )* "."

    ``%`` starts a comment. The ``#atoms`` directive declares atoms (and thus
    fixes their indices) without attaching rules to them.

    Rules whose positive and negative bodies share an atom are dropped with a
    warning; duplicate rules are removed.

    >>> p = parse_program("a :- not b.\\nb :- not a.")
    >>> p.atoms, len(p.rules)
    (('a', 'b'), 2)
    """
    toks = _tokenize(text)
    index: dict[str, int] = {}
    atoms: list[str] = []

    def intern(tok) -> int:
        name = _canonical_name(tok[1], tok[2], tok[3])
        if name not in index:
            index[name] = len(atoms)
            atoms.append(name)
        return index[name]

    rules: list[Rule] = []
    dropped = 0
    i = 0

    def expect(kind):
        nonlocal i
        tok = toks[i]
        if tok[0] != kind:
            what = tok[1] or "end of input"
            raise ProgramSyntaxError(f"expected {kind}, found {what!r}", tok[2], tok[3])
        i += 1
        return tok

    while toks[i][0] != "eof":
        if toks[i][0] == "directive":
            i += 1
            intern(expect("name"))
            while toks[i][0] in ("name", "comma"):
                if toks[i][0] == "comma":
                    i += 1
                intern(expect("name"))
            expect("dot")
            continue
        head_tok = expect("name")
        head = intern(head_tok)
        pos: list[int] = []
        neg: list[int] = []
        if toks[i][0] == "arrow":
            i += 1
            while True:
                tok = expect("name")
                # "not" is a keyword only when another atom follows it
                if tok[1] == "not" and toks[i][0] == "name":
                    neg.append(intern(expect("name")))
                else:
                    pos.append(intern(tok))
                if toks[i][0] == "comma":
                    i += 1
                    continue
                break
        expect("dot")
        rule = Rule.make(head, pos, neg)
        if rule.self_inconsistent:
            dropped += 1
            warnings.warn(
                f"line {head_tok[2]}: rule for {atoms[head]!r} has an atom in both "
                "positive and negative body; dropped",
                stacklevel=2,
            )
            continue
        rules.append(rule)

    prog = GroundProgram.from_rules(atoms, rules)
    object.__setattr__(prog, "dropped", dropped)
    return prog


def load_program(path) -> GroundProgram:
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# -- serialization -----------------------------------------------------------

def _render_rule(p: GroundProgram, r: Rule) -> str:
    head = p.atoms[r.head]
    if r.is_fact:
        return f"{head}."
    lits = [p.atoms[b] for b in r.pos] + [f"not {p.atoms[c]}" for c in r.neg]
    return f"{head} :- {', '.join(lits)}."


def _appearance_order(p: GroundProgram) -> list[int]:
    seen: dict[int, None] = {}
    for r in p.rules:
        seen.setdefault(r.head)
        for b in r.pos:
            seen.setdefault(b)
        for c in r.neg:
            seen.setdefault(c)
    return list(seen)


def serialize_program(p: GroundProgram) -> str:
    """Render ``p`` so that :func:`parse_program` rebuilds the same indexing.

    An ``#atoms`` header is emitted only when rule text alone would not
    reproduce the atom order (unused atoms, or out-of-order first use).
    """
    lines = []
    if _appearance_order(p) != list(range(p.n)):
        lines.append("#atoms " + " ".join(p.atoms) + ".")
    lines.extend(_render_rule(p, r) for r in p.rules)
    return "".join(line + "\n" for line in lines)


# -- validation --------------------------------------------------------------

def validate(p: GroundProgram) -> list[str]:
    """Return a list of problems found in ``p``; empty means well-formed."""
    report = []
    n = p.n
    names = {}
    for i, name in enumerate(p.atoms):
        if not name:
            report.append(f"empty atom name at index {i}")
        elif name in names:
            report.append(f"duplicate atom name {name!r} at indices {names[name]} and {i}")
        else:
            names[name] = i
    seen: dict[Rule, int] = {}
    for rid, r in enumerate(p.rules):
        if not 0 <= r.head < n:
            report.append(f"out-of-range head {r.head} in rule {rid}")
        for b in r.pos + r.neg:
            if not 0 <= b < n:
                report.append(f"out-of-range body atom {b} in rule {rid}")
        if len(set(r.pos)) != len(r.pos) or len(set(r.neg)) != len(r.neg):
            report.append(f"repeated body literal in rule {rid}")
        if r.self_inconsistent:
            report.append(f"self-inconsistent body in rule {rid}")
        key = Rule.make(r.head, r.pos, r.neg)
        if key in seen:
            report.append(f"duplicate rule {rid} (same as rule {seen[key]})")
        else:
            seen[key] = rid
    hi = p.heads_index
    if len(hi) != n:
        report.append(f"heads_index has {len(hi)} entries for {n} atoms")
    listed: dict[int, int] = {}
    for a, rids in enumerate(hi):
        for rid in rids:
            if not 0 <= rid < len(p.rules):
                report.append(f"heads_index of atom {a} lists unknown rule {rid}")
                continue
            if rid in listed:
                report.append(f"rule {rid} listed under atoms {listed[rid]} and {a}")
            listed[rid] = a
            if p.rules[rid].head != a:
                report.append(f"heads_index of atom {a} lists rule {rid} with head {p.rules[rid].head}")
    for rid, r in enumerate(p.rules):
        if rid not in listed and 0 <= r.head < n:
            report.append(f"rule {rid} missing from heads_index")
    return report
