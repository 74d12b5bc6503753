"""Fuzzy propagation: t-norm algebra, soft consequence, certification.

Degrees live in numpy float64 vectors. Rule bodies are evaluated by gathering
literal values out of ``concat(tau, phi, [1])`` with a padded index matrix, so
the same :class:`Layout` serves single programs and stacked batches.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .crisp import is_stable
from .program import GroundProgram

DEFAULT_EPS = 1e-6
DEFAULT_BINARY_TOL = 1e-3


class TNorm(enum.IntEnum):
    GODEL = 0
    PRODUCT = 1
    LUKASIEWICZ = 2

    @classmethod
    def parse(cls, value) -> "TNorm":
        if isinstance(value, TNorm):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().lower().replace("ö", "o").replace("ł", "l")
        aliases = {"godel": cls.GODEL, "goedel": cls.GODEL, "min": cls.GODEL,
                   "product": cls.PRODUCT, "prod": cls.PRODUCT,
                   "lukasiewicz": cls.LUKASIEWICZ, "luk": cls.LUKASIEWICZ}
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown t-norm {value!r}") from None

    @property
    def label(self) -> str:
        return self.name.lower()


def _check_unit(*xs):
    for x in xs:
        a = np.asarray(x, dtype=float)
        if np.any(~np.isfinite(a)) or np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("degrees must lie in [0, 1]")


def tnorm(kind, x, y):
    kind = TNorm.parse(kind)
    _check_unit(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind is TNorm.GODEL:
        r = np.minimum(x, y)
    elif kind is TNorm.PRODUCT:
        r = x * y
    else:
        r = np.maximum(0.0, x + y - 1.0)
    return r[()] if r.ndim == 0 else r


def tconorm(kind, x, y):
    kind = TNorm.parse(kind)
    _check_unit(x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if kind is TNorm.GODEL:
        r = np.maximum(x, y)
    elif kind is TNorm.PRODUCT:
        r = x + y - x * y
    else:
        r = np.minimum(1.0, x + y)
    return r[()] if r.ndim == 0 else r


def tnorm_reduce(kind, values, axis=-1):
    """n-ary t-norm along ``axis``; empty folds give 1."""
    kind = TNorm.parse(kind)
    v = np.asarray(values, dtype=float)
    if v.shape[axis] == 0:
        return np.ones(np.delete(v.shape, axis % v.ndim)) if v.ndim > 1 else 1.0
    if kind is TNorm.GODEL:
        return v.min(axis=axis)
    if kind is TNorm.PRODUCT:
        return v.prod(axis=axis)
    k = v.shape[axis]
    return np.maximum(0.0, v.sum(axis=axis) - (k - 1))


def tconorm_reduce(kind, values, axis=-1):
    """n-ary t-conorm along ``axis``; empty folds give 0."""
    kind = TNorm.parse(kind)
    v = np.asarray(values, dtype=float)
    if v.shape[axis] == 0:
        return np.zeros(np.delete(v.shape, axis % v.ndim)) if v.ndim > 1 else 0.0
    if kind is TNorm.GODEL:
        return v.max(axis=axis)
    if kind is TNorm.PRODUCT:
        return 1.0 - (1.0 - v).prod(axis=axis)
    return np.minimum(1.0, v.sum(axis=axis))


def undecided_degree(tau, phi, kind):
    """``(1 - tau) ⊗ (1 - phi)``, elementwise."""
    return tnorm(kind, 1.0 - np.asarray(tau, dtype=float), 1.0 - np.asarray(phi, dtype=float))


def membership(tau, phi):
    return 0.5 * (np.asarray(tau, dtype=float) + 1.0 - np.asarray(phi, dtype=float))


def decision_update(phi, mu, delta):
    """Additive falsity update ``phi + mu * delta``."""
    out = np.asarray(phi, dtype=float) + np.asarray(mu, dtype=float) * np.asarray(delta, dtype=float)
    return np.minimum(out, 1.0)


# -- layouts -------------------------------------------------------------------

@dataclass(frozen=True)
class Layout:
    """Gather indices for evaluating many programs as one flat atom vector.

    ``body`` has shape (R, K) and indexes ``concat(tau, phi, [1])``: a positive
    literal of atom ``j`` maps to ``j``, a negated one to ``N + j`` and padding
    to ``2N``. ``heads`` has shape (N, D) and indexes ``concat(support, [0])``
    with padding ``R``.
    """

    n_atoms: int
    n_rules: int
    body: np.ndarray
    heads: np.ndarray

    @classmethod
    def build(cls, programs: Sequence[GroundProgram], copies: int = 1) -> "Layout":
        """Stack ``copies`` replicas of each program, program-major."""
        locals_ = [_local_arrays(p) for p in programs]
        n_total = sum(p.n for p in programs) * copies
        r_total = sum(len(p.rules) for p in programs) * copies
        kmax = max([b.shape[1] for b, _, _ in locals_] or [0])
        dmax = max([h.shape[1] for _, _, h in locals_] or [0])
        body = np.full((r_total, kmax), 2 * n_total, dtype=np.int64)
        heads = np.full((n_total, dmax), r_total, dtype=np.int64)
        a_off = r_off = 0
        for p, (b, neg, h) in zip(programs, locals_):
            n, r = p.n, len(p.rules)
            k, d = b.shape[1], h.shape[1]
            for _ in range(copies):
                if r and k:
                    blk = np.where(neg, b + n_total + a_off, b + a_off)
                    body[r_off:r_off + r, :k] = np.where(b < 0, 2 * n_total, blk)
                if n and d:
                    heads[a_off:a_off + n, :d] = np.where(h < 0, r_total, h + r_off)
                a_off += n
                r_off += r
        body.setflags(write=False)
        heads.setflags(write=False)
        return cls(n_total, r_total, body, heads)


@lru_cache(maxsize=4096)
def _local_arrays(p: GroundProgram):
    # per-program body atoms / negation flags / head lists, padded with -1
    k = max([len(r.pos) + len(r.neg) for r in p.rules] or [0])
    d = max([len(h) for h in p.heads_index] or [0])
    body = np.full((len(p.rules), k), -1, dtype=np.int64)
    neg = np.zeros((len(p.rules), k), dtype=bool)
    for rid, r in enumerate(p.rules):
        lits = list(r.pos) + list(r.neg)
        body[rid, : len(lits)] = lits
        neg[rid, len(r.pos): len(lits)] = True
    heads = np.full((p.n, d), -1, dtype=np.int64)
    for a, rids in enumerate(p.heads_index):
        heads[a, : len(rids)] = rids
    return body, neg, heads


@lru_cache(maxsize=512)
def layout_of(p: GroundProgram) -> Layout:
    return Layout.build([p])


def supports(layout: Layout, tau, phi, kind) -> np.ndarray:
    lit = np.concatenate([np.asarray(tau, float), np.asarray(phi, float), [1.0]])
    return tnorm_reduce(kind, lit[layout.body], axis=1) if layout.n_rules else np.zeros(0)


def soft_step(layout: Layout, tau, phi, kind) -> np.ndarray:
    rho = supports(layout, tau, phi, kind)
    ext = np.concatenate([rho, [0.0]])
    return tconorm_reduce(kind, ext[layout.heads], axis=1) if layout.n_atoms else np.zeros(0)


def rule_support(p: GroundProgram, rule_id: int, tau, phi, kind) -> float:
    r = p.rules[rule_id]
    vals = [float(tau[b]) for b in r.pos] + [float(phi[c]) for c in r.neg]
    return float(tnorm_reduce(kind, np.array(vals, dtype=float)))


def soft_consequence(p: GroundProgram, phi, tau, kind) -> np.ndarray:
    """One application of the soft consequence operator."""
    _check_unit(tau, phi)
    return soft_step(layout_of(p), tau, phi, kind)


def default_max_inner(n: int) -> int:
    return max(1, 20 * n)


def propagate_layout(layout: Layout, phi, tau0, kind, eps=DEFAULT_EPS, max_inner=None):
    if max_inner is None:
        max_inner = default_max_inner(layout.n_atoms)
    tau = np.asarray(tau0, dtype=float)
    for it in range(1, max_inner + 1):
        nxt = soft_step(layout, tau, phi, kind)
        change = float(np.max(np.abs(nxt - tau))) if nxt.size else 0.0
        tau = nxt
        if change < eps:
            return tau, True, it
    return tau, False, max_inner


def propagate(p: GroundProgram, phi, tau0, kind, eps=DEFAULT_EPS, max_inner=None):
    """Iterate the soft consequence operator from ``tau0``.

    Returns ``(tau, converged, inner_iters)``; stops once the max-abs change
    drops below ``eps`` or after ``max_inner`` sweeps (default ``20 n``).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if max_inner is not None and max_inner < 1:
        raise ValueError("max_inner must be >= 1")
    _check_unit(tau0, phi)
    return propagate_layout(layout_of(p), phi, tau0, kind, eps, max_inner)


# -- certification -------------------------------------------------------------

STABLE = "stable"
NOT_BINARY = "not_binary"
NOT_STABLE = "not_stable"


@dataclass
class Certification:
    verdict: str
    model: frozenset[int] | None = None
    diagnostic: str = ""
    tau: np.ndarray | None = None
    phi: np.ndarray | None = None

    @property
    def stable(self) -> bool:
        return self.verdict == STABLE


def binarization_distance(p_scores) -> float:
    p_scores = np.asarray(p_scores, dtype=float)
    if p_scores.size == 0:
        return 0.0
    return float(np.mean(np.minimum(p_scores, 1.0 - p_scores)))


def certify(
    program: GroundProgram,
    tau,
    phi,
    kind,
    binary_tol: float = DEFAULT_BINARY_TOL,
    eps: float = DEFAULT_EPS,
    max_inner: int | None = None,
) -> Certification:
    """Propagate to convergence, then accept only binary, verified-stable states."""
    if binary_tol <= 0 or eps <= 0:
        raise ValueError("tolerances must be positive")
    tau = np.clip(np.asarray(tau, dtype=float), 0.0, 1.0)
    phi = np.clip(np.asarray(phi, dtype=float), 0.0, 1.0)
    tau, converged, iters = propagate_layout(layout_of(program), phi, tau, kind, eps, max_inner)
    if not converged:
        return Certification(NOT_BINARY, None, f"propagation did not converge in {iters} sweeps", tau, phi)
    score = membership(tau, phi)
    rounded = np.round(score)
    if np.any(np.abs(score - rounded) > binary_tol):
        return Certification(NOT_BINARY, None, "membership scores not binary", tau, phi)
    model = frozenset(int(i) for i in np.flatnonzero(rounded == 1.0))
    if is_stable(program, model):
        return Certification(STABLE, model, "", tau, phi)
    return Certification(NOT_STABLE, model, "rounded state is not a stable model", tau, phi)
