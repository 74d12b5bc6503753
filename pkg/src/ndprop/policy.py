"""Learned decisions for fuzzy decision-propagation.

A recurrent cell with weights shared across atoms reads ``[tau_i, phi_i, mu_i]``
plus the atom's hidden vector and emits a decision score in (0, 1). Each
program is replicated ``L`` times (logical states) with independently drawn
initial hidden vectors; at the end the state closest to binary is kept.

Batches of programs are flattened into one atom vector (program-major, then
logical state, then atom) so a minibatch is one pass over the tape.
"""

from __future__ import annotations

import logging
import struct
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .autodiff import Tape, Var, grad_check
from .crisp import fixpoint_mask, from_mask
from .fuzzy import (
    DEFAULT_BINARY_TOL,
    DEFAULT_EPS,
    Certification,
    Layout,
    TNorm,
    certify,
    default_max_inner,
)
from .program import GroundProgram

log = logging.getLogger(__name__)

MAGIC = b"NDPW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIIIB")


class WeightFileError(ValueError):
    pass


class TrainingDiverged(RuntimeError):
    pass


class InconsistentInstance(ValueError):
    """An instance has no stable model to supervise against."""


@dataclass
class PolicyWeights:
    w_in: np.ndarray   # (3, H)
    w_h: np.ndarray    # (H, H)
    b: np.ndarray      # (H,)
    w_out: np.ndarray  # (H,)
    b_out: np.ndarray  # ()
    logical_dim: int = 1
    tnorm: TNorm = TNorm.GODEL

    @property
    def hidden_dim(self) -> int:
        return self.w_h.shape[0]

    def arrays(self) -> list[np.ndarray]:
        return [self.w_in, self.w_h, self.b, self.w_out, self.b_out]

    @staticmethod
    def shapes(hidden: int) -> list[tuple[int, ...]]:
        return [(3, hidden), (hidden, hidden), (hidden,), (hidden,), ()]

    def flat(self) -> np.ndarray:
        return np.concatenate([a.reshape(-1) for a in self.arrays()])

    def with_arrays(self, arrays) -> "PolicyWeights":
        w_in, w_h, b, w_out, b_out = (np.array(a, dtype=float) for a in arrays)
        return replace(self, w_in=w_in, w_h=w_h, b=b, w_out=w_out, b_out=b_out)

    def with_flat(self, flat) -> "PolicyWeights":
        flat = np.asarray(flat, dtype=float)
        out, pos = [], 0
        for shp in self.shapes(self.hidden_dim):
            size = int(np.prod(shp))
            out.append(flat[pos:pos + size].reshape(shp))
            pos += size
        if pos != flat.size:
            raise ValueError("flat parameter vector has the wrong length")
        return self.with_arrays(out)

    def equals(self, other: "PolicyWeights") -> bool:
        return (
            self.logical_dim == other.logical_dim
            and self.tnorm == other.tnorm
            and all(np.array_equal(a, b) for a, b in zip(self.arrays(), other.arrays()))
        )


@dataclass
class TrainConfig:
    epochs: int = 1000
    outer_iterations: int = 10
    train_inner_sweeps: int = 10
    test_outer_iterations: int = 50
    hidden_dim: int = 32
    logical_dim: int = 32
    lr: float = 1e-3
    batch_size: int = 64
    tnorm: str = "godel"
    seed: int = 0
    loss_mode: str = "best"          # best | mean | min over logical states
    hidden_init_scale: float = 1.0
    val_every: int = 10
    eps: float = DEFAULT_EPS
    binary_tol: float = DEFAULT_BINARY_TOL

    def __post_init__(self):
        for name in ("outer_iterations", "train_inner_sweeps", "test_outer_iterations",
                     "hidden_dim", "logical_dim", "batch_size", "val_every"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.epochs < 0 or self.lr < 0:
            raise ValueError("epochs and lr must be non-negative")
        if self.loss_mode not in ("best", "mean", "min"):
            raise ValueError(f"unknown loss_mode {self.loss_mode!r}")
        TNorm.parse(self.tnorm)

    @property
    def kind(self) -> TNorm:
        return TNorm.parse(self.tnorm)

    def to_dict(self) -> dict:
        return asdict(self)


def init_weights(hidden: int, logical: int, seed=0, tnorm="godel") -> PolicyWeights:
    if hidden < 1 or logical < 1:
        raise ValueError("hidden and logical dims must be >= 1")
    rng = np.random.default_rng(seed)
    bound = 1.0 / np.sqrt(hidden)
    arrays = [rng.uniform(-bound, bound, size=s) for s in PolicyWeights.shapes(hidden)]
    return PolicyWeights(*arrays, logical_dim=logical, tnorm=TNorm.parse(tnorm))


def zero_weights(hidden: int, logical: int, tnorm="godel") -> PolicyWeights:
    arrays = [np.zeros(s) for s in PolicyWeights.shapes(hidden)]
    return PolicyWeights(*arrays, logical_dim=logical, tnorm=TNorm.parse(tnorm))


# -- tape building blocks -------------------------------------------------------

def _undecided(tape: Tape, tau: Var, phi: Var, kind: TNorm) -> Var:
    a = 1.0 - tau
    b = 1.0 - phi
    if kind is TNorm.GODEL:
        return tape.minimum(a, b)
    if kind is TNorm.PRODUCT:
        return a * b
    return tape.maximum(a + b - 1.0, 0.0)


def _tnorm_rows(tape: Tape, m: Var, kind: TNorm) -> Var:
    if kind is TNorm.GODEL:
        return tape.reduce_min(m, axis=1)
    if kind is TNorm.PRODUCT:
        return tape.reduce_prod(m, axis=1)
    k = m.shape[1]
    return tape.maximum(tape.sum(m, axis=1) - float(k - 1), 0.0)


def _tconorm_rows(tape: Tape, m: Var, kind: TNorm) -> Var:
    if kind is TNorm.GODEL:
        return tape.reduce_max(m, axis=1)
    if kind is TNorm.PRODUCT:
        return 1.0 - tape.reduce_prod(1.0 - m, axis=1)
    return tape.minimum(tape.sum(m, axis=1), 1.0)


def soft_step_tape(tape: Tape, layout: Layout, tau: Var, phi: Var, kind: TNorm) -> Var:
    """Soft consequence operator on the tape (same gather scheme as the numpy path)."""
    if layout.n_rules == 0 or layout.heads.shape[1] == 0:
        return tape.const(np.zeros(layout.n_atoms))
    if layout.body.shape[1] == 0:
        rho = tape.const(np.ones(layout.n_rules))
    else:
        lit = tape.concat([tau, phi, np.ones(1)])
        rho = _tnorm_rows(tape, tape.gather(lit, layout.body), kind)
    ext = tape.concat([rho, np.zeros(1)])
    return _tconorm_rows(tape, tape.gather(ext, layout.heads), kind)


@dataclass
class _Params:
    w_in: Var
    w_h: Var
    b: Var
    w_out: Var
    b_out: Var

    @classmethod
    def on(cls, tape: Tape, weights: PolicyWeights, trainable: bool) -> "_Params":
        make = tape.leaf if trainable else tape.const
        return cls(*(make(a) for a in weights.arrays()))

    def ids(self) -> list[int]:
        return [self.w_in.id, self.w_h.id, self.b.id, self.w_out.id, self.b_out.id]


def _cell(tape: Tape, params: _Params, tau: Var, phi: Var, mu: Var, hidden: Var):
    x = tape.stack([tau, phi, mu], axis=1)
    pre = tape.affine(x, params.w_in) + tape.affine(hidden, params.w_h, params.b)
    h_new = tape.tanh(pre)
    logits = tape.sum(h_new * params.w_out, axis=1) + params.b_out
    return tape.sigmoid(logits), h_new


def decision_step(weights: PolicyWeights, tau, phi, mu, hidden):
    """Decision scores and next hidden state for flat per-atom inputs.

    ``tau``, ``phi``, ``mu`` have shape (N,) and ``hidden`` (N, H), where N
    counts atoms across all logical states.
    """
    tape = Tape(record=False)
    params = _Params.on(tape, weights, trainable=False)
    delta, h = _cell(tape, params, tape.const(tau), tape.const(phi), tape.const(mu),
                     tape.const(hidden))
    return delta.value, h.value


# -- forward pass -------------------------------------------------------------------

@dataclass
class _Batch:
    programs: list[GroundProgram]
    copies: int
    layout: Layout
    offsets: list[int]          # start of each program's block in the flat vector

    @classmethod
    def build(cls, programs: Sequence[GroundProgram], copies: int) -> "_Batch":
        offsets, pos = [], 0
        for p in programs:
            offsets.append(pos)
            pos += p.n * copies
        return cls(list(programs), copies, Layout.build(programs, copies), offsets)

    def state_slice(self, i: int, state: int) -> slice:
        n = self.programs[i].n
        start = self.offsets[i] + state * n
        return slice(start, start + n)

    def initial_tau(self) -> np.ndarray:
        parts = []
        for p in self.programs:
            t0 = np.zeros(p.n)
            for a in from_mask(fixpoint_mask(p, p.all_mask, 0)):
                t0[a] = 1.0
            parts.append(np.tile(t0, self.copies))
        return np.concatenate(parts) if parts else np.zeros(0)


def _draw_hidden(batch: _Batch, hidden_dim: int, scale: float, rngs) -> np.ndarray:
    parts = []
    for p, rng in zip(batch.programs, rngs):
        parts.append(rng.uniform(-scale, scale, size=(p.n * batch.copies, hidden_dim)))
    if not parts:
        return np.zeros((0, hidden_dim))
    return np.concatenate(parts, axis=0)


def _unroll(
    tape: Tape,
    params: _Params,
    batch: _Batch,
    hidden0: np.ndarray,
    kind: TNorm,
    rounds: int,
    sweeps: int | None,
    eps: float,
    max_inner: int,
    delta_override: Callable[[np.ndarray], np.ndarray] | None = None,
    trace: list | None = None,
):
    """Run ``rounds`` decision/propagation rounds; ``sweeps=None`` means adaptive."""
    layout = batch.layout
    tau = tape.const(batch.initial_tau())
    phi = tape.const(np.zeros(layout.n_atoms))
    hidden = tape.const(hidden0)
    for _ in range(rounds):
        mu = _undecided(tape, tau, phi, kind)
        delta, hidden = _cell(tape, params, tau, phi, mu, hidden)
        if delta_override is not None:
            delta = tape.const(delta_override(delta.value))
        phi = tape.minimum(phi + mu * delta, 1.0)
        if sweeps is not None:
            for _ in range(sweeps):
                tau = soft_step_tape(tape, layout, tau, phi, kind)
        else:
            for _ in range(max_inner):
                nxt = soft_step_tape(tape, layout, tau, phi, kind)
                change = float(np.max(np.abs(nxt.value - tau.value))) if nxt.value.size else 0.0
                tau = nxt
                if change < eps:
                    break
        if trace is not None:
            trace.append((tau.value.copy(), phi.value.copy(), delta.value.copy()))
    return tau, phi


def _best_states(batch: _Batch, p: np.ndarray, tape: Tape | None = None) -> list[int]:
    best = []
    for i, prog in enumerate(batch.programs):
        n = prog.n
        block = p[batch.offsets[i]: batch.offsets[i] + n * batch.copies].reshape(batch.copies, n)
        dist = np.minimum(block, 1.0 - block).mean(axis=1) if n else np.zeros(batch.copies)
        if tape is not None and dist.size > 1:
            tape.note_gap(np.diff(np.sort(dist))[:1])
        best.append(int(np.argmin(dist)))  # ties -> lowest state
    return best


@dataclass
class NDPropResult:
    tau: np.ndarray          # (L, n)
    phi: np.ndarray          # (L, n)
    p: np.ndarray            # (L, n)
    best_state: int
    certification: Certification | None
    trace: list = field(default_factory=list)

    @property
    def solved(self) -> bool:
        return self.certification is not None and self.certification.stable

    @property
    def model(self):
        return self.certification.model if self.solved else None


def instance_rngs(seed: int, count: int, start: int = 0) -> list[np.random.Generator]:
    """One generator per instance so results do not depend on batching."""
    return [np.random.default_rng([int(seed), start + i]) for i in range(count)]


def ndprop_forward_batch(
    programs: Sequence[GroundProgram],
    weights: PolicyWeights,
    config: TrainConfig,
    rngs=None,
    hidden0: np.ndarray | None = None,
    rounds: int | None = None,
    delta_override=None,
    record_trace: bool = False,
    certify_best: bool = True,
) -> list[NDPropResult]:
    """Evaluation-mode forward pass: adaptive propagation, then certification."""
    kind = weights.tnorm
    L = weights.logical_dim
    batch = _Batch.build(programs, L)
    if hidden0 is None:
        if rngs is None:
            rngs = instance_rngs(config.seed, len(programs))
        hidden0 = _draw_hidden(batch, weights.hidden_dim, config.hidden_init_scale, rngs)
    rounds = config.test_outer_iterations if rounds is None else rounds
    max_n = max([p.n for p in programs] or [1])
    tape = Tape(record=False)
    params = _Params.on(tape, weights, trainable=False)
    trace = [] if record_trace else None
    tau, phi = _unroll(tape, params, batch, hidden0, kind, rounds, None, config.eps,
                       default_max_inner(max_n), delta_override, trace)
    tv, fv = tau.value, phi.value
    pv = 0.5 * (tv + 1.0 - fv)
    best = _best_states(batch, pv)
    results = []
    for i, prog in enumerate(batch.programs):
        sl = slice(batch.offsets[i], batch.offsets[i] + prog.n * L)
        t_i = tv[sl].reshape(L, prog.n)
        f_i = fv[sl].reshape(L, prog.n)
        cert = None
        if certify_best:
            cert = certify(prog, t_i[best[i]], f_i[best[i]], kind,
                           binary_tol=config.binary_tol, eps=config.eps)
        tr = []
        if trace is not None:
            tr = [(t[sl].reshape(L, prog.n), f[sl].reshape(L, prog.n), d[sl].reshape(L, prog.n))
                  for t, f, d in trace]
        results.append(NDPropResult(t_i, f_i, pv[sl].reshape(L, prog.n), best[i], cert, tr))
    return results


def ndprop_forward(program: GroundProgram, weights: PolicyWeights, config: TrainConfig,
                   rng=None, **kw) -> NDPropResult:
    rngs = None if rng is None else [rng]
    return ndprop_forward_batch([program], weights, config, rngs=rngs, **kw)[0]


# -- loss -------------------------------------------------------------------------

def _indicator(models, n: int) -> np.ndarray:
    y = np.zeros((len(models), n))
    for k, m in enumerate(models):
        for a in m:
            y[k, a] = 1.0
    return y


def min_bce_loss(p_scores, stable_models, tape: Tape | None = None) -> Var:
    """Smallest mean binary cross-entropy of ``p_scores`` against any model.

    ``p_scores`` is the selected state's membership vector (a Var, or an array
    which is then placed on ``tape`` or a fresh tape as a leaf). The gradient
    flows only through the minimizing model.
    """
    if not stable_models:
        raise InconsistentInstance("instance has no stable model")
    if not isinstance(p_scores, Var):
        tape = tape or Tape()
        p_scores = tape.leaf(p_scores)
    tape = p_scores.tape
    n = p_scores.shape[0]
    y = _indicator(stable_models, n)
    logp = tape.log_safe(p_scores)
    log1mp = tape.log_safe(1.0 - p_scores)
    losses = []
    for row in y:
        ll = tape.sum(logp * row + log1mp * (1.0 - row))
        losses.append(ll * (-1.0 / max(n, 1)))
    best = int(np.argmin([float(v.value) for v in losses]))
    return losses[best]


def _batch_loss(tape: Tape, batch: _Batch, p: Var, models: Sequence, mode: str) -> Var:
    """Mean over instances of the min-BCE loss, vectorized over (instance, state, model)."""
    L = batch.copies
    pv = p.value
    best = _best_states(batch, pv, tape if tape.track_kinks else None)
    idx, ys, segs, scale, groups = [], [], [], [], []
    seg = 0
    for i, prog in enumerate(batch.programs):
        mods = models[i]
        if not mods:
            raise InconsistentInstance(f"batch instance {i} has no stable model")
        y = _indicator(mods, prog.n)
        states = [best[i]] if mode == "best" else range(L)
        inst = []
        for s in states:
            sl = batch.state_slice(i, s)
            pos = np.arange(sl.start, sl.stop)
            st = []
            for row in y:
                idx.append(pos)
                ys.append(row)
                segs.append(np.full(prog.n, seg))
                scale.append(-1.0 / max(prog.n, 1))
                st.append(seg)
                seg += 1
            inst.append(st)
        groups.append(inst)
    idx = np.concatenate(idx)
    ys = np.concatenate(ys)
    segs = np.concatenate(segs)
    sel = tape.gather(p, idx)
    ll = tape.log_safe(sel) * ys + tape.log_safe(1.0 - sel) * (1.0 - ys)
    pair = tape.segment_sum(ll, segs, seg) * np.array(scale)
    pair_v = pair.value
    # min over models per (instance, state)
    chosen = []
    for inst in groups:
        chosen.append([st[int(np.argmin(pair_v[st]))] for st in inst])
        if tape.track_kinks:
            for st in inst:
                if len(st) > 1:
                    tape.note_gap(np.diff(np.sort(pair_v[st]))[:1])
    if mode == "best":
        per = tape.gather(pair, np.array([c[0] for c in chosen]))
        return tape.mean(per)
    if mode == "min":
        pick = [c[int(np.argmin(pair_v[c]))] for c in chosen]
        return tape.mean(tape.gather(pair, np.array(pick)))
    flat = np.array([x for c in chosen for x in c])
    return tape.mean(tape.gather(pair, flat))


# -- training ---------------------------------------------------------------------

@dataclass
class TrainLog:
    epoch_loss: list[float] = field(default_factory=list)
    val_rate: list[tuple[int, float]] = field(default_factory=list)
    best_epoch: int = 0
    best_val_rate: float = float("nan")

    def to_dict(self) -> dict:
        return asdict(self)


class Adam:
    def __init__(self, shapes, lr, betas=(0.9, 0.999), eps=1e-8):
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.t = 0

    def step(self, params: list[np.ndarray], grads: list[np.ndarray]) -> list[np.ndarray]:
        self.t += 1
        out = []
        for k, (x, g) in enumerate(zip(params, grads)):
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mhat = self.m[k] / (1 - self.b1 ** self.t)
            vhat = self.v[k] / (1 - self.b2 ** self.t)
            out.append(x - self.lr * mhat / (np.sqrt(vhat) + self.eps))
        return out


def _training_loss(tape: Tape, params: _Params, weights: PolicyWeights, programs, models,
                   config: TrainConfig, hidden0: np.ndarray) -> Var:
    batch = _Batch.build(programs, weights.logical_dim)
    tau, phi = _unroll(tape, params, batch, hidden0, weights.tnorm, config.outer_iterations,
                       config.train_inner_sweeps, config.eps, 0)
    p = (tau + 1.0 - phi) * 0.5
    return _batch_loss(tape, batch, p, models, config.loss_mode)


def loss_and_grads(weights: PolicyWeights, programs, models, config: TrainConfig, rngs):
    """Training-mode forward (fixed sweeps) and gradients of the batch loss."""
    tape = Tape()
    params = _Params.on(tape, weights, trainable=True)
    batch = _Batch.build(programs, weights.logical_dim)
    hidden0 = _draw_hidden(batch, weights.hidden_dim, config.hidden_init_scale, rngs)
    loss = _training_loss(tape, params, weights, programs, models, config, hidden0)
    grads = tape.backward(loss)
    return float(loss.value), [grads.get(i, np.zeros_like(a)) for i, a in
                               zip(params.ids(), weights.arrays())]


def _params_from_flat(tape: Tape, flat: Var, hidden: int) -> _Params:
    pieces, pos = [], 0
    for shp in PolicyWeights.shapes(hidden):
        size = int(np.prod(shp))
        pieces.append(tape.gather(flat, np.arange(pos, pos + size).reshape(shp)))
        pos += size
    return _Params(*pieces)


def forward_gradient_check(programs, models, weights: PolicyWeights, config: TrainConfig,
                           seed: int = 0, h: float = 1e-5) -> tuple[float, float]:
    """Central-difference check of the training loss against every weight.

    Returns ``(max relative error, kink margin)``; the margin is the smallest
    non-zero gap at any min/max or discrete selection of the forward pass, so
    callers can skip points that sit on a Goedel tie.
    """
    batch = _Batch.build(programs, weights.logical_dim)
    hidden0 = _draw_hidden(batch, weights.hidden_dim, config.hidden_init_scale,
                           instance_rngs(seed, len(programs)))

    def f(tape, flat):
        params = _params_from_flat(tape, flat, weights.hidden_dim)
        return _training_loss(tape, params, weights, programs, models, config, hidden0)

    probe = Tape(record=False, track_kinks=True)
    f(probe, probe.leaf(weights.flat()))
    return grad_check(f, weights.flat(), h), probe.kink_margin


def solve_rate(weights: PolicyWeights, programs, config: TrainConfig, seed=None,
               batch_size: int | None = None) -> float:
    """Percentage of programs whose best logical state certifies as stable."""
    if not programs:
        return 0.0
    results = evaluate(weights, programs, config, seed, batch_size)
    return 100.0 * sum(r.solved for r in results) / len(programs)


def evaluate(weights: PolicyWeights, programs, config: TrainConfig, seed=None,
             batch_size: int | None = None) -> list[NDPropResult]:
    seed = config.seed if seed is None else seed
    bs = batch_size or config.batch_size
    out = []
    for start in range(0, len(programs), bs):
        chunk = programs[start:start + bs]
        rngs = instance_rngs(seed, len(chunk), start)
        out.extend(ndprop_forward_batch(chunk, weights, config, rngs=rngs))
    return out


def train(train_set, config: TrainConfig, val_set=(), weights: PolicyWeights | None = None,
          progress: Callable[[int, float, float | None], None] | None = None):
    """Minibatch Adam on the min-BCE loss.

    ``train_set`` and ``val_set`` are sequences of ``(program, models)``.
    Returns the weights with the best validation solve-rate (latest on ties;
    final weights when there is no validation set) and a :class:`TrainLog`.
    """
    for prog, models in train_set:
        if not models:
            raise InconsistentInstance("training instance without stable models")
    rng = np.random.default_rng(config.seed)
    if weights is None:
        weights = init_weights(config.hidden_dim, config.logical_dim, rng.integers(2**32),
                               config.tnorm)
    opt = Adam([a.shape for a in weights.arrays()], config.lr)
    tlog = TrainLog()
    val_programs = [p for p, _ in val_set]
    best_w = weights
    if val_programs:
        rate = solve_rate(weights, val_programs, config, seed=config.seed + 1)
        tlog.val_rate.append((0, rate))
        tlog.best_val_rate, tlog.best_epoch = rate, 0
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        losses, sizes = [], []
        for start in range(0, len(order), config.batch_size):
            ids = order[start:start + config.batch_size]
            progs = [train_set[i][0] for i in ids]
            mods = [train_set[i][1] for i in ids]
            # hidden init is tied to the instance, not the epoch
            rngs = [np.random.default_rng([config.seed, int(i)]) for i in ids]
            loss, grads = loss_and_grads(weights, progs, mods, config, rngs)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                raise TrainingDiverged(
                    f"non-finite loss/gradient at epoch {epoch}, batch starting {start}: loss={loss}"
                )
            weights = weights.with_arrays(opt.step(weights.arrays(), grads))
            losses.append(loss)
            sizes.append(len(ids))
        mean_loss = float(np.average(losses, weights=sizes)) if losses else float("nan")
        tlog.epoch_loss.append(mean_loss)
        rate = None
        if val_programs and (epoch % config.val_every == 0 or epoch == config.epochs):
            rate = solve_rate(weights, val_programs, config, seed=config.seed + 1)
            tlog.val_rate.append((epoch, rate))
            if rate >= tlog.best_val_rate:
                tlog.best_val_rate, tlog.best_epoch, best_w = rate, epoch, weights
        log.debug("epoch %d loss %.5f val %s", epoch, mean_loss, rate)
        if progress is not None:
            progress(epoch, mean_loss, rate)
    if not val_programs:
        best_w = weights
        tlog.best_epoch = config.epochs
    return best_w, tlog


# -- persistence ----------------------------------------------------------------------

def save_weights(weights: PolicyWeights, path) -> None:
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, weights.hidden_dim, weights.logical_dim,
                          int(weights.tnorm))
    body = weights.flat().astype("<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header + body)


def load_weights(path) -> PolicyWeights:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise WeightFileError("corrupt header: file too short")
    magic, version, hidden, logical, tn = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise WeightFileError("corrupt header: bad magic bytes")
    if version != FORMAT_VERSION:
        raise WeightFileError(f"unsupported weight format version {version}")
    if hidden < 1 or logical < 1 or tn > 2:
        raise WeightFileError("corrupt header: invalid dimensions or t-norm id")
    count = sum(int(np.prod(s)) for s in PolicyWeights.shapes(hidden))
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise WeightFileError(
            f"corrupt file: expected {8 * count} payload bytes, found {len(body)}"
        )
    flat = np.frombuffer(body, dtype="<f8").astype(float)
    template = zero_weights(hidden, logical, TNorm(tn))
    return template.with_flat(flat)
