"""Command line entry point: ``ndprop <command> ...``.

Exit codes: 0 success, 1 usage or input error, 2 internal invariant violation.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from .crisp import OracleScaleExceeded, enumerate_stable_models, format_models, is_stable
from .dprop import GuidanceExhausted, dprop_run, guided_policy, rdprop_solve
from .evaluate import InvariantViolation, Mode, eval_dataset, run_experiment_suite
from .fuzzy import TNorm, certify
from .generators import DatasetConfigError, build_dataset, generate, load_dataset
from .policy import (
    TrainConfig,
    WeightFileError,
    forward_gradient_check,
    init_weights,
    load_weights,
    save_weights,
    train,
)
from .program import ProgramSyntaxError, load_program, serialize_program

log = logging.getLogger("ndprop")

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: str) -> np.ndarray:
    try:
        vals = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc
    return np.array(vals)


def _counts(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise UsageError("--counts needs TRAIN,VAL,TEST")
    return tuple(int(x) for x in parts)


# -- commands --------------------------------------------------------------------

def cmd_solve(args) -> int:
    p = load_program(args.program)
    if args.max_iters is not None and args.max_iters < p.n:
        raise UsageError(f"--max-iters must be at least the atom count ({p.n})")
    if args.restarts < 1:
        raise UsageError("--restarts must be at least 1")
    start = time.perf_counter()
    if args.policy == "random":
        outcome, stats = rdprop_solve(p, args.restarts, np.random.default_rng(args.seed),
                                      args.max_iters)
        runs, decisions = stats.runs, stats.decisions
    else:
        if args.target is not None:
            target = {p.index_of(a) for a in args.target.split()}
        else:
            models = enumerate_stable_models(p, args.atom_cap)
            target = set(models[0]) if models else set()
        try:
            outcome = dprop_run(p, guided_policy(target), np.random.default_rng(args.seed),
                                args.max_iters)
        except GuidanceExhausted:
            outcome = None
        runs, decisions = 1, len(outcome.trace) if outcome else 0
    ms = 1000 * (time.perf_counter() - start) if args.timing else 0
    if outcome is not None and outcome.success:
        if not is_stable(p, outcome.model):
            raise InvariantViolation("solver returned a non-stable model")
        print(p.format_model(outcome.model))
    else:
        print("UNSAT-WITHIN-BUDGET")
    print(f"runs={runs} decisions={decisions} ms={ms:.0f}")
    return EXIT_OK


def cmd_enumerate(args) -> int:
    p = load_program(args.program)
    models = enumerate_stable_models(p, args.atom_cap)
    sys.stdout.write(format_models(p, models))
    if args.count:
        print(f"models={len(models)}", file=sys.stderr)
    return EXIT_OK


def cmd_check(args) -> int:
    p = load_program(args.program)
    tau, phi = _floats(args.tau), _floats(args.phi)
    if tau.size != p.n or phi.size != p.n:
        raise UsageError(f"--tau/--phi need {p.n} values (one per atom, index order)")
    if np.any((tau < 0) | (tau > 1) | (phi < 0) | (phi > 1)):
        raise UsageError("degrees must lie in [0, 1]")
    cert = certify(p, tau, phi, TNorm.parse(args.tnorm), binary_tol=args.binary_tol,
                   eps=args.eps, max_inner=args.max_inner)
    print(cert.verdict.upper().replace("_", "-"))
    if cert.stable:
        print(p.format_model(cert.model))
    elif cert.diagnostic:
        print(cert.diagnostic)
    return EXIT_OK


def cmd_generate(args) -> int:
    if args.n is not None:
        p = generate(args.kind, args.n, args.seed, args.c1, args.c2, args.ratio)
        sys.stdout.write(serialize_program(p))
        return EXIT_OK
    if args.out is None:
        raise UsageError("generate needs --out DIR (or --n N for a single program)")
    ds = build_dataset(args.out, args.kind, args.split, _counts(args.counts), args.seed,
                       args.oracle_cap, args.c1, args.c2, args.ratio,
                       consistent_test=not args.keep_inconsistent_test)
    rej = ds.manifest["rejected"]
    print(f"wrote {sum(len(ds[k]) for k in ('train', 'val', 'test'))} instances to {args.out}")
    print("rejected " + " ".join(f"{k}={rej[k]}" for k in ("train", "val", "test")))
    return EXIT_OK


def cmd_train(args) -> int:
    ds = load_dataset(args.data)
    train_set = [(i.program, i.models) for i in ds["train"]]
    val_set = [(i.program, i.models) for i in ds["val"] if i.models]
    if not train_set:
        raise UsageError("dataset has no training instances")
    cfg = TrainConfig(epochs=args.epochs, hidden_dim=args.hidden, logical_dim=args.logical,
                      lr=args.lr, tnorm=args.tnorm, seed=args.seed, batch_size=args.batch_size,
                      outer_iterations=args.iters, train_inner_sweeps=args.sweeps,
                      test_outer_iterations=args.test_iters, loss_mode=args.loss,
                      val_every=args.val_every)

    def progress(epoch, loss, rate):
        if rate is not None or epoch % 10 == 0:
            extra = "" if rate is None else f" val={rate:.1f}"
            print(f"epoch {epoch} loss={loss:.5f}{extra}", file=sys.stderr, flush=True)

    weights, tlog = train(train_set, cfg, val_set, progress=None if args.quiet else progress)
    save_weights(weights, args.out)
    if args.log:
        Path(args.log).write_text(json.dumps({"config": cfg.to_dict(), **tlog.to_dict()},
                                             indent=1) + "\n", encoding="utf-8")
    print(f"best_epoch={tlog.best_epoch} best_val={tlog.best_val_rate:.2f} "
          f"final_loss={tlog.epoch_loss[-1] if tlog.epoch_loss else float('nan'):.5f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    modes = [Mode.parse(m, args.restarts) for m in (args.mode or ["ndprop"])]
    weights = cfg = None
    if any(m.kind == "ndprop" for m in modes):
        if args.weights is None:
            raise UsageError("ndprop evaluation needs --weights")
        weights = load_weights(args.weights)
        cfg = TrainConfig(hidden_dim=weights.hidden_dim, logical_dim=weights.logical_dim,
                          tnorm=weights.tnorm.label, test_outer_iterations=args.iters)
    report = eval_dataset(args.data, modes, args.seed, args.part, weights, cfg, args.timing)
    sys.stdout.write(report.table())
    if args.csv:
        Path(args.csv).write_text(report.to_csv(), encoding="utf-8")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    rng = np.random.default_rng(args.seed)
    kind = TNorm.parse(args.tnorm)
    worst, skipped, checked = 0.0, 0, 0
    cfg = TrainConfig(hidden_dim=args.hidden, logical_dim=args.logical, tnorm=kind.label)
    for k in range(args.programs):
        while True:
            n = int(rng.integers(5, args.max_atoms + 1))
            p = generate("n2l", n, [args.seed, k, int(rng.integers(2**31))])
            models = enumerate_stable_models(p)
            if models:
                break
        w = init_weights(args.hidden, args.logical, [args.seed, k], kind)
        err, margin = forward_gradient_check([p], [models], w, cfg, seed=k, h=args.h)
        tie = kind is TNorm.GODEL and margin < args.tie_margin
        if tie:
            skipped += 1
        else:
            checked += 1
            worst = max(worst, err)
        print(f"program {k} n={n} rel_err={err:.3e} margin={margin:.3e}{' skipped-tie' if tie else ''}")
    print(f"checked={checked} skipped={skipped} max_rel_err={worst:.3e} tol={args.tol:.0e}")
    if worst >= args.tol:
        print("FAIL", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_suite(args) -> int:
    config = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    if args.epochs is not None:
        config.setdefault("train", {})["epochs"] = args.epochs
    if args.seed is not None:
        config["seed"] = args.seed
    bundle = run_experiment_suite(config, args.output_dir)
    sys.stdout.write(bundle["report"].table())
    print(f"artifacts in {bundle['dir']}")
    return EXIT_OK


# -- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="ndprop", description="Decision-propagation stable model solvers.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("solve", help="solve one program with DProp")
    s.add_argument("--program", required=True)
    s.add_argument("--policy", choices=["random", "guided"], default="random")
    s.add_argument("--restarts", type=int, default=1)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--max-iters", type=int, default=None)
    s.add_argument("--target", help="guided: space-separated atoms of the target model")
    s.add_argument("--atom-cap", type=int, default=20)
    s.add_argument("--timing", action="store_true", help="report real wall time in ms=")
    s.set_defaults(func=cmd_solve)

    s = sub.add_parser("enumerate", help="list all stable models (brute force)")
    s.add_argument("--program", required=True)
    s.add_argument("--atom-cap", type=int, default=20)
    s.add_argument("--count", action="store_true", help="print the model count on stderr")
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    s.set_defaults(func=cmd_enumerate)

    s = sub.add_parser("check", help="certify a fuzzy (tau, phi) state")
    s.add_argument("--program", required=True)
    s.add_argument("--tau", required=True)
    s.add_argument("--phi", required=True)
    s.add_argument("--tnorm", choices=["godel", "product", "lukasiewicz"], default="godel")
    s.add_argument("--binary-tol", type=float, default=1e-3)
    s.add_argument("--eps", type=float, default=1e-6)
    s.add_argument("--max-inner", type=int, default=None)
    s.add_argument("--seed", type=int, default=0, help="accepted for uniformity; unused")
    s.set_defaults(func=cmd_check)

    s = sub.add_parser("generate", help="generate a labelled dataset or one program")
    s.add_argument("--kind", choices=["n2l", "3lp"], default="n2l")
    s.add_argument("--split", choices=["easy", "medium", "hard"], default="easy")
    s.add_argument("--counts", default="1000,100,100")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out")
    s.add_argument("--n", type=int, help="print a single program with N atoms instead")
    s.add_argument("--c1", type=float, default=5.0)
    s.add_argument("--c2", type=float, default=1.0)
    s.add_argument("--ratio", type=float, default=5.0)
    s.add_argument("--oracle-cap", type=int, default=20)
    s.add_argument("--keep-inconsistent-test", action="store_true",
                   help="keep test instances without stable models")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("train", help="train a decision policy")
    s.add_argument("--data", required=True)
    s.add_argument("--epochs", type=int, default=1000)
    s.add_argument("--hidden", type=int, default=32)
    s.add_argument("--logical", type=int, default=32)
    s.add_argument("--lr", type=float, default=1e-3)
    s.add_argument("--tnorm", choices=["godel", "product", "lukasiewicz"], default="godel")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--batch-size", type=int, default=64)
    s.add_argument("--iters", type=int, default=10, help="decision rounds while training")
    s.add_argument("--sweeps", type=int, default=10, help="propagation sweeps per round")
    s.add_argument("--test-iters", type=int, default=50)
    s.add_argument("--loss", choices=["best", "mean", "min"], default="best")
    s.add_argument("--val-every", type=int, default=10)
    s.add_argument("--log", help="write the training log as JSON")
    s.add_argument("--quiet", action="store_true")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("eval", help="solve-rate report on a dataset part")
    s.add_argument("--data", required=True)
    s.add_argument("--weights")
    s.add_argument("--iters", type=int, default=50, help="decision rounds at test time")
    s.add_argument("--mode", action="append", help="ndprop, rdprop-K or random (repeatable)")
    s.add_argument("--restarts", type=int, default=None, help="K for a bare 'rdprop' mode")
    s.add_argument("--part", choices=["train", "val", "test"], default="test")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--csv", help="write the report as CSV")
    s.add_argument("--timing", action="store_true", help="record real wall_ms")
    s.set_defaults(func=cmd_eval)

    s = sub.add_parser("gradcheck", help="finite-difference check of the training gradient")
    s.add_argument("--programs", type=int, default=20)
    s.add_argument("--max-atoms", type=int, default=8)
    s.add_argument("--tnorm", choices=["godel", "product", "lukasiewicz"], default="product")
    s.add_argument("--hidden", type=int, default=4)
    s.add_argument("--logical", type=int, default=2)
    s.add_argument("--h", type=float, default=1e-5)
    s.add_argument("--tol", type=float, default=1e-4)
    s.add_argument("--tie-margin", type=float, default=1e-4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("suite", help="generate, train and evaluate in one go")
    s.add_argument("--config", help="JSON overrides of the default suite config")
    s.add_argument("--output-dir", required=True)
    s.add_argument("--epochs", type=int, default=None)
    s.add_argument("--seed", type=int, default=None)
    s.set_defaults(func=cmd_suite)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except ProgramSyntaxError as exc:
        print(f"syntax error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (UsageError, DatasetConfigError, WeightFileError, OracleScaleExceeded,
            FileNotFoundError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
