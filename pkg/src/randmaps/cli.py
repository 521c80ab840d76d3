"""Command-line experiment runner.

    randmaps validate --config cfg.json --out runs/a
    randmaps --command sequences --config cfg.json --seed 7
    randmaps reproduce --example all

Every run writes its artifacts plus ``manifest.json`` (sha256 of each file,
the resolved configuration, the seed, warnings and a timestamp).
"""
import argparse
import datetime as _dt
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import io
from .asymptotics import default_ns, finiteness_verdict, sandwich_report, theoretical_exponent
from .conditions import check_conditions
from .config import ConfigError, ExperimentConfig, load_config
from .induced import induced_step
from .montecarlo import return_time_histogram, run_orbit, x_cells
from .reproduce import resolve_example, run_example
from .sequences import AlphaStream, SequenceTruncated, partition_sequences, predict_mu_xn, x_sequence
from .ulam import (IntervalPartition, build_ulam_P, build_ulam_PY, export_density_csv, export_matrix_csv,
                   extend_density, invariant_density_h0)

COMMANDS = ("validate", "sequences", "induced", "ulam", "simulate", "asymptotics", "reproduce")


class Run:
    """Collects the files and warnings of one command invocation."""

    def __init__(self, out, command, cfg, seed):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.command, self.cfg, self.seed = command, cfg, seed
        self.files, self.warnings = [], []

    def path(self, name):
        p = self.out / name
        self.files.append(p)
        return p

    def warn(self, msgs):
        for m in msgs:
            if m not in self.warnings:
                self.warnings.append(m)

    def json(self, name, obj):
        """Write a JSON artifact; accumulated warnings ride along under "warnings"."""
        obj = dict(obj)
        if self.warnings:
            obj["warnings"] = list(self.warnings)
        return io.write_json(self.path(name), obj)

    def finish(self, extra=None):
        manifest = {
            "command": self.command,
            "seed": self.seed,
            "config": self.cfg.model_dump(mode="json", by_alias=True) if self.cfg else None,
            "files": {p.name: io.sha256_file(p) for p in self.files},
            "warnings": self.warnings,
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        if extra:
            manifest.update(extra)
        io.write_json(self.out / "manifest.json", manifest)
        for w in self.warnings:
            print(f"WARNING: {w}", file=sys.stderr)
        return manifest


def _alpha_stream(system, alpha, seed):
    if alpha is not None or system.left.param_free:
        return AlphaStream.constant(alpha)
    return AlphaStream(system.nu_A, seed=seed)


def _reference_alpha(system, alpha):
    """Constant alpha used to label X_n cells: the given one, else a canonical choice."""
    if alpha is not None or system.left.param_free:
        return alpha
    lo, _ = system.nu_A.support
    return float(lo) if system.left.dominance > 0 else float(np.median(system.nu_A.quadrature()[0]))


def _default_beta(system, beta):
    if beta is not None or system.right.param_free:
        return beta
    return float(np.median(system.nu_B.quadrature()[0]))


def cmd_validate(cfg, run):
    s = cfg.build_system()
    k = cfg.validate_
    rep = check_conditions(s, k.grid_size, k.quadrature_nodes, k.ceiling)
    run.json("conditions.json", dict(rep.to_dict(), family=s.describe()))
    for key, st in rep.status.items():
        print(f"condition {key}: {st}")
    return 0


def cmd_sequences(cfg, run):
    s = cfg.build_system()
    k = cfg.sequences
    beta = _default_beta(s, k.beta)
    stream = _alpha_stream(s, k.alpha, run.seed)
    ps = partition_sequences(s, stream, beta, k.N, M=k.M or k.N)
    if ps.truncated:
        run.warn(["x-sequence truncated by floating-point underflow"])
    const = stream.is_constant
    pred = {}
    if k.predict and const:
        ns = np.arange(2, min(k.N + 1, len(ps.xs)) + 1)
        vals = predict_mu_xn(s, stream.const, ns, xs=ps.xs)
        pred = dict(zip(ns.tolist(), vals.tolist()))
    elif k.predict:
        run.warn(["predicted_mu_Xn left empty: it needs a constant reference alpha"])
    M = k.M or k.N
    n_x, n_y = min(k.N + 1, len(ps.xs)), min(M + 1, len(ps.ys))
    rows = []
    for i in range(max(n_x, n_y)):
        n = i + 1
        rows.append((n, ps.xs[i] if i < n_x else None, ps.ys[i] if i < n_y else None, pred.get(n)))
    io.write_csv(run.path("sequences.csv"), ["n", "x_n", "y_n", "predicted_mu_Xn"], rows)
    run.json("sequences.json", {"eta": ps.eta, "beta": beta, "alpha": stream.const if const else None,
                                                "N": n_x - 1, "M": n_y - 1})
    print(f"eta = {ps.eta}; wrote {len(rows)} rows")
    return 0


def cmd_induced(cfg, run):
    s = cfg.build_system()
    k = cfg.induced
    beta = _default_beta(s, k.beta)
    rows = []
    for j, x in enumerate(k.points):
        if s.left.param_free:
            stream = AlphaStream.constant(None)
        else:
            stream = AlphaStream(s.nu_A, seed=run.seed, index=j)
        r = induced_step(s, x, beta, stream, k.cap)
        rows.append((x, beta, r.landing, r.return_time, r.first_return_time, r.derivative, r.censored))
    io.write_csv(run.path("induced.csv"),
                 ["x", "beta", "landing", "return_time", "first_return_time", "derivative", "censored"], rows)
    hist = return_time_histogram(s, k.n_returns, k.cap, run.seed)
    io.write_csv(run.path("return_times.csv"), ["first_return_time", "count", "probability"],
                 zip(hist.times, hist.counts, hist.probabilities()))
    if hist.censored:
        run.warn([f"{hist.censored} of {hist.n_returns} returns censored at cap {k.cap}"])
    run.json("return_times.json", hist.to_dict())
    print(f"mean first-return time {hist.mean:.6g}; tail exponent {hist.tail_exponent:.4g}")
    return 0


def cmd_ulam(cfg, run):
    s = cfg.build_system()
    k = cfg.ulam
    yp = IntervalPartition.y_uniform(k.y_cells)
    PY = build_ulam_PY(s, yp, k.samples_per_cell, k.cap, rng_seed=run.seed, threads=cfg.threads)
    run.warn(PY.warnings)
    est = invariant_density_h0(PY, k.max_iters, k.tol)
    export_matrix_csv(PY, run.path("PY_matrix.csv"))
    export_density_csv(yp, est.h0, run.path("h0.csv"))
    summary = {"PY": PY.summary(), "density": None}
    if k.extend:
        alpha = _reference_alpha(s, k.alpha)
        xp = IntervalPartition.xcell_adapted(s, alpha, k.x_cells, k.split, yp)
        P = build_ulam_P(s, xp, k.samples_per_cell, rng_seed=run.seed, threads=cfg.threads)
        run.warn(P.warnings)
        extend_density(est, P, xp, k.N_trunc)
        export_matrix_csv(P, run.path("P_matrix.csv"))
        export_density_csv(xp, est.h_ext, run.path("h_ext.csv"))
        summary["P"] = P.summary()
        summary["reference_alpha"] = alpha
        summary["mu_X_over_mu_Y"] = {n: est.mu_X(n) / est.mu_Y for n in range(1, k.x_cells + 1)}
    summary["density"] = est.summary()
    run.warn(est.warnings)
    run.json("ulam.json", summary)
    print(f"h0 converged={est.converged} residual={est.residual:.3g}")
    return 0


def cmd_simulate(cfg, run):
    s = cfg.build_system()
    k = cfg.simulate
    alpha = _reference_alpha(s, k.alpha)
    cells, labels = x_cells(s, alpha, k.n_cells)
    cells.append((0.5, 1.0))
    labels.append(0)
    est = run_orbit(s, k.x0, k.steps, run.seed, cells, labels, k.n_shards, k.chains_per_shard,
                    threads=cfg.threads)
    run.warn(est.warnings)
    est.to_csv(run.path("occupation.csv"))
    run.json("simulate.json", dict(est.manifest(s), reference_alpha=alpha))
    print(f"{est.steps} steps, {est.count_Y} visits to Y")
    return 0


def cmd_asymptotics(cfg, run):
    s = cfg.build_system()
    k = cfg.asymptotics
    if s.left.param_free or s.nu_A.is_singleton:
        a = None if s.left.param_free else s.nu_A.atoms[0]
        ns = default_ns((k.n_lo, k.n_hi), k.points)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", SequenceTruncated)
            xs = x_sequence(s, AlphaStream.constant(a), int(ns.max()))
        if len(xs) < ns.max():
            run.warn([f"x-sequence underflows after {len(xs)} terms; window clipped to n <= {len(xs)}"])
            ns = ns[ns <= len(xs)]
            if ns.size == 0:
                raise ValueError(f"no n in the window survives the underflow at {len(xs)} terms")
        vals = predict_mu_xn(s, a, ns, xs=xs)
        v = finiteness_verdict(np.column_stack([ns, vals]), s)
        report = {"family": s.name, "parameters": s.describe(), "window": [int(ns[0]), int(ns[-1])],
                  "fitted_exponent": v.fit.exponent if v.fit else None,
                  "stderr": v.fit.stderr if v.fit else None,
                  "theoretical_exponent": theoretical_exponent(s, a), "verdict": v.verdict,
                  "sandwich": None, "slow_variation": bool(v.fit.slow_variation) if v.fit else False}
    else:
        lo, hi = s.nu_A.support
        a1 = k.alpha1 if k.alpha1 is not None else lo
        a2 = k.alpha2 if k.alpha2 is not None else hi
        report = sandwich_report(s, a1, a2, (k.n_lo, k.n_hi), k.c, k.points).to_dict()
    run.json("asymptotics.json", report)
    print(f"verdict: {report['verdict']}")
    return 0


def cmd_reproduce(example, seed, threads, run):
    results = run_example(example, seed=seed, threads=threads)
    for r in results:
        print(r.line())
    run.json("reproduce.json", {"example": example, "criteria": [r.to_dict() for r in results]})
    return 0 if all(r.passed for r in results) else 1


HANDLERS = {"validate": cmd_validate, "sequences": cmd_sequences, "induced": cmd_induced, "ulam": cmd_ulam,
            "simulate": cmd_simulate, "asymptotics": cmd_asymptotics}


def build_parser():
    p = argparse.ArgumentParser(prog="randmaps", description="Experiments on annealed random interval maps.")
    p.add_argument("command_pos", nargs="?", metavar="COMMAND", choices=COMMANDS, help="command to run")
    p.add_argument("--command", choices=COMMANDS, help="command to run (alternative to the positional form)")
    p.add_argument("--config", type=Path, help="JSON experiment configuration")
    p.add_argument("--seed", type=int, help="top-level seed (overrides the config)")
    p.add_argument("--out", type=Path, help="output directory (overrides the config)")
    p.add_argument("--threads", type=int, help="worker threads, 0 = one per CPU (overrides the config)")
    p.add_argument("--example", help="example id for the reproduce command")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    command = args.command or args.command_pos
    if command is None:
        print("error: no command given", file=sys.stderr)
        return 2
    if args.seed is not None and not 0 <= args.seed < 2**64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return 2
    try:
        cfg = load_config(args.config) if args.config else None
    except ConfigError as e:
        for line in e.lines:
            print(f"config error: {line}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    seed = args.seed if args.seed is not None else (cfg.seed if cfg else 0)
    threads = args.threads if args.threads is not None else (cfg.threads if cfg else 1)
    if threads == 0:
        threads = os.cpu_count() or 1
    out = args.out or Path(cfg.out if cfg else "out")

    if command == "reproduce":
        if not args.example:
            print("error: reproduce needs --example ID", file=sys.stderr)
            return 2
        try:
            resolve_example(args.example)
        except KeyError as e:
            print(f"error: {e.args[0]}", file=sys.stderr)
            return 2
        run = Run(out, command, cfg, seed)
        status = cmd_reproduce(args.example, seed, threads, run)
        run.finish({"example": args.example})
        return status
    if cfg is None:
        print(f"error: {command} needs --config PATH", file=sys.stderr)
        return 2
    cfg = cfg.model_copy(update={"seed": seed, "threads": threads, "out": str(out)})
    run = Run(out, command, cfg, seed)
    try:
        status = HANDLERS[command](cfg, run)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    run.finish()
    return status


if __name__ == "__main__":
    sys.exit(main())
