"""Command-line workflows: embed, generate, sweep, spectrum, replay.

Every run can write a manifest (subcommand, argv, seeds, version, paths,
timestamps) sufficient to reproduce it; `replay` re-executes a manifest,
optionally redirecting outputs. Exit codes: 0 success, 1 usage error,
2 embedding failure, 3 internal invariant violation.
"""

from __future__ import annotations

import argparse
import datetime
import glob
import json
import os
import sys

import numpy as np

from qcanneal import __version__, bench, chimera, circuit, convert, dense
from qcanneal import generate as gen
from qcanneal import heuristic, ising, spectrum


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser():
    p = _Parser(prog="qcanneal", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("embed", help="embed a circuit file")
    e.add_argument("circuit")
    e.add_argument("--algorithm", choices=["dense", "heuristic"],
                   default="dense")
    e.add_argument("--adjacency", choices=["limited", "full"],
                   default="limited")
    e.add_argument("--chimera", default="8x8x4", help="MxN or MxNxL tiles")
    e.add_argument("--disable-fraction", type=float, default=0.0)
    e.add_argument("--yield-seed", type=int, default=0)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--timeout-s", type=float, default=30.0)
    e.add_argument("--convert", action="store_true",
                   help="emit vertex models for a dense embedding")
    e.add_argument("--assign", action="store_true",
                   help="also write Ising h/J files")
    e.add_argument("--output", default=None, help="embedding JSON path")
    e.add_argument("--wall-ms", choices=["measure", "zero"],
                   default="measure")
    e.add_argument("--manifest", default=None)

    g = sub.add_parser("generate", help="generate random circuits")
    g.add_argument("--size", type=int, default=None,
                   help="target cell count (overrides the count ranges)")
    g.add_argument("--majority", default="1,3")
    g.add_argument("--inverters", default="0,2")
    g.add_argument("--drivers", default="1,4")
    g.add_argument("--wire-range", default="3,12")
    g.add_argument("--adjacency", choices=["limited", "full"],
                   default="limited")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--count", type=int, default=1)
    g.add_argument("--out", required=True,
                   help="output file (count=1) or directory")
    g.add_argument("--manifest", default=None)

    s = sub.add_parser("sweep", help="run an embedding sweep and fits")
    s.add_argument("--circuits", default=None,
                   help="directory of circuit JSON files")
    s.add_argument("--generate", type=int, default=0, metavar="N",
                   help="generate N circuits instead")
    s.add_argument("--sizes", default="20:200",
                   help="size range lo:hi for generated circuits")
    s.add_argument("--algorithm", choices=["dense", "heuristic", "both"],
                   default="both")
    s.add_argument("--adjacency", choices=["limited", "full", "both"],
                   default="both")
    s.add_argument("--chimera", default="8x8x4")
    s.add_argument("--trials", type=int, default=1)
    s.add_argument("--timeout-s", type=float, default=30.0)
    s.add_argument("--n-dis", default="0",
                   help="comma list of disabled-qubit fractions")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--fit", action="append", default=[],
                   choices=["erfc", "power", "yield"])
    s.add_argument("--bin-width", type=int, default=20)
    s.add_argument("--out", required=True, help="output prefix")
    s.add_argument("--wall-ms", choices=["measure", "zero"],
                   default="measure")
    s.add_argument("--manifest", default=None)

    sp = sub.add_parser("spectrum", help="wire-model annealing gap study")
    sp.add_argument("--wire", required=True, metavar="N,M")
    sp.add_argument("--j12", type=float, default=-1.0)
    sp.add_argument("--jc", type=float, default=-1.0)
    sp.add_argument("--pd1", type=float, default=None)
    sp.add_argument("--pd2", type=float, default=None)
    sp.add_argument("--grid", type=int, default=201)
    sp.add_argument("--cap", type=int, default=spectrum.SPIN_CAP)
    sp.add_argument("--out", default=None, help="gap CSV path")
    sp.add_argument("--summary", default=None, help="summary JSON path")
    sp.add_argument("--manifest", default=None)

    r = sub.add_parser("replay", help="re-run a recorded manifest")
    r.add_argument("manifest")
    r.add_argument("--out-dir", default=None,
                   help="redirect output paths into this directory")
    return p


def _manifest(args, argv, outputs, started):
    return {
        "tool": "qcanneal",
        "version": __version__,
        "command": args.command,
        "argv": argv,
        "outputs": outputs,
        "started": started,
        "finished": _now(),
    }


def _now():
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


def _write_manifest(path, manifest):
    if path:
        with open(path, "w") as fp:
            json.dump(manifest, fp, indent=1)


def _parse_pair(text, what):
    try:
        lo, hi = (int(x) for x in text.split(","))
    except ValueError as exc:
        raise UsageError(f"bad {what} range {text!r}") from exc
    return lo, hi


def cmd_embed(args, argv):
    started = _now()
    spec = chimera.parse_spec(args.chimera)
    hw = chimera.build_chimera(spec)
    if args.disable_fraction:
        mask = chimera.YieldMask.random_qubits(
            spec, args.disable_fraction, seed=args.yield_seed)
        hw = chimera.apply_yield(hw, mask)
    circ = circuit.load_circuit(args.circuit, mode=args.adjacency)
    out = args.output or (os.path.splitext(args.circuit)[0]
                          + f".{args.algorithm}.embedding.json")
    outputs = [out]
    import time as _time
    t0 = _time.monotonic()
    if args.algorithm == "dense":
        emb = dense.embed_dense(
            circ, hw, cfg=dense.DenseConfig(timeout_s=args.timeout_s),
            seed=args.seed)
        models = convert.convert(circ, emb).models if (args.convert
                                                       or args.assign) else None
        payload = models if models is not None else emb
    else:
        emb = heuristic.embed_heuristic(
            circ, hw, cfg=heuristic.HeurConfig(timeout_s=args.timeout_s),
            seed=args.seed)
        models = emb.models
        payload = models
    wall = 0 if args.wall_ms == "zero" else int(
        round(1000 * (_time.monotonic() - t0)))
    dense.save_embedding(out, payload, spec, algorithm=args.algorithm,
                         seed=args.seed, wall_ms=wall)
    if args.assign:
        problem = ising.assign(models, circ, hw)
        base = os.path.splitext(out)[0]
        ising.save_text(problem, spec, base + ".ising.txt")
        ising.save_json(problem, spec, base + ".ising.json")
        outputs += [base + ".ising.txt", base + ".ising.json"]
    _write_manifest(args.manifest, _manifest(args, argv, outputs, started))
    print(out)
    return 0


def cmd_generate(args, argv):
    started = _now()
    rng = np.random.default_rng(args.seed)
    outputs = []
    if args.count > 1 or os.path.isdir(args.out):
        os.makedirs(args.out, exist_ok=True)
    index = []
    for i in range(args.count):
        if args.size is not None:
            cfg = gen.sized_config(args.size, adjacency=args.adjacency)
        else:
            cfg = gen.GenConfig(
                majority=_parse_pair(args.majority, "majority"),
                inverters=_parse_pair(args.inverters, "inverters"),
                drivers=_parse_pair(args.drivers, "drivers"),
                wire_range=_parse_pair(args.wire_range, "wire"),
                adjacency=args.adjacency)
        cfg.name = f"gen-{args.seed}-{i}"
        g = gen.generate(cfg, rng=rng)
        if args.count == 1 and not os.path.isdir(args.out):
            path = args.out
        else:
            path = os.path.join(args.out, f"{cfg.name}.json")
        circuit.save_graph_json(g, path)
        outputs.append(path)
        index.append({"file": os.path.basename(path), "n_cells": g.n_nodes})
    if args.count > 1:
        idx_path = os.path.join(args.out, "index.json")
        with open(idx_path, "w") as fp:
            json.dump(index, fp, indent=1)
        outputs.append(idx_path)
    _write_manifest(args.manifest, _manifest(args, argv, outputs, started))
    print("\n".join(outputs))
    return 0


def cmd_sweep(args, argv):
    started = _now()
    spec = chimera.parse_spec(args.chimera)
    if args.circuits:
        files = sorted(glob.glob(os.path.join(args.circuits, "*.json")))
        files = [f for f in files if not f.endswith("index.json")]
        if not files:
            raise UsageError(f"no circuit files in {args.circuits}")
        circuits = [(os.path.splitext(os.path.basename(f))[0],
                     circuit.load_circuit(f)) for f in files]
        adjacencies = sorted({c.adjacency for _, c in circuits})
    elif args.generate:
        try:
            lo, hi = (int(x) for x in args.sizes.split(":"))
        except ValueError as exc:
            raise UsageError(f"bad --sizes {args.sizes!r}") from exc
        adjacencies = (["limited", "full"] if args.adjacency == "both"
                       else [args.adjacency])
        rng = np.random.default_rng(args.seed)
        sizes = np.linspace(lo, hi, args.generate).round().astype(int)
        circuits = []
        for i, size in enumerate(sizes):
            cseed = int(rng.integers(1 << 31))
            for adj in adjacencies:
                g = gen.generate(gen.sized_config(int(size), adjacency=adj),
                                 seed=cseed)
                circuits.append((f"gen{i:04d}-{adj}", g))
    else:
        raise UsageError("need --circuits or --generate")
    if args.adjacency != "both":
        circuits = [(cid, c) for cid, c in circuits
                    if c.adjacency == args.adjacency]
    algorithms = (["dense", "heuristic"] if args.algorithm == "both"
                  else [args.algorithm])
    fractions = [float(x) for x in args.n_dis.split(",")]
    records = []
    for algo in algorithms:
        for frac in fractions:
            records.extend(bench.run_sweep(
                circuits, algo, (spec.rows, spec.cols, spec.half_tile),
                trials_per_circuit=args.trials, timeout_s=args.timeout_s,
                n_dis=frac, root_seed=args.seed, jobs=args.jobs,
                wall_mode=args.wall_ms))
    records.sort(key=lambda r: (r.algorithm, r.n_dis, r.circuit_id, r.seed))
    csv_path = args.out + ".csv"
    bench.save_records(records, csv_path)
    outputs = [csv_path]
    fits = {}
    for kind in args.fit:
        fits[kind] = {}
        for algo in algorithms:
            for adj in sorted({r.adjacency for r in records}):
                sel = [r for r in records
                       if r.algorithm == algo and r.adjacency == adj]
                key = f"{algo}-{adj}"
                try:
                    if kind == "erfc":
                        sel0 = [r for r in sel if r.n_dis == 0.0]
                        fits[kind][key] = bench.fit_erfc(
                            sel0, width=args.bin_width).to_json_obj()
                    elif kind == "power":
                        ok = [r for r in sel if r.success and r.n_dis == 0.0]
                        fits[kind][key] = bench.fit_power(
                            [r.n_cells for r in ok],
                            [r.n_qubits for r in ok]).to_json_obj()
                    elif kind == "yield":
                        mus, fracs2 = [], []
                        for frac in sorted({r.n_dis for r in sel}):
                            fr = bench.fit_erfc(
                                [r for r in sel if r.n_dis == frac],
                                width=args.bin_width)
                            fracs2.append(frac)
                            mus.append(fr.params["mu"])
                        fits[kind][key] = bench.fit_yield(
                            fracs2, mus).to_json_obj()
                except (ValueError, np.linalg.LinAlgError) as exc:
                    fits[kind][key] = {"error": str(exc)}
        fit_path = args.out + f".fit-{kind}.json"
        with open(fit_path, "w") as fp:
            json.dump(fits[kind], fp, indent=1)
        outputs.append(fit_path)
    report = bench.summarize(records, bin_width=args.bin_width)
    rep_path = args.out + ".report.json"
    with open(rep_path, "w") as fp:
        json.dump(report, fp, indent=1)
    outputs.append(rep_path)
    sys.stdout.write(bench.report_text(report))
    _write_manifest(args.manifest, _manifest(args, argv, outputs, started))
    return 0


def cmd_spectrum(args, argv):
    started = _now()
    try:
        n, m = (int(x) for x in args.wire.split(","))
    except ValueError as exc:
        raise UsageError(f"bad --wire {args.wire!r}") from exc
    if args.pd1 is None or args.pd2 is None:
        if args.j12 < 0:
            pd1 = pd2 = 1.0
        else:
            pd1, pd2 = 1.0, -1.0
    else:
        pd1, pd2 = args.pd1, args.pd2
    w = spectrum.WireModel(n, m, j12=args.j12, jc=args.jc,
                           p_d1=pd1, p_d2=pd2)
    result = spectrum.min_gap(spectrum.build_wire_model(w),
                              grid=args.grid, cap=args.cap)
    reduction = spectrum.gap_reduction(w, grid=args.grid, cap=args.cap)
    out = args.out or f"gap-{n}x{m}.csv"
    spectrum.save_gap(result, out, args.summary)
    summary = spectrum.gap_summary(result)
    summary["reduction_pct_vs_1x1"] = reduction
    if args.summary:
        with open(args.summary, "w") as fp:
            json.dump(summary, fp, indent=1)
    print(json.dumps(summary))
    _write_manifest(args.manifest, _manifest(
        args, argv, [out] + ([args.summary] if args.summary else []),
        started))
    return 0


def cmd_replay(args, argv):
    with open(args.manifest) as fp:
        manifest = json.load(fp)
    recorded = list(manifest["argv"])
    if args.out_dir:
        os.makedirs(args.out_dir, exist_ok=True)
        redirect = []
        skip = False
        for i, tok in enumerate(recorded):
            if skip:
                skip = False
                redirect.append(os.path.join(args.out_dir,
                                             os.path.basename(tok)))
                continue
            if tok in ("--output", "--out", "--summary", "--manifest"):
                skip = True
            redirect.append(tok)
        recorded = redirect
    return main(recorded)


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        handler = {"embed": cmd_embed, "generate": cmd_generate,
                   "sweep": cmd_sweep, "spectrum": cmd_spectrum,
                   "replay": cmd_replay}[args.command]
        return handler(args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except dense.EmbeddingFailure as exc:
        print(f"embedding failure ({exc.reason}): {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
