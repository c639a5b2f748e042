"""Command-line entry point.

Subcommands: generate, simulate, infer, benchmark.  Every run writes a
config echo next to its outputs so it can be replayed exactly.  Exit
codes: 0 success, 1 I/O failure, 2 validation failure, 3 numerical
failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import evaluate, fileio, netsim
from .errors import GenerationError, NumericalError, ParameterError
from .keb import KebConfig, fit_keb
from .topology import infer_network
from .vi import ViConfig

EXIT_OK = 0
EXIT_IO = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _echo_config(out_dir: Path, command: str, args: dict):
    fileio.write_json(out_dir / f"{command}-config.json",
                      {"command": command, "args": args})


def _parse_snr(text: str):
    if text in ("none", "no-noise"):
        return netsim.NO_NOISE
    if text in ("pure-noise", "no-input"):
        return netsim.NO_INPUT
    try:
        return float(text)
    except ValueError as exc:
        raise ParameterError(f"--snr must be a number, 'none' or 'pure-noise', "
                             f"got {text!r}") from exc


def cmd_generate(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.topology == "random":
        if not 0.0 < args.density < 1.0:
            raise ParameterError(f"--density must lie in (0, 1), got {args.density}")
        model = netsim.generate_random_network(args.nodes, args.observed,
                                               args.density, args.seed)
    else:
        model = netsim.generate_ring_network(args.observed,
                                             hidden_per_edge=args.hidden_per_edge,
                                             seed=args.seed)
    truth = netsim.derive_dsf_structure(model)
    fileio.write_model(out / "model.json", model)
    fileio.write_structure(out / "truth.json", truth)
    _echo_config(out, "generate", vars(args) | {"func": None})
    print(f"wrote {out / 'model.json'} ({model.n} states, {model.p} observed, "
          f"{truth.n_links} links)")
    return EXIT_OK


def cmd_simulate(args) -> int:
    model_path = Path(args.model)
    if not model_path.exists():
        print(f"model file not found: {model_path}", file=sys.stderr)
        return EXIT_IO
    model = fileio.read_model(model_path)
    snr = _parse_snr(args.snr)
    experiment = netsim.simulate(model, args.points, snr, args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    fileio.write_experiment(out / "experiment.csv", experiment)
    _echo_config(out, "simulate", vars(args) | {"func": None})
    print(f"wrote {out / 'experiment.csv'} ({args.points} points, snr={snr})")
    return EXIT_OK


def cmd_infer(args) -> int:
    experiments = []
    for path in args.experiment:
        p = Path(path)
        if not p.exists():
            print(f"experiment file not found: {p}", file=sys.stderr)
            return EXIT_IO
        experiments.append(fileio.read_experiment(p))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    if args.method == "vi":
        config = ViConfig(max_iter=args.max_iter, tol=args.tol,
                          n_mh_samples=args.mh_samples, seed=args.seed)
        network = infer_network(experiments, config, trunc=args.trunc)
    else:
        config = KebConfig(max_iter=args.max_iter, seed=args.seed)
        network = infer_network(experiments, config, trunc=args.trunc,
                                fit=fit_keb, method="keb-tc")
    echo = vars(args) | {"func": None}
    fileio.write_network(out / "network.json", network, config_echo=echo,
                         conventions=evaluate.CONVENTIONS)
    _echo_config(out, "infer", echo)
    if network.unresolved:
        fileio.write_json(out / "diagnostics.json",
                          {"unresolved_nodes": {str(k): v for k, v in
                                                network.unresolved.items()}})
        print(f"{len(network.unresolved)} node(s) unresolved; see "
              f"{out / 'diagnostics.json'}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(f"wrote {out / 'network.json'} ({network.n_links} links)")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    if args.suite == "custom":
        if not args.grid:
            raise ParameterError("--grid is required with --suite custom")
        grid_path = Path(args.grid)
        if not grid_path.exists():
            print(f"grid file not found: {grid_path}", file=sys.stderr)
            return EXIT_IO
        spec = fileio.read_json(grid_path)
        cells = tuple(evaluate.Condition(c["topology"],
                                         _parse_snr(str(c["snr"])),
                                         int(c["n_points"]))
                      for c in spec["cells"])
    else:
        cells = evaluate.SUITES[args.suite]
    methods = tuple(args.methods.split(","))
    config = evaluate.BenchmarkConfig(
        cells=cells, trials=args.trials, methods=methods, seed=args.seed,
        trunc=args.trunc,
        vi=ViConfig(n_mh_samples=args.mh_samples, max_iter=args.max_iter,
                    tol=args.tol))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    start = time.perf_counter()

    def progress(batch):
        for r in batch:
            status = r.error or f"tpr={r.tpr:.3f} prec={r.prec:.3f}"
            print(f"[{time.perf_counter() - start:8.1f}s] {r.condition} "
                  f"{r.method} trial {r.trial}: {status}", flush=True)

    results, summary = evaluate.run_benchmark(config, progress=progress)
    fileio.write_results_csv(out / "results.csv", results)
    fileio.write_json(out / "summary.json", summary)
    _echo_config(out, "benchmark", vars(args) | {"func": None})
    print(f"wrote {out / 'results.csv'} and {out / 'summary.json'}")
    n_ok = sum(1 for r in results if r.error is None)
    if results and n_ok == 0:
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="netinf",
        description="Sparse linear network inference from time series.")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="draw a ground-truth network")
    g.add_argument("--nodes", type=int, default=15, help="total state count")
    g.add_argument("--observed", type=int, default=10, help="observed node count")
    g.add_argument("--density", type=float, default=0.15,
                   help="nonzero fraction of the state matrix (random topology)")
    g.add_argument("--topology", choices=["random", "ring"], default="random")
    g.add_argument("--hidden-per-edge", type=int, default=0,
                   help="hidden states per ring edge")
    g.add_argument("--seed", type=int, required=True)
    g.add_argument("--out", required=True, help="output directory")
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("simulate", help="simulate a generated network")
    s.add_argument("--model", required=True, help="model.json path")
    s.add_argument("--points", type=int, required=True)
    s.add_argument("--snr", default="none",
                   help="SNR in dB, 'none' (noise free) or 'pure-noise'")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    i = sub.add_parser("infer", help="infer a network from experiments")
    i.add_argument("--experiment", action="append", required=True,
                   help="experiment CSV (repeatable)")
    i.add_argument("--method", choices=["vi", "keb"], default="vi")
    i.add_argument("--trunc", type=int, default=20)
    i.add_argument("--mh-samples", type=int, default=500)
    i.add_argument("--max-iter", type=int, default=50)
    i.add_argument("--tol", type=float, default=1e-3)
    i.add_argument("--seed", type=int, required=True)
    i.add_argument("--out", required=True)
    i.set_defaults(func=cmd_infer)

    b = sub.add_parser("benchmark", help="run a Monte Carlo evaluation grid")
    b.add_argument("--suite", choices=["table1", "table2", "table3", "table4",
                                       "custom"], required=True)
    b.add_argument("--grid", help="JSON grid file for --suite custom")
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--methods", default="vi", help="comma list: vi,keb")
    b.add_argument("--trunc", type=int, default=20)
    b.add_argument("--mh-samples", type=int, default=500)
    b.add_argument("--max-iter", type=int, default=50)
    b.add_argument("--tol", type=float, default=1e-3)
    b.add_argument("--seed", type=int, required=True)
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_benchmark)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ParameterError as exc:
        print(f"invalid parameter: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except GenerationError as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"i/o failure: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
