"""Command line entry point: ``combembed <subcommand> [flags]``.

Every flag may also come from a JSON config file (``--config``) using the
flag name with dashes replaced by underscores; flags on the command line win.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .comb import CombEmbedding, brute_force_contains_comb, verify_embedding
from .graph import read_edgelist, write_edgelist
from .harness import (ThresholdError, TrialConfig, check_devs, derive_seed, devs_bounds,
                      estimate_threshold, run_trial, sample_trial_graphs, sweep)
from .params import ParameterError

DEFAULTS = {
    "n": 3000,
    "k": 6,
    "C": 10.0,
    "C_grid": None,
    "trials": 50,
    "seed": 0,
    "mode": "engineering",
    "D": 3.0,
    "alpha": None,
    "T": None,
    "p": None,
    "spine_d": 5.0,
    "full_comb": False,
    "workers": 1,
    "out": None,
    "target": 0.5,
    "tolerance": 1.0,
    "lo": 0.0,
    "hi": 16.0,
    "embedding": False,
    "timing": False,
    "dump_graph": None,
    "no_sample": False,
}


def _add_common(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--config", default=S, help="JSON file with flag values")
    p.add_argument("--n", type=int, default=S)
    p.add_argument("--k", type=int, default=S)
    p.add_argument("--C", type=float, default=S, help="constant in p = C log n / n")
    p.add_argument("--trials", type=int, default=S)
    p.add_argument("--seed", type=int, default=S)
    p.add_argument("--mode", choices=["paper", "engineering"], default=S)
    p.add_argument("--D", type=float, default=S, help="degree-regime constant")
    p.add_argument("--alpha", type=float, default=S)
    p.add_argument("--T", type=int, default=S, help="override the degree threshold")
    p.add_argument("--p", type=float, default=S, help="override the per-layer edge probability")
    p.add_argument("--spine-d", dest="spine_d", type=float, default=S)
    p.add_argument("--full-comb", dest="full_comb", action="store_true", default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--out", default=S, help="write output here instead of stdout")
    p.add_argument("-v", "--verbose", action="store_true", default=S)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="combembed", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    S = argparse.SUPPRESS

    p = sub.add_parser("trial", help="one run, JSON record on stdout")
    _add_common(p)
    p.add_argument("--embedding", action="store_true", default=S, help="include the paths")
    p.add_argument("--timing", action="store_true", default=S, help="include runtime")
    p.add_argument("--dump-graph", dest="dump_graph", default=S,
                   help="write the witness graph as an edge list")

    p = sub.add_parser("sweep", help="success frequency over a grid of C (CSV)")
    _add_common(p)
    p.add_argument("--C-grid", dest="C_grid", default=S, help="comma-separated C values")

    p = sub.add_parser("threshold", help="bisect C for a target success frequency (JSON)")
    _add_common(p)
    p.add_argument("--target", type=float, default=S)
    p.add_argument("--tolerance", type=float, default=S)
    p.add_argument("--lo", type=float, default=S)
    p.add_argument("--hi", type=float, default=S)

    p = sub.add_parser("devs", help="first-step deviation bounds per trial (table)")
    _add_common(p)
    p.add_argument("--no-sample", dest="no_sample", action="store_true", default=S,
                   help="only print the numeric bounds from the parameters")

    p = sub.add_parser("verify", help="check an embedding against an edge list")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("embedding", help="embedding JSON (a trial record also works)")
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--require-spine", action="store_true")

    p = sub.add_parser("oracle", help="brute-force comb containment for n <= 12")
    p.add_argument("graph", help="edge-list file")
    p.add_argument("--k", type=int, required=True)
    return parser


def resolve(ns: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    given = vars(ns)
    if "config" in given:
        cfg = json.loads(Path(given["config"]).read_text())
        unknown = set(cfg) - set(DEFAULTS) - {"verbose"}
        if unknown:
            raise SystemExit(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    opts.update({k: v for k, v in given.items() if k != "config"})
    return opts


def trial_config(o: dict) -> TrialConfig:
    return TrialConfig(n=o["n"], k=o["k"], C=o["C"], mode=o["mode"], D=o["D"],
                       alpha=o["alpha"], T=o["T"], p=o["p"], full_comb=bool(o["full_comb"]),
                       spine_d=o["spine_d"])


def _emit(text: str, out) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_trial(o: dict) -> int:
    cfg = trial_config(o)
    rec = run_trial(cfg, o["seed"])
    if o["dump_graph"]:
        write_edgelist(sample_trial_graphs(cfg, o["seed"]).witness, o["dump_graph"])
    _emit(rec.to_json(timing=o["timing"], embedding=o["embedding"], indent=2) + "\n", o["out"])
    return 0


def cmd_sweep(o: dict) -> int:
    grid = o["C_grid"]
    if grid is None:
        grid = [o["C"]]
    elif isinstance(grid, str):
        grid = [float(x) for x in grid.split(",") if x.strip()]
    rep = sweep(trial_config(o), grid, o["trials"], o["seed"], workers=o["workers"])
    _emit(rep.to_csv(), o["out"])
    return 0


def cmd_threshold(o: dict) -> int:
    est = estimate_threshold(trial_config(o), o["target"], o["trials"], o["tolerance"],
                             o["seed"], lo=o["lo"], hi=o["hi"], workers=o["workers"])
    _emit(json.dumps(est.to_dict(), indent=2) + "\n", o["out"])
    return 0


def cmd_devs(o: dict) -> int:
    cfg = trial_config(o)
    params = cfg.params()
    lines = []
    if o["no_sample"]:
        for key, val in devs_bounds(params).items():
            lines.append(f"{key:<20} {val}")
        _emit("\n".join(lines) + "\n", o["out"])
        return 0
    cols = ["seed", "outcome", "z_small", "w_sizes", "b_small", "b_multiplicity", "x_small"]
    lines.append("\t".join(cols))
    for t in range(o["trials"]):
        seed = derive_seed(o["seed"], "devs", t)
        rec = run_trial(cfg, seed)
        d = check_devs(rec).to_dict()
        lines.append("\t".join([str(seed), rec.outcome] + [str(d[c]) for c in cols[2:]]))
    _emit("\n".join(lines) + "\n", o["out"])
    return 0


def cmd_verify(ns: argparse.Namespace) -> int:
    g = read_edgelist(ns.graph)
    data = json.loads(Path(ns.embedding).read_text())
    if "embedding" in data and "paths" not in data:
        if data["embedding"] is None:
            print("reject: record has no embedding")
            return 1
        data = data["embedding"]
    emb = CombEmbedding.from_dict(data)
    k = ns.k if ns.k is not None else (len(emb.paths[0]) if emb.paths else 0)
    verdict = verify_embedding(g, emb, emb.roots, k, require_spine=ns.require_spine)
    print("accept" if verdict else f"reject: {verdict.reason}")
    return 0 if verdict else 1


def cmd_oracle(ns: argparse.Namespace) -> int:
    g = read_edgelist(ns.graph)
    try:
        found = brute_force_contains_comb(g, ns.k)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps({"n": g.n, "k": ns.k, "contains_comb": found}))
    return 0


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    if ns.command == "verify":
        return cmd_verify(ns)
    if ns.command == "oracle":
        return cmd_oracle(ns)
    o = resolve(ns)
    logging.basicConfig(level=logging.INFO if o.get("verbose") else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    handler = {"trial": cmd_trial, "sweep": cmd_sweep, "threshold": cmd_threshold,
               "devs": cmd_devs}[ns.command]
    try:
        return handler(o)
    except (ParameterError, ThresholdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
