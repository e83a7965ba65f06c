"""Command-line entry point.

Exit codes: 0 success, 1 property violation or no decodable path, 2 usage or
I/O problems.  Successful commands print JSON on stdout.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from . import bench
from .encoder import EncoderConfig, ModelParams, encode
from .errors import EmptyMentionSet, MhgrnError, NoPath, UnlinkedEntity
from .pathreason import count_paths, decode_path, oracle_trial
from .qa import QaInstance, option_scores
from .relgraph import MultiRelGraph, RelationVocab, extract_subgraph, load_kg, synthetic_graph

ORACLE_MAX_N = 12
ORACLE_TOL = 1e-9


class UsageError(Exception):
    pass


def _emit(obj) -> None:
    print(json.dumps(obj))


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MHGRN_THREADS", "1")))
    except ValueError:
        return 1


def _names(raw: str) -> list:
    return [x.strip() for x in raw.split(",") if x.strip()] if raw else []


def cmd_extract(args) -> int:
    vocab = RelationVocab.load(args.vocab) if args.vocab else RelationVocab.default()
    kg = load_kg(args.kg, vocab)
    q_names, a_names = _names(args.q), _names(args.a)
    if not q_names and not a_names:
        raise EmptyMentionSet("both --q and --a are empty")
    graph = extract_subgraph(kg, {kg.link(x) for x in q_names}, {kg.link(x) for x in a_names})
    graph.save(args.out)
    _emit({"n": graph.n, "edges": len(graph.edges), "types": graph.type_counts(),
           "nodes": [kg.names[i] for i in graph.node_kg_ids]})
    return 0


def cmd_oracle_check(args) -> int:
    if not 2 <= args.n <= ORACLE_MAX_N:
        raise UsageError(f"--n must be in 2..{ORACLE_MAX_N} (the oracle enumerates paths)")
    if args.m < 1 or args.k < 1 or args.trials < 1:
        raise UsageError("--m, --k and --trials must be positive")
    seeds = [args.seed + t for t in range(args.trials)]
    with ThreadPoolExecutor(max_workers=_threads()) as pool:
        gaps = list(pool.map(lambda sd: oracle_trial(sd, args.n, args.m, args.k), seeds))
    worst = max(max(g) for g in gaps)
    bad = [sd for sd, g in zip(seeds, gaps) if max(g) >= ORACLE_TOL]
    _emit({"trials": args.trials, "max_abs_diff_z": max(g[0] for g in gaps),
           "max_abs_diff_d": max(g[1] for g in gaps), "max_abs_diff": worst,
           "tolerance": ORACLE_TOL, "failing_seeds": bad, "ok": not bad})
    return 1 if bad else 0


def cmd_bench(args) -> int:
    if args.k_max < 1 or args.n < 1 or args.m < 1 or args.deg <= 0 or args.trials < 3:
        raise UsageError("--k-max, --n, --m, --deg must be positive and --trials >= 3")
    records, summary = bench.run_bench(args.k_max, args.n, args.m, args.deg, args.trials, args.seed)
    bench.write_csv(records, args.out)
    _emit({"records": len(records), "csv": str(args.out), **summary})
    return 0


def cmd_count_paths(args) -> int:
    if args.k < 1:
        raise UsageError("--k must be at least 1")
    if bool(args.graph) == bool(args.synthetic):
        raise UsageError("give exactly one of --graph or --synthetic")
    graph = MultiRelGraph.load(args.graph) if args.graph else synthetic_graph(args.synthetic, args.seed)
    _emit({"k": args.k, "counts": count_paths(graph, args.k)})
    return 0


def _score(args):
    params = ModelParams.load(args.params)
    instance = QaInstance.load(args.instance)
    config = EncoderConfig(K=params.K, activation=params.activation).ablate(*_names(args.ablate))
    scores = option_scores(instance, params, config)
    return params, instance, config, scores


def cmd_score(args) -> int:
    _, _, _, scores = _score(args)
    _emit({"scores": scores.tolist(), "prediction": int(scores.argmax())})
    return 0


def cmd_decode(args) -> int:
    params, instance, config, scores = _score(args)
    best = int(scores.argmax())
    graph = instance.graphs[best]
    s, H = instance.statements[best], instance.features[best]
    output = encode(graph, H, s, params, config)
    path = decode_path(graph, output, s, params, config)
    vocab = RelationVocab.default()
    rel_name = vocab.name if params.m == vocab.m else (lambda r: f"r{r}")
    _emit({"scores": scores.tolist(), "prediction": best, "path": path.to_json(rel_name)})
    return 0


def cmd_init_params(args) -> int:
    params = ModelParams.init(d_in=args.d_in, d=args.d, d_out=args.d_out, d_s=args.d_s, K=args.k, m=args.m,
                              h_att=args.h_att, h_rho=args.h_rho, seed=args.seed, activation=args.activation)
    params.save(args.out)
    _emit({"params": params.size, **params.header()})
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mhgrn", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="extract a question/answer subgraph from a triple TSV")
    p.add_argument("--kg", required=True)
    p.add_argument("--q", default="", help="comma-separated question entity names")
    p.add_argument("--a", default="", help="comma-separated answer entity names")
    p.add_argument("--out", required=True)
    p.add_argument("--vocab", help="relation vocabulary JSON override")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("oracle-check", help="dynamic program vs brute-force path sum")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--n", type=int, default=8)
    p.add_argument("--m", type=int, default=3)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--trials", type=int, default=20)
    p.set_defaults(func=cmd_oracle_check)

    p = sub.add_parser("bench", help="forward-pass time vs number of hops")
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m", type=int, default=34)
    p.add_argument("--deg", type=float, default=10.0)
    p.add_argument("--trials", type=int, default=5)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("count-paths", help="walk counts per length")
    p.add_argument("--graph")
    p.add_argument("--synthetic", help="complete:n | chain:n | erdos:n:deg:m")
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--k", type=int, required=True)
    p.set_defaults(func=cmd_count_paths)

    for name, func, text in (("score", cmd_score, "plausibility per option"),
                             ("decode", cmd_decode, "score and decode an evidence path")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--params", required=True)
        p.add_argument("--instance", required=True)
        p.add_argument("--ablate", default="", help="comma list of type-transform,rel-attention,node-attention")
        p.set_defaults(func=func)

    p = sub.add_parser("init-params", help="write seeded random model parameters")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=13)
    p.add_argument("--d-in", type=int, default=32)
    p.add_argument("--d", type=int, default=32)
    p.add_argument("--d-out", type=int, default=32)
    p.add_argument("--d-s", type=int, default=16)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--m", type=int, default=34)
    p.add_argument("--h-att", type=int, default=16)
    p.add_argument("--h-rho", type=int, default=32)
    p.add_argument("--activation", default="tanh")
    p.set_defaults(func=cmd_init_params)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoPath as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except UnlinkedEntity as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (UsageError, MhgrnError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
