"""Command-line interface: analyze, enumerate, equiv, extend, spearman.

Exit codes: 0 certified / positive answer, 3 not identifiable (probable or
edge bound violated) or no certificate found, 2 input error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .criteria import necessary_condition, subgraph_extension, sufficient_odd_cycle, wermuth_condition
from .enumeration import RunConfig, classify_all, load_cache, summary_line, write_outputs
from .errors import LatentDagError, TooLarge, TooSmall
from .exact_linalg import parse_matrix
from .graphs import (MAX_CANONICAL_NODES, canonical_key, complement, concentration_graph, latent_cov_graph,
                     markov_equivalent, parse_graph, v_structures)
from .jacobian import DEFAULT_SEED, DEFAULT_TRIALS, Status, build_jacobian, decide_generic_finite, jacobian_shape
from .models import DEFAULT_BOUND
from .spearman import cospearman_decompose, is_cospearman, is_spearman, spearman_decompose, tetrads

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_NEGATIVE = 3

SCHEMA_DIR = Path(__file__).with_name("schemas")


class InputError(LatentDagError):
    pass


def _read(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise InputError(f"cannot read {path}: {e.strerror}") from None


def _parse_excluded(text: str | None) -> list[int]:
    if not text:
        return []
    try:
        return sorted({int(x) for x in text.split(",") if x.strip()})
    except ValueError:
        raise InputError(f"--excluded expects comma-separated node numbers, got {text!r}") from None


def _edges(H) -> list[list[int]]:
    return [list(e) for e in H.sorted_edges()]


def _emit(obj: dict, as_json: bool, human):
    if as_json:
        print(json.dumps(obj, indent=2, sort_keys=True))
    else:
        human(obj)


def analyze_report(G, excluded, seed, bound, trials) -> tuple[dict, object]:
    for v in excluded:
        G._check(v)
    verdict = decide_generic_finite(G, excluded, seed=seed, bound=bound, trials=trials)
    nec = necessary_condition(G, excluded)
    rows, cols = jacobian_shape(G, excluded)
    report = {
        "graph": {"m": G.m, "edges": _edges(G)},
        "excluded": list(excluded),
        "canonical_key": canonical_key(G).hex() if G.m <= MAX_CANONICAL_NODES else None,
        "sufficient": sufficient_odd_cycle(G, excluded),
        "wermuth": wermuth_condition(G),
        "necessary": nec.to_json(),
        "derived": {
            "complement": _edges(complement(G)),
            "concentration": _edges(concentration_graph(G)),
            "latent_cov": _edges(latent_cov_graph(G)),
        },
        "jacobian": {"rows": rows, "columns": cols, **verdict.to_json()},
    }
    return report, verdict


def _print_analyze(r: dict):
    g = r["graph"]
    print(f"graph: m={g['m']} edges={' '.join(f'{a}->{b}' for a, b in g['edges']) or '(none)'}")
    if r["excluded"]:
        print(f"excluded: {','.join(map(str, r['excluded']))}")
    for name, edges in r["derived"].items():
        print(f"{name}: {' '.join(f'{a}-{b}' for a, b in edges) or '(none)'}")
    print(f"suff={str(r['sufficient']).lower()} wermuth={str(r['wermuth']).lower()}")
    n = r["necessary"]
    print(f"nec.holds={str(n['holds']).lower()} e_con={n['e_con']} d_con={n['d_con']} "
          f"cov_edges={n['cov_edges']} d_cov={n['d_cov']} edges={n['edges']}"
          + (f" failed={n['failed_clause']}" if n["failed_clause"] else ""))
    j = r["jacobian"]
    print(f"jacobian: {j['rows']}x{j['columns']} rank={j['rank_observed']} trials={j['trials']} seed={j['seed']}")
    print(f"verdict={j['status']}")


def cmd_analyze(args) -> int:
    G = parse_graph(_read(args.graph_file))
    excluded = _parse_excluded(args.excluded)
    report, verdict = analyze_report(G, excluded, args.seed, args.bound, args.trials)
    if args.dump_witness and verdict.witness is not None:
        Path(args.dump_witness).write_text(json.dumps(verdict.witness.to_json(), indent=2) + "\n")
    if args.dump_jacobian:
        if verdict.witness is not None:
            text = build_jacobian(G, verdict.witness).to_text()
        else:
            text = "# no full-rank point found; nothing to dump\n"
        Path(args.dump_jacobian).write_text(text)
    _emit(report, args.json, _print_analyze)
    return EXIT_OK if verdict.status is Status.IDENTIFIABLE else EXIT_NEGATIVE


def cmd_enumerate(args) -> int:
    if args.m > 6:
        raise TooLarge("enumerate supports m <= 6")
    if args.m < 3:
        raise TooSmall("enumerate needs m >= 3")
    config = RunConfig(seed=args.seed, bound=args.bound, trials=args.trials,
                       workers=args.workers, output_dir=Path(args.output_dir))
    cache_lower = load_cache(args.cache_lower) if args.cache_lower else None
    result = classify_all(args.m, config, cache_lower=cache_lower)
    paths = write_outputs(result, config.output_dir)
    if args.json:
        print(json.dumps({"m": args.m, "report": result.report, "files": [str(p) for p in paths]},
                         indent=2, sort_keys=True))
    else:
        print(summary_line(result.report))
        for p in paths:
            print(f"wrote {p}")
    return EXIT_OK


def cmd_equiv(args) -> int:
    G1 = parse_graph(_read(args.file1))
    G2 = parse_graph(_read(args.file2))
    eq = markov_equivalent(G1, G2)
    out = {"markov_equivalent": eq,
           "same_skeleton": G1.skeleton() == G2.skeleton(),
           "v_structures": [sorted(map(list, v_structures(G1))), sorted(map(list, v_structures(G2)))]}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_extend(args) -> int:
    G = parse_graph(_read(args.graph_file))
    cache = load_cache(args.cache_file)
    cert = subgraph_extension(G, cache, max_depth=args.max_depth, use_odd_cycle=not args.cache_only)
    out = {"certified": cert is not None, "certificate": None if cert is None else cert.to_json()}
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK if cert is not None else EXIT_NEGATIVE


def cmd_spearman(args) -> int:
    M = parse_matrix(_read(args.matrix_file))
    out = {"is_spearman": is_spearman(M), "is_cospearman": is_cospearman(M)}
    if out["is_spearman"]:
        out["spearman"] = spearman_decompose(M).to_json()
    if out["is_cospearman"]:
        out["cospearman"] = cospearman_decompose(M).to_json()
    if M.rows == M.cols and M.rows >= 4:
        out["tetrads_vanish"] = all(t == 0 for t in tetrads(M))
    print(json.dumps(out, indent=2, sort_keys=True))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="latentdag",
                                     description="Generic identifiability of Gaussian DAG models with one latent source.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def rng_flags(p):
        p.add_argument("--seed", type=int, default=DEFAULT_SEED, help="root seed (default %(default)s)")
        p.add_argument("--bound", type=int, default=DEFAULT_BOUND, help="entry bound for random points")
        p.add_argument("--trials", type=int, default=DEFAULT_TRIALS, help="random points tried")

    p = sub.add_parser("analyze", help="all criteria plus the Jacobian verdict for one DAG")
    p.add_argument("graph_file")
    p.add_argument("--excluded", help="comma-separated nodes without a latent loading")
    p.add_argument("--dump-jacobian", metavar="PATH", help="write the Jacobian at the witness point")
    p.add_argument("--dump-witness", metavar="PATH", help="write the certifying parameter point as JSON")
    p.add_argument("--json", action="store_true", help="machine-readable output")
    rng_flags(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("enumerate", help="classify every unlabeled DAG on m nodes")
    p.add_argument("m", type=int)
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    p.add_argument("--output-dir", default=".", help="where table1.json, the CSV and the cache go")
    p.add_argument("--cache-lower", metavar="PATH", help="verdict cache for m-1 (computed if absent)")
    p.add_argument("--json", action="store_true")
    rng_flags(p)
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("equiv", help="Markov equivalence of two DAGs")
    p.add_argument("file1")
    p.add_argument("file2")
    p.set_defaults(func=cmd_equiv)

    p = sub.add_parser("extend", help="sink/source extension certificate from a verdict cache")
    p.add_argument("graph_file")
    p.add_argument("cache_file")
    p.add_argument("--max-depth", type=int, default=None)
    p.add_argument("--cache-only", action="store_true", help="do not stop at subgraphs passing the odd-cycle test")
    p.set_defaults(func=cmd_extend)

    p = sub.add_parser("spearman", help="Spearman / coSpearman membership of a matrix")
    p.add_argument("matrix_file")
    p.set_defaults(func=cmd_spearman)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (LatentDagError, ValueError) as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
