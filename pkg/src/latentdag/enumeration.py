"""Exhaustive classification of unlabeled DAGs under the edge-count bound.

Every DAG has a topological labeling, so enumerating edge subsets of the
upper triangle and deduplicating by canonical key visits each isomorphism
class exactly once.  Keys for all subsets are computed in bulk with one
matrix product per chunk against the permutation weight table.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from math import comb
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .criteria import (CacheEntry, as_cache_entry, necessary_condition, replay_certificate,
                       subgraph_extension, sufficient_odd_cycle, wermuth_condition)
from .errors import ConsistencyError, MissingCache, ParseError, TooLarge
from .graphs import (Dag, UGraph, _key_bytes, _perm_weights, acyclic_orientations, canonical_key,
                     dag_from_key, make_dag, markov_class_key)
from .jacobian import DEFAULT_SEED, DEFAULT_TRIALS, Status, decide_generic_finite
from .models import DEFAULT_BOUND

log = logging.getLogger(__name__)

MAX_ENUM_NODES = 7


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    bound: int = DEFAULT_BOUND
    trials: int = DEFAULT_TRIALS
    workers: int | None = None
    output_dir: Path = field(default_factory=lambda: Path("."))

    def __post_init__(self):
        if self.bound < 2:
            raise ValueError("bound must be at least 2")
        if self.trials < 1:
            raise ValueError("trials must be at least 1")
        if self.workers is None:
            self.workers = os.cpu_count() or 1
        self.output_dir = Path(self.output_dir)


def max_edges(m: int) -> int:
    """Largest edge count compatible with a tall Jacobian."""
    return comb(m + 1, 2) - 2 * m


def labeled_dags(m: int, edge_limit: int | None = None) -> list[Dag]:
    """All topologically labeled DAGs (upper-triangular edge subsets) with at most edge_limit edges."""
    limit = max_edges(m) if edge_limit is None else edge_limit
    upper = list(itertools.combinations(range(1, m + 1), 2))
    out = []
    for k in range(0, min(limit, len(upper)) + 1):
        for es in itertools.combinations(upper, k):
            out.append(make_dag(m, es))
    return out


def _subset_masks(m: int, limit: int) -> np.ndarray:
    nu = comb(m, 2)
    rows = []
    for k in range(0, min(limit, nu) + 1):
        for cols in itertools.combinations(range(nu), k):
            r = np.zeros(nu, dtype=np.float64)
            r[list(cols)] = 1.0
            rows.append(r)
    return np.array(rows).reshape(len(rows), nu)


def enumerate_unlabeled_dags(m: int, edge_limit: int | None = None) -> list[Dag]:
    """One representative per isomorphism class, sorted by canonical key.

    The representative is decoded from the key itself, so it does not depend
    on the order in which subsets were visited.
    """
    if m > MAX_ENUM_NODES:
        raise TooLarge(f"enumeration supports m <= {MAX_ENUM_NODES}")
    if m < 1:
        raise ValueError("m must be positive")
    limit = max_edges(m) if edge_limit is None else edge_limit
    if limit < 0:
        return []
    if m == 1:
        return [make_dag(1, [])]
    nu = comb(m, 2)
    W = _perm_weights(m)[:, :nu].astype(np.float64).T  # upper pairs come first
    X = _subset_masks(m, limit)
    chunk = max(1, 4_000_000 // W.shape[1])
    keys = set()
    for start in range(0, X.shape[0], chunk):
        vals = (X[start:start + chunk] @ W).min(axis=1)
        keys.update(int(v) for v in vals)
    return [dag_from_key(_key_bytes(m, k)) for k in sorted(keys)]


# -- classification ---------------------------------------------------------------

@dataclass(frozen=True)
class ClassificationRow:
    key: bytes
    m: int
    edges: tuple
    suff: bool
    wermuth: bool
    nec: bool
    jacobian: Status
    rank_observed: int
    trials: int
    extension_certified: bool = False

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    @property
    def identifiable(self) -> bool:
        return self.jacobian is Status.IDENTIFIABLE

    def provenance(self) -> str:
        if self.identifiable:
            return "criteria" if self.suff else "jacobian"
        return "necessary" if not self.nec else "probable"

    def cache_entry(self) -> CacheEntry:
        return CacheEntry(self.identifiable, self.provenance())

    def csv_fields(self) -> list:
        return [self.key.hex(), self.m, " ".join(f"{a}>{b}" for a, b in self.edges),
                int(self.suff), int(self.wermuth), int(self.nec), self.jacobian.value,
                int(self.extension_certified)]


CSV_HEADER = ["key", "m", "edges", "suff", "wermuth", "nec", "jacobian", "extension"]


def check_row(row: ClassificationRow):
    if row.suff and not row.identifiable:
        raise ConsistencyError(f"odd-cycle criterion holds but Jacobian is deficient: {row.key.hex()} {row.edges}")
    if row.wermuth and not row.suff:
        raise ConsistencyError(f"Wermuth condition holds without the odd-cycle criterion: {row.key.hex()} {row.edges}")
    if not row.nec and row.identifiable:
        raise ConsistencyError(f"necessary condition fails but Jacobian is full rank: {row.key.hex()} {row.edges}")


def classify_graph(G: Dag, seed: int = DEFAULT_SEED, bound: int = DEFAULT_BOUND,
                   trials: int = DEFAULT_TRIALS) -> ClassificationRow:
    verdict = decide_generic_finite(G, seed=seed, bound=bound, trials=trials)
    row = ClassificationRow(
        key=canonical_key(G), m=G.m, edges=tuple(G.sorted_edges()),
        suff=sufficient_odd_cycle(G), wermuth=wermuth_condition(G),
        nec=necessary_condition(G).holds, jacobian=verdict.status,
        rank_observed=verdict.rank_observed, trials=verdict.trials)
    check_row(row)
    return row


def _classify_star(args):
    G, seed, bound, trials = args
    return classify_graph(G, seed, bound, trials)


def classify_graphs(graphs: Iterable[Dag], config: RunConfig) -> list[ClassificationRow]:
    jobs = [(G, config.seed, config.bound, config.trials) for G in graphs]
    if config.workers <= 1 or len(jobs) < 64:
        rows = [_classify_star(j) for j in jobs]
    else:
        chunk = max(1, len(jobs) // (config.workers * 8))
        with ProcessPoolExecutor(max_workers=config.workers) as ex:
            rows = list(ex.map(_classify_star, jobs, chunksize=chunk))
    return sorted(rows, key=lambda r: r.key)


def cache_from_rows(rows: Iterable[ClassificationRow]) -> dict[bytes, CacheEntry]:
    return {r.key: r.cache_entry() for r in rows}


@dataclass
class GapResult:
    gap_size: int
    extension_certified: int
    certified_keys: list
    disagreements: list  # non-identifiable graphs an extension chain claims to certify
    lower_gap_size: int
    uncertified_keys: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {"gap_size": self.gap_size, "extension_certified": self.extension_certified,
                "lower_gap_size": self.lower_gap_size,
                "certified_keys": [k.hex() for k in self.certified_keys],
                "disagreements": self.disagreements,
                "uncertified_keys": [k.hex() for k in self.uncertified_keys]}


def gap_analysis(m: int, rows: list[ClassificationRow], cache_lower: Mapping | None) -> tuple[GapResult, list[ClassificationRow]]:
    """Extension search from the lower gap graphs (identifiable, odd-cycle criterion fails).

    Returns the result and the rows with ``extension_certified`` filled in.
    Every graph without the odd-cycle certificate is searched, so a chain
    that claims a Jacobian-deficient graph shows up as a disagreement.
    """
    if cache_lower is None:
        raise MissingCache(f"verdict cache for m={m - 1} is required")
    lower = {k: as_cache_entry(v) for k, v in cache_lower.items()}
    ext_cache = {k: e for k, e in lower.items() if e.identifiable and e.provenance == "jacobian"}
    out_rows = []
    certified = []
    disagreements = []
    for r in rows:
        cert = None
        if not r.suff and ext_cache:
            G = make_dag(r.m, r.edges)
            cert = subgraph_extension(G, ext_cache, max_depth=1, use_odd_cycle=False)
            if cert is not None and not replay_certificate(G, cert, ext_cache):
                raise ConsistencyError(f"extension certificate failed to replay: {r.key.hex()}")
        ok = cert is not None
        if ok and not r.identifiable:
            disagreements.append({"key": r.key.hex(), "edges": [list(e) for e in r.edges],
                                  "jacobian": r.jacobian.value, "certificate": cert.to_json()})
        if ok and r.identifiable:
            certified.append(r.key)
        out_rows.append(ClassificationRow(**{**r.__dict__, "extension_certified": ok}))
    gap_rows = [r for r in out_rows if r.identifiable and not r.suff]
    uncertified = [r.key for r in gap_rows if not r.extension_certified]
    return GapResult(len(gap_rows), len(certified), certified, disagreements, len(ext_cache),
                     uncertified), out_rows


def summarize(rows: list[ClassificationRow], gap: GapResult | None = None) -> dict:
    ident = sum(r.identifiable for r in rows)
    report = {
        "total": len(rows),
        "identifiable": ident,
        "sufficient": sum(r.suff for r in rows),
        "wermuth": sum(r.wermuth for r in rows),
        "necessary_violated": sum(not r.nec for r in rows),
        "nonidentifiable": len(rows) - ident,
        "edge_bound_violated": sum(r.jacobian is Status.EDGE_BOUND_VIOLATED for r in rows),
        "probable_only_negatives": [r.key.hex() for r in rows if not r.identifiable and r.nec],
    }
    if gap is not None:
        report["gap"] = gap.gap_size
        report["extension_certified"] = gap.extension_certified
        report["lower_gap"] = gap.lower_gap_size
        report["extension_disagreements"] = gap.disagreements
        report["gap_uncertified"] = [k.hex() for k in gap.uncertified_keys]
    return report


def summary_line(report: dict) -> str:
    parts = [f"total={report['total']}", f"identifiable={report['identifiable']}",
             f"suff={report['sufficient']}", f"wermuth={report['wermuth']}",
             f"nec_violated={report['necessary_violated']}",
             f"nonidentifiable={report['nonidentifiable']}"]
    if "gap" in report:
        parts += [f"gap={report['gap']}", f"extension_certified={report['extension_certified']}"]
    return " ".join(parts)


@dataclass
class Classification:
    m: int
    rows: list
    report: dict
    gap: GapResult | None

    def csv_text(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for r in self.rows:
            w.writerow(r.csv_fields())
        return buf.getvalue()

    def cache_json(self) -> dict:
        return {r.key.hex(): {"status": r.jacobian.value, "provenance": r.provenance(),
                              "identifiable": r.identifiable} for r in self.rows}


def classify_all(m: int, config: RunConfig | None = None, cache_lower: Mapping | None = None,
                 with_gap: bool = True) -> Classification:
    """Classify every unlabeled DAG on m nodes under the edge bound.

    When ``with_gap`` is set and no lower cache is given, m-1 is classified
    first to supply it.
    """
    config = config or RunConfig()
    if not 1 <= m <= MAX_ENUM_NODES:
        raise TooLarge(f"classification supports 1 <= m <= {MAX_ENUM_NODES}")
    graphs = enumerate_unlabeled_dags(m)
    log.info("m=%d: %d unlabeled DAGs", m, len(graphs))
    rows = classify_graphs(graphs, config)
    gap = None
    if with_gap and m >= 2:
        if cache_lower is None:
            lower_rows = classify_graphs(enumerate_unlabeled_dags(m - 1), config)
            cache_lower = cache_from_rows(lower_rows)
        gap, rows = gap_analysis(m, rows, cache_lower)
    return Classification(m, rows, summarize(rows, gap), gap)


def load_cache(path: Path) -> dict[bytes, CacheEntry]:
    try:
        raw = json.loads(Path(path).read_text())
    except OSError as e:
        raise MissingCache(f"cannot read cache {path}: {e.strerror}") from None
    except json.JSONDecodeError as e:
        raise ParseError(f"cache {path} is not JSON: {e.msg}", e.lineno) from None
    if not isinstance(raw, dict):
        raise ParseError(f"cache {path} must be a JSON object")
    try:
        return {bytes.fromhex(k): as_cache_entry(v) for k, v in raw.items()}
    except (TypeError, ValueError) as e:
        raise ParseError(f"bad cache file {path}: {e}") from None


def write_outputs(result: Classification, output_dir: Path) -> list[Path]:
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    table_path = output_dir / "table1.json"
    table = json.loads(table_path.read_text()) if table_path.exists() else {}
    table[str(result.m)] = result.report
    table = {k: table[k] for k in sorted(table, key=int)}
    table_path.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    csv_path = output_dir / f"graphs_m{result.m}.csv"
    csv_path.write_text(result.csv_text())
    cache_path = output_dir / f"cache_m{result.m}.json"
    cache_path.write_text(json.dumps(result.cache_json(), indent=1, sort_keys=True) + "\n")
    return [table_path, csv_path, cache_path]


def all_labeled_dags(m: int, edge_limit: int | None = None) -> list[Dag]:
    """Every labeled DAG on m nodes with at most edge_limit edges, in any labeling."""
    limit = max_edges(m) if edge_limit is None else edge_limit
    pairs = list(itertools.combinations(range(1, m + 1), 2))
    out = []
    for k in range(0, min(limit, len(pairs)) + 1):
        for es in itertools.combinations(pairs, k):
            out.extend(acyclic_orientations(UGraph(m, frozenset(es))))
    return out


def markov_homogeneity(m: int, seed: int = DEFAULT_SEED, bound: int = DEFAULT_BOUND,
                       trials: int = DEFAULT_TRIALS) -> tuple[int, int, list[dict]]:
    """Check that Jacobian verdicts are constant on Markov-equivalence classes.

    Returns (number of labeled DAGs, number of classes, disagreeing classes).
    Verdicts are cached per canonical key since they are isomorphism invariant.
    """
    classes: dict[tuple, list] = {}
    graphs = all_labeled_dags(m)
    for G in graphs:
        classes.setdefault(markov_class_key(G), []).append(G)
    verdicts: dict[bytes, Status] = {}

    def status(G):
        k = canonical_key(G)
        if k not in verdicts:
            verdicts[k] = decide_generic_finite(G, seed=seed, bound=bound, trials=trials).status
        return verdicts[k]

    bad = []
    for members in classes.values():
        seen = {repr(G.sorted_edges()): status(G) for G in members}
        if len(set(seen.values())) > 1:
            bad.append({k: v.value for k, v in seen.items()})
    return len(graphs), len(classes), bad
