"""Scoring learned patterns against ground truth, baselines, batch benchmarks.

The five error percentages: detected prime order too low / too high (over
chain-bearing true variables; unresolved counts as low), and edges deleted /
added / incorrectly oriented, all relative to the edge count of the truth's
own maximally oriented pattern.  Cross-temporal chain links are part of the
edge universe, so learners that do not model them pay for it in deletions.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np

from .citest import FisherZTester
from .differencing import build_two_slice
from .model import Dbcm, Edge, PatternGraph, Role, TimeSeriesDataset, VariableId
from .primes import CiTester, DetectionConfig
from .structure import collider_candidates, dbcm_pattern, learn_dbcm, pc_skeleton, _orient_pdag
from . import simulate as sim

#: Edge keys: ("c", frozenset of tokens) contemporaneous, ("t", src, dst) chain.
EdgeKey = tuple


@dataclass(frozen=True)
class EvalReport:
    """Five error percentages plus the per-variable / per-edge detail."""

    pct_delta_low: float
    pct_delta_hi: float
    pct_e_del: float
    pct_e_add: float
    pct_o_err: float
    variable_orders: tuple[tuple[str, int | None, int | None], ...] = ()
    deleted_edges: tuple[str, ...] = ()
    added_edges: tuple[str, ...] = ()
    misoriented_edges: tuple[str, ...] = ()

    def as_row(self) -> tuple[float, float, float, float, float]:
        return (self.pct_delta_low, self.pct_delta_hi, self.pct_e_del,
                self.pct_e_add, self.pct_o_err)

    def to_dict(self) -> dict:
        return {
            "pct_delta_low": self.pct_delta_low,
            "pct_delta_hi": self.pct_delta_hi,
            "pct_e_del": self.pct_e_del,
            "pct_e_add": self.pct_e_add,
            "pct_o_err": self.pct_o_err,
            "variable_orders": [
                {"name": n, "true_order": t, "detected_order": d}
                for n, t, d in self.variable_orders
            ],
            "deleted_edges": list(self.deleted_edges),
            "added_edges": list(self.added_edges),
            "misoriented_edges": list(self.misoriented_edges),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "EvalReport":
        return EvalReport(
            d["pct_delta_low"], d["pct_delta_hi"], d["pct_e_del"],
            d["pct_e_add"], d["pct_o_err"],
            tuple((v["name"], v["true_order"], v["detected_order"])
                  for v in d.get("variable_orders", ())),
            tuple(d.get("deleted_edges", ())),
            tuple(d.get("added_edges", ())),
            tuple(d.get("misoriented_edges", ())),
        )


def _edge_keys(g: PatternGraph) -> dict[EdgeKey, str]:
    """Edge universe with display labels."""
    keys: dict[EdgeKey, str] = {}
    for e in g.edges:
        key = ("c", frozenset((e.a.token(), e.b.token())))
        arrow = "->" if e.directed else "--"
        keys[key] = f"{e.a.token()}{arrow}{e.b.token()}"
    for src, dst in g.chain_links:
        keys[("t", src.token(), dst.token())] = f"chain:{src.token()}->{dst.token()}"
    return keys


def compare(learned: PatternGraph, truth: Dbcm) -> EvalReport:
    """Score a learned pattern against the truth's own pattern."""
    truth_bases = {v.name for v in truth.base_variables()}
    learned_bases = {v.name for v, _ in learned.roles if v.order == 0}
    if truth_bases != learned_bases:
        missing = sorted(truth_bases - learned_bases)
        extra = sorted(learned_bases - truth_bases)
        raise ValueError(
            f"base variable sets differ: missing from learned {missing}, "
            f"not in truth {extra}"
        )

    truth_pat = dbcm_pattern(truth)
    t_keys = _edge_keys(truth_pat)
    l_keys = _edge_keys(learned)
    n_true = len(t_keys)
    denom = max(n_true, 1)

    deleted = sorted(t_keys[k] for k in t_keys.keys() - l_keys.keys())
    added = sorted(l_keys[k] for k in l_keys.keys() - t_keys.keys())
    misoriented = []
    for key in t_keys.keys() & l_keys.keys():
        if key[0] != "c":
            continue
        pair = sorted(key[1])
        a = VariableId.parse(pair[0])
        b = VariableId.parse(pair[1])
        if truth_pat.mark(a, b) != learned.mark(a, b):
            misoriented.append(
                f"{a.token()}{learned.mark(a, b)}{b.token()} "
                f"(pattern: {truth_pat.mark(a, b)})"
            )
    misoriented.sort()

    chain_vars = sorted(
        (v.name, order) for v, r in truth.roles
        if r is Role.PRIME for order in [v.order]
    )
    var_rows = []
    low = hi = 0
    for name, true_order in chain_vars:
        detected = learned.detected_order(name)
        var_rows.append((name, true_order, detected))
        if detected is None or detected < true_order:
            low += 1
        elif detected > true_order:
            hi += 1
    n_chain = max(len(chain_vars), 1)

    return EvalReport(
        pct_delta_low=100.0 * low / n_chain,
        pct_delta_hi=100.0 * hi / n_chain,
        pct_e_del=100.0 * len(deleted) / denom,
        pct_e_add=100.0 * len(added) / denom,
        pct_o_err=100.0 * len(misoriented) / denom,
        variable_orders=tuple(var_rows),
        deleted_edges=tuple(deleted),
        added_edges=tuple(added),
        misoriented_edges=tuple(misoriented),
    )


# ---------------------------------------------------------------------------
# PC baselines: precalculated differences, no difference-model constraints


def _baseline_detect(adj: Mapping, base_vars: Sequence[VariableId],
                     k_max: int) -> dict[str, int | None]:
    """Prime = lowest difference order not adjacent to itself in the future."""
    orders: dict[str, int | None] = {}
    for v in base_vars:
        orders[v.name] = None
        for i in range(k_max + 1):
            node = VariableId(v.name, i)
            if (node, 1) not in adj[(node, 0)]:
                orders[v.name] = i
                break
    return orders


def _roles_from_orders(orders: Mapping[str, int | None],
                       extra_nodes: Sequence[VariableId]) -> dict[VariableId, Role]:
    roles: dict[VariableId, Role] = {}
    for name, order in orders.items():
        base = VariableId(name)
        if order is None:
            roles[base] = Role.UNRESOLVED
        elif order == 0:
            roles[base] = Role.STATIC
        else:
            for j in range(order):
                roles[VariableId(name, j)] = Role.INTEGRAL
            roles[VariableId(name, order)] = Role.PRIME
    for v in extra_nodes:
        roles.setdefault(v, Role.STATIC)
    return roles


def baseline_pc(data: TimeSeriesDataset, variant: int, cfg: DetectionConfig,
                test: CiTester | None = None) -> PatternGraph:
    """Constraint-based baseline over precalculated differences.

    Variant 1 runs one pass over the full two-slice table (all differences up
    to k_max, both slices), reads primes off self-adjacency across slices,
    and reports the slice-1 structure of that same pass over all columns.
    Variant 2 relearns from scratch on the slice-1 columns of the base
    variables plus the detected chains.  Neither imposes difference-model
    constraints: no forbidden pairs, no outgoing-edge rule, no cross-temporal
    links.
    """
    if variant not in (1, 2):
        raise ValueError("variant must be 1 or 2")
    if test is None:
        table = build_two_slice(data, cfg.k_max)
        test = FisherZTester(table, cfg.alpha)
    base_vars = sorted(v.base for v in data.variables)
    all_vars = [VariableId(v.name, j) for v in base_vars
                for j in range(cfg.k_max + 1)]
    cols = [(v, s) for v in sorted(all_vars) for s in (0, 1)]

    adj, sepsets = pc_skeleton(cols, test, cfg.alpha, cfg.max_cond_size)
    orders = _baseline_detect(adj, base_vars, cfg.k_max)

    if variant == 1:
        nodes = sorted(all_vars)
        skeleton = {
            frozenset((a, b))
            for a, b in itertools.combinations(nodes, 2)
            if (b, 1) in adj[(a, 1)]
        }
        pair_seps = {
            frozenset((a, b)): sepsets.get(frozenset(((a, 1), (b, 1))))
            for a, b in itertools.combinations(nodes, 2)
        }
    else:
        kept = [v for v in all_vars
                if v.order == 0 or (orders[v.name] or 0) >= v.order]
        cols2 = [(v, 1) for v in sorted(kept)]
        adj2, seps2 = pc_skeleton(cols2, test, cfg.alpha, cfg.max_cond_size)
        nodes = sorted(kept)
        skeleton = {
            frozenset((a, b))
            for a, b in itertools.combinations(nodes, 2)
            if (b, 1) in adj2[(a, 1)]
        }
        pair_seps = {
            frozenset((a, b)): seps2.get(frozenset(((a, 1), (b, 1))))
            for a, b in itertools.combinations(nodes, 2)
        }

    sep_table = {
        pair: frozenset(c[0] for c in sep)
        for pair, sep in pair_seps.items() if sep is not None
    }
    vstructs = collider_candidates(skeleton, sep_table)
    edges, warnings = _orient_pdag(nodes, skeleton, integral=[], vstructures=vstructs)
    roles = _roles_from_orders(orders, nodes)
    roles = {v: r for v, r in roles.items() if v in set(nodes) or v.order == 0}
    return PatternGraph.build(roles, edges, chain_links=(), warnings=warnings)


# ---------------------------------------------------------------------------
# Batch benchmarks


@dataclass(frozen=True)
class BenchmarkSpec:
    """Everything needed to reproduce a batch run deterministically."""

    system: str = "sho"
    n_datasets: int = 20
    steps: int = 5000
    seed: int = 0
    learners: tuple[str, ...] = ("dbcl", "pc1", "pc2")
    alpha: float = 0.01
    k_max: int = 3
    max_cond_size: int = 3
    sim_params: tuple[tuple[str, object], ...] = ()

    def __post_init__(self) -> None:
        if self.system not in ("sho", "coupled-sho", "random"):
            raise ValueError(f"unknown system {self.system!r}")
        if self.n_datasets < 1:
            raise ValueError("n_datasets must be >= 1")
        bad = set(self.learners) - set(_LEARNERS)
        if bad:
            raise ValueError(f"unknown learners: {sorted(bad)}")
        object.__setattr__(self, "learners", tuple(self.learners))
        object.__setattr__(self, "sim_params",
                           tuple(sorted(dict(self.sim_params).items())))

    @property
    def config(self) -> DetectionConfig:
        return DetectionConfig(self.k_max, self.alpha, self.max_cond_size)

    def to_dict(self) -> dict:
        return {
            "system": self.system, "n_datasets": self.n_datasets,
            "steps": self.steps, "seed": self.seed,
            "learners": list(self.learners), "alpha": self.alpha,
            "k_max": self.k_max, "max_cond_size": self.max_cond_size,
            "sim_params": dict(self.sim_params),
        }

    @staticmethod
    def from_dict(d: Mapping) -> "BenchmarkSpec":
        return BenchmarkSpec(
            system=d.get("system", "sho"),
            n_datasets=d.get("n_datasets", 20),
            steps=d.get("steps", 5000),
            seed=d.get("seed", 0),
            learners=tuple(d.get("learners", ("dbcl", "pc1", "pc2"))),
            alpha=d.get("alpha", 0.01),
            k_max=d.get("k_max", 3),
            max_cond_size=d.get("max_cond_size", 3),
            sim_params=tuple(d.get("sim_params", {}).items()),
        )


def _generate(spec: BenchmarkSpec, index: int, child_seed: int
              ) -> tuple[TimeSeriesDataset, Dbcm]:
    params = dict(spec.sim_params)
    if spec.system == "sho":
        p = sim.ShoParams(steps=spec.steps, seed=child_seed, **params)
        return sim.simulate_sho(p)
    if spec.system == "coupled-sho":
        for key in ("mass_mean", "spring_k", "damping_b", "initial_x", "initial_v"):
            if key in params:
                params[key] = tuple(params[key])
        p = sim.CoupledShoParams(steps=spec.steps, seed=child_seed, **params)
        return sim.simulate_coupled_sho(p)
    rng = np.random.default_rng(child_seed)
    model = sim.random_dbcm(
        n_static=int(params.get("n_static", 3)),
        chains=tuple(params.get("chains", (2,))),
        edge_density=float(params.get("edge_density", 0.3)),
        seed=rng,
        max_parents=int(params.get("max_parents", 3)),
    )
    data = sim.sample_dbcm(model, spec.steps, rng)
    return data, model


_LEARNERS: dict[str, Callable] = {
    "dbcl": lambda data, cfg: learn_dbcm(data, cfg),
    "pc1": lambda data, cfg: baseline_pc(data, 1, cfg),
    "pc2": lambda data, cfg: baseline_pc(data, 2, cfg),
}


@dataclass(frozen=True)
class BenchmarkResult:
    spec: BenchmarkSpec
    reports: tuple[tuple[int, str, EvalReport], ...]
    failures: tuple[tuple[int, str, str], ...]

    def mean_row(self, learner: str) -> tuple[float, float, float, float, float]:
        rows = [r.as_row() for i, name, r in self.reports if name == learner]
        if not rows:
            raise ValueError(f"no successful runs for learner {learner!r}")
        return tuple(float(np.mean(col)) for col in zip(*rows))

    def aggregate(self) -> dict[str, dict[str, float]]:
        out = {}
        for learner in self.spec.learners:
            try:
                low, hi, edel, eadd, oerr = self.mean_row(learner)
            except ValueError:
                continue
            out[learner] = {
                "pct_delta_low": low, "pct_delta_hi": hi, "pct_e_del": edel,
                "pct_e_add": eadd, "pct_o_err": oerr,
                "n_datasets": sum(1 for _, n, _ in self.reports if n == learner),
                "n_failures": sum(1 for _, n, _ in self.failures if n == learner),
            }
        return out


def run_benchmark(spec: BenchmarkSpec, out_dir: str | Path | None = None
                  ) -> BenchmarkResult:
    """Generate datasets, run every learner, score, optionally persist.

    Deterministic given the spec: dataset i always sees the same child seed.
    Individual failures are recorded and excluded from the means.
    """
    ss = np.random.SeedSequence(spec.seed)
    children = ss.spawn(spec.n_datasets)
    reports: list[tuple[int, str, EvalReport]] = []
    failures: list[tuple[int, str, str]] = []
    for i in range(spec.n_datasets):
        child_seed = int(children[i].generate_state(1)[0])
        data, truth = _generate(spec, i, child_seed)
        for learner in spec.learners:
            try:
                g = _LEARNERS[learner](data, spec.config)
                reports.append((i, learner, compare(g, truth)))
            except Exception as exc:  # scored batch: record and continue
                failures.append((i, learner, f"{type(exc).__name__}: {exc}"))
    result = BenchmarkResult(spec, tuple(reports), tuple(failures))
    if out_dir is not None:
        persist_benchmark(result, Path(out_dir))
    return result


def persist_benchmark(result: BenchmarkResult, out_dir: Path) -> None:
    run_dir = out_dir / f"{result.spec.system}-seed{result.spec.seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "spec.json").write_text(
        json.dumps(result.spec.to_dict(), indent=2, sort_keys=True) + "\n"
    )
    for i, learner, report in result.reports:
        ds_dir = run_dir / f"ds{i:03d}"
        ds_dir.mkdir(exist_ok=True)
        (ds_dir / f"{learner}.json").write_text(
            json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
        )
    agg = result.aggregate()
    payload = {
        "aggregate": agg,
        "failures": [
            {"dataset": i, "learner": L, "error": msg}
            for i, L, msg in result.failures
        ],
    }
    (run_dir / "aggregate.json").write_text(
        json.dumps(payload, indent=2, sort_keys=True) + "\n"
    )
    lines = ["learner,pct_delta_low,pct_delta_hi,pct_e_del,pct_e_add,pct_o_err"]
    for learner, row in agg.items():
        lines.append(
            f"{learner},{row['pct_delta_low']!r},{row['pct_delta_hi']!r},"
            f"{row['pct_e_del']!r},{row['pct_e_add']!r},{row['pct_o_err']!r}"
        )
    (run_dir / "aggregate.csv").write_text("\n".join(lines) + "\n")


def format_table(rows: Mapping[str, Mapping[str, float]]) -> str:
    """Aligned text table mirroring the benchmark column order."""
    headers = ["learner", "%d_low", "%d_hi", "%e_del", "%e_add", "%o_err"]
    body = []
    for learner, row in rows.items():
        body.append([
            learner,
            f"{row['pct_delta_low']:.2f}", f"{row['pct_delta_hi']:.2f}",
            f"{row['pct_e_del']:.2f}", f"{row['pct_e_add']:.2f}",
            f"{row['pct_o_err']:.2f}",
        ])
    widths = [max(len(h), *(len(r[i]) for r in body)) if body else len(h)
              for i, h in enumerate(headers)]
    def fmt(cells):
        return "  ".join(c.rjust(w) for c, w in zip(cells, widths))
    return "\n".join([fmt(headers)] + [fmt(r) for r in body])
