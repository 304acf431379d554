"""Contemporaneous structure search under difference-model constraints.

A stable constraint-based skeleton phase (level-synchronous edge removal,
conditioning only on current neighbors) followed by orientation: edges at
integral nodes point outward, unshielded colliders are read off the
separating sets, and the standard three propagation rules close the pattern.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .citest import CiQuery, Decision, FisherZTester
from .differencing import TwoSliceDataset, build_two_slice
from .model import (ColumnRef, Dbcm, Edge, PatternGraph, Role,
                    TimeSeriesDataset, VariableId)
from .primes import CiTester, DetectionConfig, DetectionResult, detect_primes

#: Pair -> conditioning set that separated it during skeleton search.
SepsetTable = dict[frozenset[VariableId], frozenset[VariableId]]


def pc_skeleton(columns: Sequence[ColumnRef], test: CiTester, alpha: float,
                max_cond_size: int,
                forbidden: Iterable[frozenset[ColumnRef]] = ()
                ) -> tuple[dict[ColumnRef, set[ColumnRef]],
                           dict[frozenset[ColumnRef], frozenset[ColumnRef]]]:
    """Stable skeleton search over arbitrary columns.

    Starts from the complete graph minus forbidden pairs; at each cardinality
    level, candidate conditioning sets come from the adjacency snapshot taken
    at the level start and deletions apply only after the level, so the
    result does not depend on column order.
    """
    cols = sorted(set(columns))
    forbidden_set = {frozenset(p) for p in forbidden}
    adj: dict[ColumnRef, set[ColumnRef]] = {c: set() for c in cols}
    for a, b in itertools.combinations(cols, 2):
        if frozenset((a, b)) not in forbidden_set:
            adj[a].add(b)
            adj[b].add(a)
    sepsets: dict[frozenset[ColumnRef], frozenset[ColumnRef]] = {}

    for level in range(max_cond_size + 1):
        snapshot = {c: sorted(adj[c]) for c in cols}
        if all(len(snapshot[a]) - 1 < level for a in cols):
            break
        removals: list[tuple[ColumnRef, ColumnRef, frozenset[ColumnRef]]] = []
        for a, b in itertools.combinations(cols, 2):
            if b not in adj[a]:
                continue
            found: frozenset[ColumnRef] | None = None
            cand_a = [c for c in snapshot[a] if c != b]
            if len(cand_a) >= level:
                for subset in itertools.combinations(cand_a, level):
                    q = CiQuery(a, b, frozenset(subset), alpha)
                    if test.decide(q) is Decision.INDEPENDENT:
                        found = frozenset(subset)
                        break
            if found is None:
                cand_b = [c for c in snapshot[b] if c != a]
                seen = set(cand_a)
                if len(cand_b) >= level:
                    for subset in itertools.combinations(cand_b, level):
                        if all(c in seen for c in subset):
                            continue  # already tested from a's side
                        q = CiQuery(a, b, frozenset(subset), alpha)
                        if test.decide(q) is Decision.INDEPENDENT:
                            found = frozenset(subset)
                            break
            if found is not None:
                removals.append((a, b, found))
        for a, b, sep in removals:
            adj[a].discard(b)
            adj[b].discard(a)
            sepsets[frozenset((a, b))] = sep
    return adj, sepsets


def learn_skeleton(nodes: Sequence[VariableId], roles: Mapping[VariableId, Role],
                   test: CiTester, alpha: float, max_cond_size: int
                   ) -> tuple[set[frozenset[VariableId]], SepsetTable]:
    """Skeleton over slice-1 columns; integral-integral pairs are never tested."""
    for v in nodes:
        if v not in roles:
            raise ValueError(f"no role for node {v.token()}")
    integral = {v for v in nodes if roles[v] is Role.INTEGRAL}
    cols = [(v, 1) for v in sorted(nodes)]
    forbidden = [
        frozenset(((a, 1), (b, 1)))
        for a, b in itertools.combinations(sorted(integral), 2)
    ]
    adj, sepsets = pc_skeleton(cols, test, alpha, max_cond_size, forbidden)
    edges = {
        frozenset((a[0], b[0]))
        for a in cols for b in adj[a] if a < b
    }
    table: SepsetTable = {
        frozenset(c[0] for c in pair): frozenset(c[0] for c in sep)
        for pair, sep in sepsets.items()
    }
    return edges, table


# ---------------------------------------------------------------------------
# Orientation


def _meek_closure(pdag: dict[VariableId, dict[VariableId, str]],
                  frozen: set[frozenset[VariableId]]) -> None:
    """Apply the three propagation rules to a fixpoint, in place."""

    def orient(u: VariableId, w: VariableId) -> bool:
        if frozenset((u, w)) in frozen or pdag[u][w] != "-":
            return False
        pdag[u][w] = ">"
        pdag[w][u] = "<"
        return True

    changed = True
    while changed:
        changed = False
        for b in sorted(pdag):
            parents = [a for a in sorted(pdag[b]) if pdag[b][a] == "<"]
            undirected = [c for c in sorted(pdag[b]) if pdag[b][c] == "-"]
            children = [c for c in sorted(pdag[b]) if pdag[b][c] == ">"]
            # Rule 1: a -> b - c with a, c non-adjacent: orient b -> c,
            # otherwise a new unshielded collider would appear at b.
            for a in parents:
                for c in undirected:
                    if c not in pdag[a]:
                        changed |= orient(b, c)
            # Rule 2: a -> b -> c with a - c: orient a -> c to stay acyclic.
            for a in parents:
                for c in children:
                    if pdag[a].get(c) == "-":
                        changed |= orient(a, c)
            # Rule 3: a - b with a - c -> b and a - d -> b, c, d non-adjacent.
            for a in undirected:
                into_b = [p for p in parents if pdag[a].get(p) == "-"]
                stop = False
                for i, c in enumerate(into_b):
                    for d in into_b[i + 1:]:
                        if d not in pdag[c]:
                            changed |= orient(a, b)
                            stop = True
                            break
                    if stop:
                        break


def _directed_cycle(pdag: dict[VariableId, dict[VariableId, str]]
                    ) -> list[VariableId] | None:
    """Return one directed cycle as a node list, or None."""
    color: dict[VariableId, int] = {}
    stack: list[VariableId] = []

    def visit(v: VariableId) -> list[VariableId] | None:
        color[v] = 1
        stack.append(v)
        for w in sorted(pdag[v]):
            if pdag[v][w] != ">":
                continue
            if color.get(w, 0) == 1:
                return stack[stack.index(w):] + [w]
            if color.get(w, 0) == 0:
                found = visit(w)
                if found:
                    return found
        color[v] = 2
        stack.pop()
        return None

    for v in sorted(pdag):
        if color.get(v, 0) == 0:
            found = visit(v)
            if found:
                return found
    return None


def _orient_pdag(nodes: Sequence[VariableId],
                 skeleton: Iterable[frozenset[VariableId]],
                 integral: Iterable[VariableId],
                 vstructures: Iterable[tuple[VariableId, VariableId, VariableId]],
                 ) -> tuple[frozenset[Edge], list[str]]:
    """Shared orientation engine: integral rule, colliders, propagation."""
    warnings: list[str] = []
    pdag: dict[VariableId, dict[VariableId, str]] = {v: {} for v in nodes}
    for pair in skeleton:
        a, b = sorted(pair)
        pdag[a][b] = "-"
        pdag[b][a] = "-"

    integral_set = set(integral)
    hard: set[frozenset[VariableId]] = set()
    for u in sorted(integral_set):
        for w in sorted(pdag[u]):
            if w in integral_set:
                if u < w:
                    warnings.append(
                        f"edge between integral nodes {u.token()}--{w.token()} "
                        "left undirected"
                    )
                continue
            pdag[u][w] = ">"
            pdag[w][u] = "<"
            hard.add(frozenset((u, w)))

    frozen: set[frozenset[VariableId]] = set()
    for a, c, b in sorted(vstructures):
        for parent in (a, b):
            pair = frozenset((parent, c))
            mark = pdag[parent].get(c)
            if mark is None:
                continue  # collider endpoints must be adjacent to c
            if pair in frozen:
                continue
            if mark == ">":
                continue
            if mark == "<":
                if pair in hard:
                    warnings.append(
                        f"collider {parent.token()}->{c.token()} conflicts with "
                        "integral orientation; integral direction kept"
                    )
                else:
                    pdag[parent][c] = "-"
                    pdag[c][parent] = "-"
                    frozen.add(pair)
                    warnings.append(
                        f"conflicting collider orientations on "
                        f"{parent.token()}--{c.token()}; edge left undirected"
                    )
                continue
            pdag[parent][c] = ">"
            pdag[c][parent] = "<"

    _meek_closure(pdag, frozen)

    # Safety net: statistical errors can in principle compel a directed cycle;
    # undirecting a non-integral edge on the cycle restores the invariant.
    while True:
        cycle = _directed_cycle(pdag)
        if cycle is None:
            break
        fixed = False
        for u, w in zip(cycle, cycle[1:]):
            if frozenset((u, w)) not in hard:
                pdag[u][w] = "-"
                pdag[w][u] = "-"
                frozen.add(frozenset((u, w)))
                warnings.append(
                    f"directed cycle detected; edge {u.token()}--{w.token()} "
                    "left undirected"
                )
                fixed = True
                break
        if not fixed:  # cycle through integral-compelled edges cannot happen
            warnings.append("unresolvable directed cycle")
            break

    edges = set()
    for a in pdag:
        for b, mark in pdag[a].items():
            if mark == ">":
                edges.add(Edge.between(a, b, True))
            elif mark == "-" and a < b:
                edges.add(Edge.between(a, b, False))
    return frozenset(edges), warnings


def collider_candidates(skeleton: Iterable[frozenset[VariableId]],
                        sepsets: SepsetTable
                        ) -> list[tuple[VariableId, VariableId, VariableId]]:
    """Unshielded triples a - c - b whose separating set excludes c."""
    adj: dict[VariableId, set[VariableId]] = {}
    for pair in skeleton:
        a, b = sorted(pair)
        adj.setdefault(a, set()).add(b)
        adj.setdefault(b, set()).add(a)
    out = []
    for c in sorted(adj):
        for a, b in itertools.combinations(sorted(adj[c]), 2):
            if b in adj[a]:
                continue
            sep = sepsets.get(frozenset((a, b)))
            if sep is None:
                continue  # never-tested pair: roles already settle direction
            if c not in sep:
                out.append((a, c, b))
    return out


def orient(skeleton: Iterable[frozenset[VariableId]], sepsets: SepsetTable,
           roles: Mapping[VariableId, Role]) -> PatternGraph:
    """Orient a learned skeleton into a pattern graph.

    Every edge at an integral node leaves it; unshielded colliders whose
    separating set excludes the middle node become v-structures; the
    propagation rules then run to a fixpoint.  Orientation conflicts are
    reported and left undirected rather than silently overwritten.
    """
    skeleton = set(skeleton)
    nodes = sorted(roles)
    integral = [v for v in nodes if roles[v] is Role.INTEGRAL]
    vstructs = collider_candidates(skeleton, sepsets)
    edges, warnings = _orient_pdag(nodes, skeleton, integral, vstructs)
    return PatternGraph.build(roles, edges, warnings=warnings)


def chain_links_from_roles(roles: Mapping[VariableId, Role]
                           ) -> frozenset[tuple[VariableId, VariableId]]:
    links = set()
    for v, r in roles.items():
        if r is Role.PRIME:
            for j in range(1, v.order + 1):
                links.add((VariableId(v.name, j), VariableId(v.name, j - 1)))
    return frozenset(links)


def dbcm_pattern(model: Dbcm) -> PatternGraph:
    """The model's own maximally oriented pattern under difference constraints.

    This is the target the learner aims for: true adjacencies, true
    unshielded colliders, integral edges outgoing, propagation closure, plus
    the cross-temporal chain links implied by the roles.
    """
    roles = model.role_map
    skeleton = {frozenset((a, b)) for a, b in model.edges}
    integral = [v for v, r in roles.items() if r is Role.INTEGRAL]
    vstructs = []
    for c in model.variables:
        parents = sorted(model.parents(c))
        for a, b in itertools.combinations(parents, 2):
            if (a, b) in model.edges or (b, a) in model.edges:
                continue
            vstructs.append((a, c, b))
    edges, warnings = _orient_pdag(sorted(roles), skeleton, integral, vstructs)
    return PatternGraph.build(roles, edges,
                              chain_links=chain_links_from_roles(roles),
                              warnings=warnings)


def learn_dbcm(data: TimeSeriesDataset | None, cfg: DetectionConfig,
               test: CiTester | None = None) -> PatternGraph:
    """Full pipeline: detect chains, learn the slice-1 structure, attach links.

    With ``test`` omitted a Fisher-z tester is built from the two-slice table
    of ``data``; passing an exact oracle makes every step exact.  Unresolved
    variables stay in the graph chainless, flagged in the warnings.
    """
    if test is None:
        if data is None:
            raise ValueError("either data or a tester must be provided")
        table = build_two_slice(data, cfg.k_max)
        test = FisherZTester(table, cfg.alpha)

    det = detect_primes(data, cfg, test)
    roles = det.role_map
    edges, sepsets = learn_skeleton(sorted(roles), roles, test,
                                    cfg.alpha, cfg.max_cond_size)
    pattern = orient(edges, sepsets, roles)

    warnings = list(det.warnings) + list(pattern.warnings)
    n_degenerate = getattr(test, "n_degenerate", 0)
    if n_degenerate:
        warnings.append(
            f"{n_degenerate} degenerate conditioning queries treated as dependent"
        )
    return PatternGraph.build(roles, pattern.edges,
                              chain_links=chain_links_from_roles(roles),
                              warnings=warnings)
