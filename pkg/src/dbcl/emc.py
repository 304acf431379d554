"""Manipulation-safety classification on learned patterns.

Whether manipulating an equilibrated variable commutes with equilibration
depends on two graph facts that survive in the equivalence class: whether a
variable is a parent of its own prime (self-regulating), and whether its
feedback set is empty, decided by checking that every contemporaneous path
to the prime passes through a v-structure whose three nodes all lie on the
path.
"""

from __future__ import annotations

from dataclasses import dataclass

from .model import PatternGraph, Role, VariableId


def _prime_node(g: PatternGraph, x: VariableId) -> VariableId:
    order = g.detected_order(x.name)
    if order is None or order == 0:
        raise ValueError(f"{x.name} has no prime variable in this pattern")
    return VariableId(x.name, order)


def is_self_regulating(g: PatternGraph, x: VariableId) -> bool:
    """True iff the pattern has an edge (any mark) between x and its prime."""
    return g.adjacent(x.base, _prime_node(g, x))


def _vstructure_node_sets(g: PatternGraph) -> list[frozenset[VariableId]]:
    return [frozenset((a, c, b)) for a, c, b in g.vstructures()]


def _all_simple_paths(g: PatternGraph, src: VariableId, dst: VariableId
                      ) -> list[list[VariableId]]:
    """Every simple path between src and dst, ignoring edge marks."""
    nbrs = {v: sorted(g.neighbors(v)) for v in g.nodes}
    paths: list[list[VariableId]] = []
    stack: list[VariableId] = [src]
    on_path = {src}

    def walk(v: VariableId) -> None:
        if v == dst:
            paths.append(list(stack))
            return
        for w in nbrs[v]:
            if w in on_path:
                continue
            stack.append(w)
            on_path.add(w)
            walk(w)
            stack.pop()
            on_path.discard(w)

    walk(src)
    return paths


def all_paths_collider_blocked(g: PatternGraph, src: VariableId,
                               dst: VariableId) -> bool:
    """Every path between src and dst carries an in-path v-structure.

    A path qualifies when some v-structure of the pattern (only edges with a
    determined direction count) has all three of its nodes on the path.
    """
    vsets = _vstructure_node_sets(g)
    for path in _all_simple_paths(g, src, dst):
        nodes = frozenset(path)
        if not any(vs <= nodes for vs in vsets):
            return False
    return True


def is_contemporaneous_ancestor(g: PatternGraph, src: VariableId,
                                dst: VariableId) -> bool:
    """Decide from the pattern whether src is an ancestor of dst.

    Identifiable only for sources all of whose edges leave them (integral
    chain members): then a directed path src ~> dst exists in the underlying
    graph exactly when some contemporaneous path lacks an in-path
    v-structure.
    """
    roles = g.role_map
    if src not in roles or dst not in roles:
        raise KeyError(f"unknown node {src.token()} or {dst.token()}")
    for nbr in g.neighbors(src):
        if g.mark(src, nbr) != "->":
            raise ValueError(
                f"{src.token()} has a non-outgoing edge; ancestry is only "
                "identifiable for all-outgoing (integral) sources"
            )
    if src == dst:
        return False
    return not all_paths_collider_blocked(g, src, dst)


def feedback_empty(g: PatternGraph, x: VariableId) -> bool:
    """True iff no instantaneous descendant of x feeds back into its prime."""
    prime = _prime_node(g, x)
    return all_paths_collider_blocked(g, x.base, prime)


@dataclass(frozen=True)
class EmcEntry:
    variable: VariableId
    self_regulating: bool
    feedback_empty: bool

    @property
    def classification(self) -> str:
        if self.self_regulating:
            return "emc-safe"
        if not self.feedback_empty:
            return "emc-violation-possible"
        return "feedback-empty"


@dataclass(frozen=True)
class EmcReport:
    """Per chain-bearing variable: the two conditions and their verdict."""

    entries: tuple[EmcEntry, ...]

    def entry(self, name: str) -> EmcEntry:
        for e in self.entries:
            if e.variable.name == name:
                return e
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            e.variable.name: {
                "self_regulating": e.self_regulating,
                "feedback_empty": e.feedback_empty,
                "classification": e.classification,
            }
            for e in self.entries
        }


def emc_report(g: PatternGraph) -> EmcReport:
    """Classify manipulation safety for every chain-bearing variable."""
    entries = []
    for v, r in g.roles:
        if v.order != 0:
            continue
        order = g.detected_order(v.name)
        if order is None or order == 0:
            continue
        entries.append(EmcEntry(
            variable=v,
            self_regulating=is_self_regulating(g, v),
            feedback_empty=feedback_empty(g, v),
        ))
    return EmcReport(tuple(entries))
