"""Core domain types: variables, datasets, two-slice causal models, patterns.

All types are immutable value objects after construction and safe to share
across concurrent tasks.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np


class Role(enum.Enum):
    """Causal role of a node in a two-slice dynamic model.

    STATIC nodes have no cross-temporal parents or children.  INTEGRAL nodes
    are fixed across time by the integration identity V[t+1] = V[t] + dV[t]
    and can only have outgoing contemporaneous edges.  PRIME nodes are the
    highest difference of an integration chain.  UNRESOLVED marks a variable
    whose chain could not be certified within the search budget.
    """

    STATIC = "static"
    INTEGRAL = "integral"
    PRIME = "prime"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True, order=True)
class VariableId:
    """A base variable or one of its forward differences.

    ``order`` 0 is the observed variable itself, n >= 1 its n-th difference.
    The (name, order) pair is the identity; string tokens like ``d2.x`` are
    only a serialization convenience.
    """

    name: str
    order: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be nonempty")
        if "." in self.name:
            raise ValueError(f"variable name may not contain '.': {self.name!r}")
        if self.order < 0:
            raise ValueError("difference order must be >= 0")

    def token(self) -> str:
        return self.name if self.order == 0 else f"d{self.order}.{self.name}"

    @staticmethod
    def parse(token: str) -> "VariableId":
        head, sep, rest = token.partition(".")
        if sep and head[:1] == "d" and head[1:].isdigit():
            return VariableId(rest, int(head[1:]))
        return VariableId(token, 0)

    def diff(self, n: int = 1) -> "VariableId":
        return VariableId(self.name, self.order + n)

    @property
    def base(self) -> "VariableId":
        return VariableId(self.name, 0)

    def __repr__(self) -> str:  # compact in test failure output
        return f"V({self.token()})"


#: A column of a two-slice table: a variable at slice 0 (time t) or 1 (t+1).
ColumnRef = tuple[VariableId, int]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Ordered multivariate observations over one or more independent runs.

    Every trajectory is a (n_steps, n_variables) array whose columns follow
    ``variables`` in order; rows are consecutive time steps separated by
    ``sampling_interval``.
    """

    variables: tuple[VariableId, ...]
    trajectories: tuple[tuple[str, np.ndarray], ...]
    sampling_interval: float = 1.0

    def __post_init__(self) -> None:
        if self.sampling_interval <= 0:
            raise ValueError("sampling_interval must be > 0")
        if len({v for v in self.variables}) != len(self.variables):
            raise ValueError("duplicate variable ids in dataset")
        if not self.trajectories:
            raise ValueError("dataset needs at least one trajectory")
        frozen = []
        seen_ids = set()
        for traj_id, values in self.trajectories:
            if traj_id in seen_ids:
                raise ValueError(f"duplicate trajectory id {traj_id!r}")
            seen_ids.add(traj_id)
            arr = _readonly(np.asarray(values, dtype=float))
            if arr.ndim != 2 or arr.shape[1] != len(self.variables):
                raise ValueError(
                    f"trajectory {traj_id!r} must be 2-d with "
                    f"{len(self.variables)} columns, got shape {arr.shape}"
                )
            if arr.shape[0] < 2:
                raise ValueError(f"trajectory {traj_id!r} needs >= 2 rows")
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"trajectory {traj_id!r} contains non-finite values")
            frozen.append((traj_id, arr))
        object.__setattr__(self, "trajectories", tuple(frozen))

    @property
    def n_rows(self) -> int:
        return sum(arr.shape[0] for _, arr in self.trajectories)

    def column(self, var: VariableId) -> int:
        return self.variables.index(var)


@dataclass(frozen=True)
class LinearEquation:
    """Linear structural equation: value = intercept + sum(c_i * parent_i) + noise."""

    coefficients: tuple[tuple[VariableId, float], ...]
    noise_sd: float
    intercept: float = 0.0

    @staticmethod
    def build(coefficients: Mapping[VariableId, float], noise_sd: float,
              intercept: float = 0.0) -> "LinearEquation":
        items = tuple(sorted(coefficients.items()))
        return LinearEquation(items, float(noise_sd), float(intercept))

    @property
    def coeff_map(self) -> dict[VariableId, float]:
        return dict(self.coefficients)


@dataclass(frozen=True)
class Dbcm:
    """A two-slice dynamic causal model with difference-based cross links.

    ``roles`` assigns a Role to every node (base variables plus difference
    nodes of integration chains).  ``edges`` holds directed contemporaneous
    edges only; cross-temporal structure is implied by the roles: every
    INTEGRAL node V of order j satisfies V[t+1] = V[t] + dV[t].  ``equations``
    (optional, simulation models only) give linear-Gaussian equations for
    every non-integral node.
    """

    roles: tuple[tuple[VariableId, Role], ...]
    edges: frozenset[tuple[VariableId, VariableId]]
    equations: tuple[tuple[VariableId, LinearEquation], ...] = ()

    @staticmethod
    def build(roles: Mapping[VariableId, Role],
              edges: Iterable[tuple[VariableId, VariableId]],
              equations: Mapping[VariableId, LinearEquation] | None = None) -> "Dbcm":
        eqs = tuple(sorted((equations or {}).items())) if equations else ()
        return Dbcm(tuple(sorted(roles.items())), frozenset(edges), eqs)

    @property
    def variables(self) -> tuple[VariableId, ...]:
        return tuple(v for v, _ in self.roles)

    @property
    def role_map(self) -> dict[VariableId, Role]:
        return dict(self.roles)

    @property
    def equation_map(self) -> dict[VariableId, LinearEquation]:
        return dict(self.equations)

    def role(self, v: VariableId) -> Role:
        for var, role in self.roles:
            if var == v:
                return role
        raise KeyError(v)

    def chain_orders(self) -> dict[str, int]:
        """Map base-variable name -> prime order, for every integration chain."""
        return {v.name: v.order for v, r in self.roles if r is Role.PRIME}

    def prime_of(self, base: VariableId) -> VariableId | None:
        order = self.chain_orders().get(base.name)
        return None if order is None else VariableId(base.name, order)

    def base_variables(self) -> tuple[VariableId, ...]:
        return tuple(v for v, _ in self.roles if v.order == 0)

    def integral_nodes(self) -> frozenset[VariableId]:
        return frozenset(v for v, r in self.roles if r is Role.INTEGRAL)

    def parents(self, v: VariableId) -> frozenset[VariableId]:
        return frozenset(a for a, b in self.edges if b == v)

    def children(self, v: VariableId) -> frozenset[VariableId]:
        return frozenset(b for a, b in self.edges if a == v)

    def chain_links(self) -> frozenset[tuple[VariableId, VariableId]]:
        """Cross-temporal links d^j X (slice 0) -> d^(j-1) X (slice 1)."""
        links = set()
        for name, order in self.chain_orders().items():
            for j in range(1, order + 1):
                links.add((VariableId(name, j), VariableId(name, j - 1)))
        return frozenset(links)


def _has_cycle(nodes: Iterable[VariableId],
               edges: Iterable[tuple[VariableId, VariableId]]) -> bool:
    children: dict[VariableId, list[VariableId]] = {v: [] for v in nodes}
    indeg = {v: 0 for v in children}
    for a, b in edges:
        children[a].append(b)
        indeg[b] += 1
    queue = [v for v, d in indeg.items() if d == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen != len(children)


def validate_dbcm(model: Dbcm) -> list[str]:
    """Check all structural invariants; return one message per violation.

    Violations are data, not failures: an empty list means the model is a
    well-formed acyclic difference-based model.
    """

    violations: list[str] = []
    roles = model.role_map
    nodes = set(roles)

    # Chain bookkeeping: a prime of order p needs integral members 0..p-1,
    # statics sit at order 0, and difference nodes only exist inside chains.
    primes_per_base: dict[str, list[int]] = {}
    for v, r in model.roles:
        if r is Role.PRIME:
            primes_per_base.setdefault(v.name, []).append(v.order)
            if v.order < 1:
                violations.append(f"prime node {v.token()} must have order >= 1")
            for j in range(v.order):
                member = VariableId(v.name, j)
                if roles.get(member) is not Role.INTEGRAL:
                    violations.append(
                        f"chain of {v.name} lacks integral member at order {j}"
                    )
        elif r is Role.INTEGRAL:
            nxt = v.diff()
            if roles.get(nxt) not in (Role.INTEGRAL, Role.PRIME):
                violations.append(
                    f"integral node {v.token()} has no higher chain member"
                )
        elif r is Role.STATIC:
            if v.order != 0:
                violations.append(f"static role on difference node {v.token()}")
        else:
            violations.append(f"unresolved role is not valid in a ground-truth model: {v.token()}")
    for name, orders in primes_per_base.items():
        if len(orders) > 1:
            violations.append(f"variable {name} has multiple primes: {sorted(orders)}")

    integral = {v for v, r in roles.items() if r is Role.INTEGRAL}
    for a, b in sorted(model.edges):
        if a not in nodes or b not in nodes:
            violations.append(f"edge {a.token()}->{b.token()} references unknown node")
            continue
        if a == b:
            violations.append(f"self edge on {a.token()}")
        if b in integral:
            violations.append(
                f"edge {a.token()}->{b.token()} points into integral node {b.token()}"
            )
        if a in integral and b in integral:
            violations.append(
                f"edge between two integral nodes: {a.token()}--{b.token()}"
            )
    if _has_cycle(nodes, model.edges):
        violations.append("contemporaneous edge set has a cycle")

    if model.equations:
        eqs = model.equation_map
        for v in sorted(nodes):
            r = roles[v]
            if r is Role.INTEGRAL:
                if v in eqs:
                    violations.append(
                        f"integral node {v.token()} must not carry an equation"
                    )
            elif v not in eqs:
                violations.append(f"non-integral node {v.token()} lacks an equation")
        for v, eq in model.equations:
            if eq.noise_sd < 0:
                violations.append(f"negative noise sd on {v.token()}")
            eq_parents = {p for p, c in eq.coefficients if c != 0.0}
            edge_parents = model.parents(v)
            if eq_parents != edge_parents:
                violations.append(
                    f"equation parents of {v.token()} disagree with edges: "
                    f"{sorted(p.token() for p in eq_parents)} vs "
                    f"{sorted(p.token() for p in edge_parents)}"
                )
    return violations


@dataclass(frozen=True)
class Edge:
    """A contemporaneous pattern edge; undirected edges are canonicalized a <= b."""

    a: VariableId
    b: VariableId
    directed: bool

    @staticmethod
    def between(a: VariableId, b: VariableId, directed: bool) -> "Edge":
        if not directed and b < a:
            a, b = b, a
        return Edge(a, b, directed)


@dataclass(frozen=True)
class PatternGraph:
    """Partially directed contemporaneous graph plus cross-temporal chain links.

    The equivalence-class output of structure search: directed edges are
    compelled orientations, undirected edges are unresolved within the class.
    ``chain_links`` are the cross-temporal integral links (drawn dashed on
    export); learners that do not model cross-temporal structure leave them
    empty.
    """

    roles: tuple[tuple[VariableId, Role], ...]
    edges: frozenset[Edge]
    chain_links: frozenset[tuple[VariableId, VariableId]] = frozenset()
    warnings: tuple[str, ...] = ()

    @staticmethod
    def build(roles: Mapping[VariableId, Role], edges: Iterable[Edge],
              chain_links: Iterable[tuple[VariableId, VariableId]] = (),
              warnings: Iterable[str] = ()) -> "PatternGraph":
        return PatternGraph(tuple(sorted(roles.items())), frozenset(edges),
                            frozenset(chain_links), tuple(warnings))

    @property
    def nodes(self) -> tuple[VariableId, ...]:
        return tuple(v for v, _ in self.roles)

    @property
    def role_map(self) -> dict[VariableId, Role]:
        return dict(self.roles)

    def adjacent(self, a: VariableId, b: VariableId) -> bool:
        return self.mark(a, b) is not None

    def mark(self, a: VariableId, b: VariableId) -> str | None:
        """Return '->', '<-' or '--' for the edge between a and b, else None."""
        for e in self.edges:
            if {e.a, e.b} == {a, b}:
                if not e.directed:
                    return "--"
                return "->" if e.a == a else "<-"
        return None

    def neighbors(self, v: VariableId) -> frozenset[VariableId]:
        out = set()
        for e in self.edges:
            if e.a == v:
                out.add(e.b)
            elif e.b == v:
                out.add(e.a)
        return frozenset(out)

    def directed_parents(self, v: VariableId) -> frozenset[VariableId]:
        return frozenset(e.a for e in self.edges if e.directed and e.b == v)

    def detected_order(self, base_name: str) -> int | None:
        """Prime order assigned to a base variable; None when unresolved."""
        role = None
        prime_order = None
        for v, r in self.roles:
            if v.name != base_name:
                continue
            if v.order == 0:
                role = r
            if r is Role.PRIME:
                prime_order = v.order
        if role is Role.UNRESOLVED:
            return None
        if prime_order is not None:
            return prime_order
        if role is None:
            raise KeyError(base_name)
        return 0

    def vstructures(self) -> frozenset[tuple[VariableId, VariableId, VariableId]]:
        """All unshielded colliders (a, c, b) with directed a->c<-b, sorted a < b."""
        out = set()
        for c in self.nodes:
            parents = sorted(self.directed_parents(c))
            for i, a in enumerate(parents):
                for b in parents[i + 1:]:
                    if not self.adjacent(a, b):
                        out.add((a, c, b))
        return frozenset(out)


def validate_pattern(g: PatternGraph) -> list[str]:
    """Structural invariants of a DBCM-constrained pattern."""
    violations: list[str] = []
    roles = g.role_map
    integral = {v for v, r in roles.items() if r is Role.INTEGRAL}
    for e in sorted(g.edges, key=lambda e: (e.a, e.b)):
        if e.a not in roles or e.b not in roles:
            violations.append(f"edge references unknown node: {e.a.token()},{e.b.token()}")
            continue
        if e.a in integral and e.b in integral:
            violations.append(
                f"edge between integral nodes {e.a.token()}--{e.b.token()}"
            )
        if e.a in integral and not e.directed:
            violations.append(f"undirected edge at integral node {e.a.token()}")
        if e.b in integral:
            if not e.directed:
                violations.append(f"undirected edge at integral node {e.b.token()}")
            else:
                violations.append(
                    f"edge {e.a.token()}->{e.b.token()} points into integral node"
                )
    directed = [(e.a, e.b) for e in g.edges if e.directed]
    if _has_cycle(set(roles), directed):
        violations.append("directed subgraph has a cycle")
    return violations
