"""Conditional-independence decision procedures.

Two interchangeable testers drive detection and structure search: a Gaussian
partial-correlation test on two-slice data (Fisher z, effective sample size
n - |z| - 3) and an exact d-separation oracle on a known model, used to
verify the algorithms independently of sampling noise.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np
from scipy.stats import norm

from .differencing import TwoSliceDataset
from .model import ColumnRef, Dbcm, Role, VariableId

#: Condition-number threshold beyond which a query is numerically meaningless.
CONDITION_LIMIT = 1e10


class Decision(enum.Enum):
    INDEPENDENT = "independent"
    DEPENDENT = "dependent"


class DegenerateConditioning(Exception):
    """The conditioning covariance is near-singular; no usable statistic."""


@dataclass(frozen=True)
class CiQuery:
    """Is x independent of y given the set z, at significance alpha?"""

    x: ColumnRef
    y: ColumnRef
    z: frozenset[ColumnRef] = frozenset()
    alpha: float = 0.01

    def __post_init__(self) -> None:
        if self.x == self.y:
            raise ValueError("query variables must differ")
        if self.x in self.z or self.y in self.z:
            raise ValueError("query variables may not appear in the conditioning set")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        object.__setattr__(self, "z", frozenset(self.z))


class FisherZTester:
    """Partial-correlation CI test over a fixed two-slice table.

    The correlation matrix of the full column set is built once; each query
    solves a small submatrix.  Degenerate conditioning is decided as
    Dependent (keeping the edge) and recorded in ``warnings``.
    """

    def __init__(self, table: TwoSliceDataset, alpha: float = 0.01):
        self.table = table
        self.alpha = alpha
        self.n = table.n_rows
        self._index = {c: i for i, c in enumerate(table.columns)}
        sd = table.values.std(axis=0, ddof=1)
        self._degenerate_cols = sd <= 0
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.corrcoef(table.values, rowvar=False)
        self._corr = np.atleast_2d(corr)
        self.warnings: list[str] = []
        self.n_degenerate = 0

    @property
    def columns(self) -> tuple[ColumnRef, ...]:
        return self.table.columns

    def partial_correlation(self, q: CiQuery) -> float:
        """Correlation of x and y with the linear effect of z removed."""
        idx = [self._index[q.x], self._index[q.y]]
        idx += sorted(self._index[c] for c in q.z)
        if self.n <= len(q.z) + 3:
            raise ValueError(
                f"need more than |z| + 3 = {len(q.z) + 3} rows, have {self.n}"
            )
        if any(self._degenerate_cols[i] for i in idx):
            raise DegenerateConditioning("constant column in query")
        if not q.z:
            return float(np.clip(self._corr[idx[0], idx[1]], -1.0, 1.0))
        sub = self._corr[np.ix_(idx, idx)]
        if not np.all(np.isfinite(sub)) or np.linalg.cond(sub) > CONDITION_LIMIT:
            raise DegenerateConditioning(
                f"near-singular conditioning covariance for {q.x}, {q.y}"
            )
        prec = np.linalg.inv(sub)
        r = -prec[0, 1] / math.sqrt(prec[0, 0] * prec[1, 1])
        return float(np.clip(r, -1.0, 1.0))

    def decide(self, q: CiQuery) -> Decision:
        """Fisher z-test of the partial correlation, two-sided at q.alpha."""
        try:
            r = self.partial_correlation(q)
        except DegenerateConditioning as exc:
            # Deleting edges on numerically meaningless tests is the riskier
            # error, so degenerate queries keep the dependence.
            self.n_degenerate += 1
            if self.n_degenerate <= 5:
                self.warnings.append(f"degenerate conditioning treated as dependent: {exc}")
            return Decision.DEPENDENT
        if abs(r) >= 1.0:
            return Decision.DEPENDENT
        dof = self.n - len(q.z) - 3
        stat = math.sqrt(dof) * abs(math.atanh(r))
        crit = norm.isf(q.alpha / 2.0)
        return Decision.DEPENDENT if stat > crit else Decision.INDEPENDENT


def partial_correlation(data: TwoSliceDataset, q: CiQuery) -> float:
    """One-shot functional form of FisherZTester.partial_correlation."""
    return FisherZTester(data, q.alpha).partial_correlation(q)


def ci_test(data: TwoSliceDataset, q: CiQuery) -> Decision:
    """One-shot functional form of FisherZTester.decide."""
    return FisherZTester(data, q.alpha).decide(q)


# ---------------------------------------------------------------------------
# Exact oracle on a known model


class UnrolledGraph:
    """The two-slice directed graph implied by a Dbcm.

    Nodes are (variable, slice) pairs.  Contemporaneous edges repeat in both
    slices; every integral node V of order j gets cross-temporal parents
    V (slice 0) and d^(j+1) V (slice 0).
    """

    def __init__(self, model: Dbcm):
        self.model = model
        nodes: list[ColumnRef] = [(v, s) for v in model.variables for s in (0, 1)]
        self._id = {n: i for i, n in enumerate(nodes)}
        self.nodes = tuple(nodes)
        n = len(nodes)
        parents: list[list[int]] = [[] for _ in range(n)]
        children: list[list[int]] = [[] for _ in range(n)]

        def add(src: ColumnRef, dst: ColumnRef) -> None:
            i, j = self._id[src], self._id[dst]
            parents[j].append(i)
            children[i].append(j)

        for a, b in sorted(model.edges):
            add((a, 0), (b, 0))
            add((a, 1), (b, 1))
        for v, role in model.roles:
            if role is Role.INTEGRAL:
                add((v, 0), (v, 1))
                add((v.diff(), 0), (v, 1))
        self._parents = [tuple(p) for p in parents]
        self._children = [tuple(c) for c in children]

    def has_node(self, node: ColumnRef) -> bool:
        return node in self._id

    def d_separated(self, xs: Iterable[ColumnRef], ys: Iterable[ColumnRef],
                    zs: Iterable[ColumnRef]) -> bool:
        """True iff every path between xs and ys is blocked given zs."""
        try:
            x_ids = {self._id[x] for x in xs}
            y_ids = {self._id[y] for y in ys}
            z_ids = {self._id[z] for z in zs}
        except KeyError as exc:
            raise KeyError(f"unknown node {exc.args[0]}") from None
        if x_ids & y_ids:
            return False

        # Ancestors of the conditioning set, for collider activation.
        z_anc = set(z_ids)
        stack = list(z_ids)
        while stack:
            v = stack.pop()
            for p in self._parents[v]:
                if p not in z_anc:
                    z_anc.add(p)
                    stack.append(p)

        # Reachability with direction-tagged states (ball travelling up to
        # parents or down to children).
        queue: deque[tuple[int, bool]] = deque()
        visited: set[tuple[int, bool]] = set()
        for x in x_ids:
            queue.append((x, True))
        while queue:
            v, up = queue.popleft()
            if (v, up) in visited:
                continue
            visited.add((v, up))
            if v not in z_ids and v in y_ids:
                return False
            if up:
                if v not in z_ids:
                    for p in self._parents[v]:
                        queue.append((p, True))
                    for c in self._children[v]:
                        queue.append((c, False))
            else:
                if v not in z_ids:
                    for c in self._children[v]:
                        queue.append((c, False))
                if v in z_anc:
                    for p in self._parents[v]:
                        queue.append((p, True))
        return True


def d_separation(model: Dbcm, x: Iterable[ColumnRef] | ColumnRef,
                 y: Iterable[ColumnRef] | ColumnRef,
                 z: Iterable[ColumnRef] = ()) -> bool:
    """d-separation of node sets in the model unrolled over two slices."""

    def as_set(v) -> set[ColumnRef]:
        if isinstance(v, tuple) and len(v) == 2 and isinstance(v[0], VariableId):
            return {v}
        return set(v)

    return UnrolledGraph(model).d_separated(as_set(x), as_set(y), as_set(z))


class OracleTester:
    """Perfect-independence tester backed by d-separation on a known model.

    Queries that reference columns with no counterpart node in the model
    (differences beyond a variable's true prime order) are answered
    Dependent: no separation can be certified through them, which preserves
    the search's correctness for the real nodes.
    """

    def __init__(self, model: Dbcm):
        self.model = model
        self.graph = UnrolledGraph(model)
        self.warnings: list[str] = []
        self.n_queries = 0

    @property
    def base_variables(self) -> tuple[VariableId, ...]:
        return self.model.base_variables()

    def decide(self, q: CiQuery) -> Decision:
        self.n_queries += 1
        cols = [q.x, q.y, *q.z]
        if not all(self.graph.has_node(c) for c in cols):
            return Decision.DEPENDENT
        sep = self.graph.d_separated({q.x}, {q.y}, q.z)
        return Decision.INDEPENDENT if sep else Decision.DEPENDENT
