"""Detection of latent derivative chains.

For each base variable the search looks for the smallest difference order
whose value at time t can be rendered independent of its value at t+1 by
conditioning on slice-1 columns.  That order is the variable's prime; all
lower differences are integral members of its chain, and order 0 means the
variable carries no dynamics of its own (static).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Protocol, Sequence

from .citest import CiQuery, Decision
from .model import ColumnRef, Role, TimeSeriesDataset, VariableId


class CiTester(Protocol):
    """Anything that can decide conditional-independence queries."""

    def decide(self, q: CiQuery) -> Decision: ...


@dataclass(frozen=True)
class DetectionConfig:
    """Search budget: maximum difference order, significance, conditioning cap."""

    k_max: int = 3
    alpha: float = 0.01
    max_cond_size: int = 3

    def __post_init__(self) -> None:
        if self.k_max < 0:
            raise ValueError("k_max must be >= 0")
        if not 0 < self.alpha < 1:
            raise ValueError("alpha must lie in (0, 1)")
        if self.max_cond_size < 0:
            raise ValueError("max_cond_size must be >= 0")


@dataclass(frozen=True)
class DetectionResult:
    """Role assignment plus the retained difference set feeding structure search."""

    roles: tuple[tuple[VariableId, Role], ...]
    retained: frozenset[VariableId]
    resolved_orders: tuple[tuple[str, int | None], ...]
    warnings: tuple[str, ...] = ()

    @property
    def role_map(self) -> dict[VariableId, Role]:
        return dict(self.roles)

    @property
    def order_map(self) -> dict[str, int | None]:
        return dict(self.resolved_orders)

    def chain_nodes(self) -> tuple[VariableId, ...]:
        """All nodes of resolved chains plus bases of unresolved variables."""
        return tuple(v for v, _ in self.roles)


def _independent_given_some_subset(test: CiTester, x0: ColumnRef, x1: ColumnRef,
                                   pool: Sequence[ColumnRef], alpha: float,
                                   max_cond_size: int) -> bool:
    """Subset search in increasing cardinality, lexicographic, first hit wins."""
    candidates = [c for c in pool if c != x1]
    for size in range(min(max_cond_size, len(candidates)) + 1):
        for subset in itertools.combinations(candidates, size):
            q = CiQuery(x0, x1, frozenset(subset), alpha)
            if test.decide(q) is Decision.INDEPENDENT:
                return True
    return False


def detect_primes(data: TimeSeriesDataset | None, cfg: DetectionConfig,
                  test: CiTester) -> DetectionResult:
    """Assign Static/Integral/Prime roles by iterative derivative search.

    The candidate conditioning pool at round k holds the slice-1 columns of
    all base variables plus retained differences of order <= k; it is fixed
    for the whole round and pruned between rounds.  Variables whose chain is
    not certified within k_max come back Unresolved with a warning, never
    promoted by fiat.
    """
    if data is not None:
        base_vars = sorted(v.base for v in data.variables)
        min_len = min(arr.shape[0] for _, arr in data.trajectories)
        if min_len <= cfg.k_max + 1:
            raise ValueError(
                f"trajectories of length {min_len} are too short for "
                f"k_max={cfg.k_max}"
            )
    else:
        base_vars = sorted(test.base_variables)  # type: ignore[attr-defined]
    if len(set(base_vars)) != len(base_vars):
        raise ValueError("duplicate base variables")

    retained = {
        VariableId(v.name, j) for v in base_vars for j in range(1, cfg.k_max + 1)
    }
    resolved: dict[str, int] = {}
    warnings: list[str] = []

    for k in range(cfg.k_max + 1):
        unresolved = [v for v in base_vars if v.name not in resolved]
        if not unresolved:
            break
        pool: list[ColumnRef] = [(v, 1) for v in base_vars]
        pool += [(d, 1) for d in sorted(retained) if d.order <= k]
        pool.sort()
        newly: dict[str, int] = {}
        for v in unresolved:
            for i in range(min(k, cfg.k_max) + 1):
                node = VariableId(v.name, i)
                if _independent_given_some_subset(
                    test, (node, 0), (node, 1), pool, cfg.alpha, cfg.max_cond_size
                ):
                    newly[v.name] = i
                    break
        # Retained-set update is the synchronization point between rounds.
        resolved.update(newly)
        for name, order in newly.items():
            retained -= {d for d in retained if d.name == name and d.order > order}

    roles: dict[VariableId, Role] = {}
    orders: list[tuple[str, int | None]] = []
    for v in base_vars:
        order = resolved.get(v.name)
        orders.append((v.name, order))
        if order is None:
            roles[v] = Role.UNRESOLVED
            warnings.append(
                f"no prime order found for {v.name} within k_max={cfg.k_max}; "
                "variable kept chainless"
            )
        elif order == 0:
            roles[v] = Role.STATIC
        else:
            for j in range(order):
                roles[VariableId(v.name, j)] = Role.INTEGRAL
            roles[VariableId(v.name, order)] = Role.PRIME

    final_retained = set()
    for v in base_vars:
        order = resolved.get(v.name)
        if order is None:
            final_retained |= {d for d in retained if d.name == v.name}
        else:
            final_retained |= {VariableId(v.name, j) for j in range(1, order + 1)}
    return DetectionResult(
        roles=tuple(sorted(roles.items())),
        retained=frozenset(final_retained),
        resolved_orders=tuple(orders),
        warnings=tuple(warnings),
    )
