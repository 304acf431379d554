import numpy as np
import pytest

from dbcl import Dbcm, LinearEquation, Role, ShoParams, VariableId, sho_model


@pytest.fixture(scope="session")
def sho_truth() -> Dbcm:
    return sho_model(ShoParams())


@pytest.fixture(scope="session")
def decay_model() -> Dbcm:
    """First-order self-regulating toy: dx := -lam * x + noise."""
    x = VariableId("x")
    d1 = x.diff()
    roles = {x: Role.INTEGRAL, d1: Role.PRIME}
    equations = {d1: LinearEquation.build({x: -0.3}, 0.1)}
    return Dbcm.build(roles, {(x, d1)}, equations)


def random_chain_model(rng: np.random.Generator, max_chains: int = 3,
                       max_order: int = 3, max_static: int = 5,
                       density: float = 0.3):
    """Shared generator config for randomized structure suites."""
    from dbcl import random_dbcm

    chains = [int(rng.integers(1, max_order + 1))
              for _ in range(int(rng.integers(1, max_chains + 1)))]
    n_static = int(rng.integers(2, max_static + 1))
    return random_dbcm(n_static, chains, edge_density=density, seed=rng,
                       require_stable=False)
