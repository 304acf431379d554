import numpy as np
import pytest

from dbcl import (CiQuery, Decision, DetectionConfig, OracleTester, Role,
                  ShoParams, VariableId, detect_primes, simulate_sho)

from conftest import random_chain_model


class CountingOracle:
    """Oracle wrapper recording the highest order queried per variable."""

    def __init__(self, model):
        self.inner = OracleTester(model)
        self.max_order: dict[str, int] = {}

    @property
    def base_variables(self):
        return self.inner.base_variables

    def decide(self, q: CiQuery) -> Decision:
        xv, yv = q.x[0], q.y[0]
        if xv.name == yv.name and xv.order == yv.order:
            prev = self.max_order.get(xv.name, -1)
            self.max_order[xv.name] = max(prev, xv.order)
        return self.inner.decide(q)


def test_sho_roles_with_oracle(sho_truth):
    det = detect_primes(None, DetectionConfig(), OracleTester(sho_truth))
    roles = det.role_map
    assert roles[VariableId("x")] is Role.INTEGRAL
    assert roles[VariableId("x", 1)] is Role.INTEGRAL
    assert roles[VariableId("x", 2)] is Role.PRIME
    for name in ("F_x", "F_v", "m"):
        assert roles[VariableId(name)] is Role.STATIC
    assert det.retained == frozenset({VariableId("x", 1), VariableId("x", 2)})
    assert det.warnings == ()


def test_sho_roles_from_data():
    data, _ = simulate_sho(ShoParams(seed=5))
    det = detect_primes(data, DetectionConfig(), _data_tester(data))
    assert det.order_map == {"F_v": 0, "F_x": 0, "m": 0, "x": 2}


def _data_tester(data, k_max=3, alpha=0.01):
    from dbcl import FisherZTester, build_two_slice
    return FisherZTester(build_two_slice(data, k_max), alpha)


def test_white_noise_is_static():
    rng = np.random.default_rng(0)
    from dbcl import TimeSeriesDataset
    arr = rng.standard_normal((3000, 2))
    data = TimeSeriesDataset((VariableId("u"), VariableId("w")),
                             (("t0", arr),))
    det = detect_primes(data, DetectionConfig(), _data_tester(data))
    assert det.order_map == {"u": 0, "w": 0}
    assert det.retained == frozenset()


def test_kmax_below_true_order_reports_unresolved(sho_truth):
    cfg = DetectionConfig(k_max=1)
    det = detect_primes(None, cfg, OracleTester(sho_truth))
    assert det.order_map["x"] is None
    assert det.role_map[VariableId("x")] is Role.UNRESOLVED
    assert any("x" in w for w in det.warnings)
    # unresolved variables keep their differences up to k_max, flagged
    assert VariableId("x", 1) in det.retained


def test_search_is_monotone_no_queries_above_found_order(sho_truth):
    counter = CountingOracle(sho_truth)
    detect_primes(None, DetectionConfig(), counter)
    assert counter.max_order["x"] == 2
    for name in ("F_x", "F_v", "m"):
        assert counter.max_order[name] == 0


def test_data_too_short_raises():
    from dbcl import TimeSeriesDataset
    arr = np.zeros((4, 1))
    data = TimeSeriesDataset((VariableId("u"),), (("t0", arr),))
    with pytest.raises(ValueError):
        detect_primes(data, DetectionConfig(k_max=3), _data_tester(data, 0))


@pytest.mark.parametrize("seed", range(30))
def test_oracle_detection_matches_truth_on_random_models(seed):
    rng = np.random.default_rng(1000 + seed)
    model = random_chain_model(rng)
    det = detect_primes(None, DetectionConfig(), OracleTester(model))
    true_orders = {
        v.name: 0 for v, r in model.roles if r is Role.STATIC
    }
    true_orders.update(model.chain_orders())
    assert det.order_map == true_orders
    # retained set is exactly the union of detected chains
    expect = {
        VariableId(name, j)
        for name, order in model.chain_orders().items()
        for j in range(1, order + 1)
    }
    assert det.retained == frozenset(expect)
