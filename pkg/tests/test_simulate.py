import numpy as np
import pytest
from scipy.linalg import solve_discrete_lyapunov

from dbcl import (CoupledShoParams, Role, ShoParams, VariableId, random_dbcm,
                  sample_dbcm, simulate_coupled_sho, simulate_sho,
                  spectral_radius, validate_dbcm)
from dbcl.simulate import linearize, sho_model


def test_zero_noise_at_origin_stays_at_equilibrium():
    p = ShoParams(noise_sd=0.0, initial_x=0.0, initial_v=0.0, steps=50)
    data, model = simulate_sho(p)
    (_, arr), = data.trajectories
    cols = {v.name: i for i, v in enumerate(data.variables)}
    assert np.allclose(arr[:, cols["x"]], 0.0)
    assert np.allclose(arr[:, cols["F_x"]], 0.0)
    assert np.allclose(arr[:, cols["F_v"]], 0.0)
    assert np.allclose(arr[:, cols["m"]], p.mass_mean)


def test_same_seed_is_bit_identical():
    a, _ = simulate_sho(ShoParams(seed=123, steps=500))
    b, _ = simulate_sho(ShoParams(seed=123, steps=500))
    assert np.array_equal(a.trajectories[0][1], b.trajectories[0][1])
    c, _ = simulate_sho(ShoParams(seed=124, steps=500))
    assert not np.array_equal(a.trajectories[0][1], c.trajectories[0][1])


def test_unstable_parameters_rejected_at_construction():
    with pytest.raises(ValueError, match="unstable"):
        ShoParams(damping_b=0.0)  # explicit update diverges without damping
    with pytest.raises(ValueError, match="unstable"):
        ShoParams(dt=3.0)


def test_default_sho_is_stable_and_bounded_over_many_seeds():
    """Stability oracle (eigenvalues) plus an empirical bound, 100 seeds."""
    rho = spectral_radius(sho_model(ShoParams()))
    assert rho < 1.0
    peak = 0.0
    for seed in range(100):
        data, _ = simulate_sho(ShoParams(seed=seed, steps=5000))
        x_col = data.variables.index(VariableId("x"))
        peak = max(peak, float(np.max(np.abs(data.trajectories[0][1][:, x_col]))))
    assert peak < 50.0


def test_sho_truth_validates(sho_truth):
    assert validate_dbcm(sho_truth) == []


def test_coupled_zero_coupling_gives_independent_blocks():
    p = CoupledShoParams(coupling_k=0.0, seed=3, steps=20000)
    data, model = simulate_coupled_sho(p)
    names = [v.name for v in data.variables]
    assert "F_c" not in names  # no coupling force node at zero coupling
    (_, arr), = data.trajectories
    x1 = arr[:, names.index("x1")]
    x2 = arr[:, names.index("x2")]
    assert abs(np.corrcoef(x1, x2)[0, 1]) < 0.05


def test_coupled_symmetric_zero_noise_blocks_move_identically():
    p = CoupledShoParams(noise_sd=0.0, initial_x=(0.7, 0.7),
                         initial_v=(0.1, 0.1), steps=400, seed=0)
    data, _ = simulate_coupled_sho(p)
    names = [v.name for v in data.variables]
    (_, arr), = data.trajectories
    x1 = arr[:, names.index("x1")]
    x2 = arr[:, names.index("x2")]
    assert np.allclose(x1, x2)
    assert np.allclose(arr[:, names.index("F_c")], 0.0)


def test_coupled_bounded_over_seeds():
    assert spectral_radius(
        __import__("dbcl").coupled_sho_model(CoupledShoParams())) < 1.0
    for seed in range(20):
        data, _ = simulate_coupled_sho(CoupledShoParams(seed=seed, steps=5000))
        (_, arr), = data.trajectories
        assert np.max(np.abs(arr)) < 100.0


def test_random_dbcm_empty_case():
    m = random_dbcm(n_static=3, chains=[], edge_density=0.0, seed=1)
    assert validate_dbcm(m) == []
    assert m.edges == frozenset()
    assert all(r is Role.STATIC for _, r in m.roles)


def test_random_dbcm_sho_template_family():
    m = random_dbcm(n_static=3, chains=[2], seed=5)
    assert validate_dbcm(m) == []
    assert m.chain_orders() == {"x1": 2}
    statics = [v for v, r in m.roles if r is Role.STATIC]
    assert len(statics) == 3


@pytest.mark.parametrize("seed", range(15))
def test_random_dbcm_always_validates_and_respects_coefficient_floor(seed):
    rng = np.random.default_rng(seed)
    chains = [int(rng.integers(1, 4)) for _ in range(int(rng.integers(0, 3)))]
    m = random_dbcm(int(rng.integers(1, 5)), chains, edge_density=0.4,
                    seed=rng)
    assert validate_dbcm(m) == []
    assert spectral_radius(m) < 0.98 or not m.chain_orders()
    for _, eq in m.equations:
        for _, c in eq.coefficients:
            assert abs(c) >= 0.2


def test_sampled_covariance_matches_lyapunov_solution():
    """Empirical covariance vs the model-implied stationary covariance."""
    m = random_dbcm(n_static=2, chains=[2], edge_density=0.4, seed=11)
    state, noise_nodes, A, B, rows = linearize(m)
    P = solve_discrete_lyapunov(A, B @ B.T)
    observed = sorted(m.base_variables())
    R = np.vstack([rows[v][0] for v in observed])
    N = np.vstack([rows[v][1] for v in observed])
    implied = R @ P @ R.T + N @ N.T

    data = sample_dbcm(m, steps=50_000, seed=2)
    (_, arr), = data.trajectories
    empirical = np.cov(arr, rowvar=False)
    scale = np.sqrt(np.outer(np.diag(implied), np.diag(implied)))
    assert np.max(np.abs(empirical - implied) / scale) < 0.05


def test_sampler_rejects_models_without_equations(sho_truth):
    bare = sho_truth.__class__.build(sho_truth.role_map, sho_truth.edges)
    with pytest.raises(ValueError):
        sample_dbcm(bare, steps=10, seed=0)


def test_stability_budget_exhaustion(monkeypatch):
    import dbcl.simulate as sim
    monkeypatch.setattr(sim, "_STABILITY_BUDGET", 20)
    # order-6 chains sit outside the tuned damping ranges and never stabilize
    with pytest.raises(RuntimeError, match="budget"):
        random_dbcm(0, [6], edge_density=0.0, seed=0)
