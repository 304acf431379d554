"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Shared desk-scale batches are module-scoped fixtures; dataset generation is
seed-deterministic, so separate benchmark invocations with the same seed see
identical data.
"""

import time

import numpy as np
import pytest

from dbcl import (CiQuery, Decision, DetectionConfig, FisherZTester,
                  OracleTester, ShoParams, TimeSeriesDataset, VariableId,
                  band_power_series, compare, difference, emc_report,
                  feedback_empty, is_self_regulating, learn_dbcm,
                  simulate_band_driven_channels, simulate_sho)
from dbcl.differencing import build_two_slice
from dbcl.evaluate import BenchmarkSpec, run_benchmark
from dbcl.structure import dbcm_pattern

from conftest import random_chain_model

SHO_SEED = 11
COUPLED_SEED = 11


def _report(criterion: int, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {detail}")
    assert passed, detail


@pytest.fixture(scope="module")
def sho_dbcl_batch():
    spec = BenchmarkSpec(system="sho", n_datasets=20, steps=5000,
                         seed=SHO_SEED, learners=("dbcl",))
    t0 = time.perf_counter()
    result = run_benchmark(spec)
    return result, time.perf_counter() - t0


@pytest.fixture(scope="module")
def sho_baseline_batch():
    spec = BenchmarkSpec(system="sho", n_datasets=20, steps=5000,
                         seed=SHO_SEED, learners=("pc1", "pc2"))
    return run_benchmark(spec)


@pytest.fixture(scope="module")
def coupled_batch():
    spec = BenchmarkSpec(system="coupled-sho", n_datasets=20, steps=5000,
                         seed=COUPLED_SEED)
    return run_benchmark(spec)


def test_criterion_1_oracle_exactness():
    """100 random models, chains <= 3, up to 8 base variables: exact recovery."""
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    failures = []
    for i in range(100):
        model = random_chain_model(rng, max_chains=3, max_order=3,
                                   max_static=5)
        g = learn_dbcm(None, DetectionConfig(), test=OracleTester(model))
        truth_pat = dbcm_pattern(model)
        ok = (g.roles == truth_pat.roles and g.edges == truth_pat.edges
              and g.chain_links == truth_pat.chain_links and not g.warnings)
        if not ok:
            failures.append(i)
        rep = compare(g, model)
        if rep.as_row() != (0.0, 0.0, 0.0, 0.0, 0.0):
            failures.append(i)
    elapsed = time.perf_counter() - t0
    _report(1, not failures and elapsed < 30.0,
            f"100 oracle runs exact={not failures}, {elapsed:.1f}s (< 30s)")


def test_criterion_2_sho_reproduction(sho_dbcl_batch):
    result, elapsed = sho_dbcl_batch
    low, hi, e_del, e_add, o_err = result.mean_row("dbcl")
    ok = (low == 0.0 and hi <= 5.0 and e_del <= 5.0 and e_add <= 10.0
          and o_err <= 10.0 and not result.failures and elapsed < 300.0)
    _report(2, ok,
            f"DBC row ({low:.2f}, {hi:.2f}, {e_del:.2f}, {e_add:.2f}, "
            f"{o_err:.2f}) within (0, <=5, <=5, <=10, <=10), "
            f"{elapsed:.0f}s (< 300s)")


def test_criterion_3_baseline_gap(sho_dbcl_batch, sho_baseline_batch):
    dbcl_row = sho_dbcl_batch[0].mean_row("dbcl")
    pc1 = sho_baseline_batch.mean_row("pc1")
    pc2 = sho_baseline_batch.mean_row("pc2")
    add_gap = pc1[3] >= 5.0 * dbcl_row[3] and pc1[3] > dbcl_row[3]
    del_gap = pc2[2] >= 5.0 * dbcl_row[2] and pc2[2] > dbcl_row[2]
    _report(3, add_gap and del_gap,
            f"PC1 e_add {pc1[3]:.1f} vs DBCL {dbcl_row[3]:.1f} (>=5x); "
            f"PC2 e_del {pc2[2]:.1f} vs DBCL {dbcl_row[2]:.1f} (>=5x)")


def test_criterion_4_coupled_trend(coupled_batch):
    dbcl = coupled_batch.mean_row("dbcl")
    pc1 = coupled_batch.mean_row("pc1")
    pc2 = coupled_batch.mean_row("pc2")
    bands = dbcl[1] <= 5.0 and dbcl[4] <= 15.0
    worse = all(b[3] > dbcl[3] and b[2] > dbcl[2] for b in (pc1, pc2))
    _report(4, bands and worse,
            f"DBCL d_hi {dbcl[1]:.2f} (<=5) o_err {dbcl[4]:.2f} (<=15); "
            f"e_add dbcl/pc1/pc2 {dbcl[3]:.1f}/{pc1[3]:.1f}/{pc2[3]:.1f}; "
            f"e_del {dbcl[2]:.1f}/{pc1[2]:.1f}/{pc2[2]:.1f}")


def test_criterion_5_emc_identification(sho_truth):
    def directed_path(model, src, dst):
        stack, seen = [src], set()
        while stack:
            v = stack.pop()
            if v == dst:
                return True
            if v in seen:
                continue
            seen.add(v)
            stack.extend(model.children(v))
        return False

    rng = np.random.default_rng(555)
    n_models, n_vars, mismatches = 200, 0, 0
    for _ in range(n_models):
        model = random_chain_model(rng)
        g = learn_dbcm(None, DetectionConfig(), test=OracleTester(model))
        for base in model.base_variables():
            prime = model.prime_of(base)
            if prime is None:
                continue
            n_vars += 1
            sr_true = base in model.parents(prime)
            fb_true = not directed_path(model, base, prime)
            if is_self_regulating(g, base) != sr_true:
                mismatches += 1
            if feedback_empty(g, base) != fb_true:
                mismatches += 1

    sho_pat = dbcm_pattern(sho_truth)
    sho_fb_nonempty = not feedback_empty(sho_pat, VariableId("x"))
    _report(5, mismatches == 0 and sho_fb_nonempty and n_vars >= 200,
            f"{n_models} models / {n_vars} chain vars, {mismatches} "
            f"mismatches; oscillator feedback set nonempty: {sho_fb_nonempty}")


def test_criterion_6_ci_calibration():
    rng = np.random.default_rng(99)
    trials, rejections = 500, 0
    a, b = VariableId("a"), VariableId("b")
    for _ in range(trials):
        arr = rng.standard_normal((10001, 2))
        data = TimeSeriesDataset((a, b), (("t0", arr),))
        tester = FisherZTester(build_two_slice(data, 0), alpha=0.01)
        if tester.decide(CiQuery((a, 0), (b, 0))) is Decision.DEPENDENT:
            rejections += 1
    rate = rejections / trials
    band = 3.0 * float(np.sqrt(0.01 * 0.99 / trials))
    _report(6, abs(rate - 0.01) <= band,
            f"false-rejection rate {rate:.4f} within 0.01 +/- {band:.4f}")


def test_criterion_7_differencing_and_spectral_properties():
    # polynomial identities, exact in integer arithmetic
    t = np.arange(12, dtype=float)
    cubic = 2 * t ** 3 - 4 * t ** 2 + t - 7
    d3 = difference(cubic, 3)
    poly_ok = bool(np.all(d3 == d3[0]) and np.all(difference(cubic, 4) == 0.0))

    # pure-tone concentration
    rate, win = 256.0, 0.5
    n = int(rate * win) * 8
    tone = np.sin(2 * np.pi * 10.0 * np.arange(n) / rate)
    data = TimeSeriesDataset((VariableId("ch"),), (("t0", tone[:, None]),),
                             sampling_interval=1.0 / rate)
    on = band_power_series(data, rate, win, 10.0).trajectories[0][1]
    off = band_power_series(data, rate, win, 20.0).trajectories[0][1]
    tone_ok = bool(np.all(on >= 100.0 * np.maximum(off, 1e-300)))

    # Parseval: sum of per-bin power == windowed energy / window length
    rng = np.random.default_rng(1)
    sig = rng.standard_normal(256)
    d2 = TimeSeriesDataset((VariableId("ch"),), (("t0", sig[:, None]),),
                           sampling_interval=1.0 / rate)
    total = 0.0
    for hz in np.arange(0.0, rate / 2 + 2.0, 2.0):
        p = band_power_series(d2, rate, win, float(hz)).trajectories[0][1][0, 0]
        total += p if hz in (0.0, rate / 2) else 2.0 * p
    energy = float(np.sum(sig[:128] ** 2))
    parseval_rel = abs(total - energy / 128) / (energy / 128)
    _report(7, poly_ok and tone_ok and parseval_rel < 1e-9,
            f"poly exact={poly_ok}, tone >=100x={tone_ok}, "
            f"Parseval rel err {parseval_rel:.2e} (< 1e-9)")


def test_criterion_8_band_power_pipeline_scale():
    t0 = time.perf_counter()
    good_runs = 0
    for seed in range(20):
        raw, driven = simulate_band_driven_channels(
            n_channels=19, n_driven=3, n_samples=200_000, seed=seed)
        power = band_power_series(raw, 256.0, 0.5, 10.0)
        g = learn_dbcm(power, DetectionConfig())
        names = sorted({v.name for v in power.variables})
        orders = {n: g.detected_order(n) for n in names}
        derivatives_only_on_driven = all(
            (orders[n] or 0) >= 1 if n in driven else orders[n] == 0
            for n in names
        )
        good_runs += derivatives_only_on_driven
    elapsed = time.perf_counter() - t0
    _report(8, good_runs >= 18 and elapsed < 600.0,
            f"{good_runs}/20 runs assign derivatives exactly to the driven "
            f"channels, {elapsed:.0f}s (< 600s)")
