"""Ground-truth model generators and trajectory samplers.

All systems are expressed in difference coordinates: the n-th difference of
a position plays the role of the n-th derivative scaled by dt^n, so the
integration identities hold exactly in the sampled data.  Position is
measured from the static equilibrium point, which puts the deterministic
fixed point of every oscillator at zero.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .model import (Dbcm, LinearEquation, Role, TimeSeriesDataset, VariableId,
                    validate_dbcm)

#: Gravitational acceleration; a constant coefficient, never a variable.
GRAVITY = 9.8


# ---------------------------------------------------------------------------
# Linearization and stability


def linearize(model: Dbcm) -> tuple[
    tuple[VariableId, ...], tuple[VariableId, ...], np.ndarray, np.ndarray,
    dict[VariableId, tuple[np.ndarray, np.ndarray]],
]:
    """Express the one-step update as state' = A state + B eps.

    The state is the vector of integral nodes; eps collects the unit-variance
    noise of every non-integral equation.  Also returns, per node, its value
    as (state_row, noise_row); intercepts are dropped since only second
    moments matter for stability and covariance.
    """
    roles = model.role_map
    eqs = model.equation_map
    state = tuple(sorted(v for v, r in roles.items() if r is Role.INTEGRAL))
    noise_nodes = tuple(sorted(v for v, r in roles.items() if r is not Role.INTEGRAL))
    if not all(v in eqs for v in noise_nodes):
        raise ValueError("model has no equations; cannot linearize")
    s_ix = {v: i for i, v in enumerate(state)}
    e_ix = {v: i for i, v in enumerate(noise_nodes)}
    ns, ne = len(state), len(noise_nodes)

    rows: dict[VariableId, tuple[np.ndarray, np.ndarray]] = {}
    for v in state:
        sr = np.zeros(ns)
        sr[s_ix[v]] = 1.0
        rows[v] = (sr, np.zeros(ne))

    # Contemporaneous equations in dependency order.
    pending = list(noise_nodes)
    while pending:
        progressed = False
        for v in list(pending):
            eq = eqs[v]
            if any(p not in rows for p, _ in eq.coefficients):
                continue
            sr = np.zeros(ns)
            nr = np.zeros(ne)
            for p, c in eq.coefficients:
                sr += c * rows[p][0]
                nr += c * rows[p][1]
            nr[e_ix[v]] += eq.noise_sd
            rows[v] = (sr, nr)
            pending.remove(v)
            progressed = True
        if not progressed:
            raise ValueError("contemporaneous equations contain a cycle")

    A = np.zeros((ns, ns))
    B = np.zeros((ns, ne))
    for v in state:
        nxt_sr, nxt_nr = rows[v.diff()]
        A[s_ix[v]] = rows[v][0] + nxt_sr
        B[s_ix[v]] = nxt_nr
    return state, noise_nodes, A, B, rows


def spectral_radius(model: Dbcm) -> float:
    """Largest eigenvalue magnitude of the one-step state map (0 if stateless)."""
    state, _, A, _, _ = linearize(model)
    if not state:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(A))))


# ---------------------------------------------------------------------------
# Generic sampler


def sample_dbcm(model: Dbcm, steps: int, seed: int | np.random.Generator,
                n_trajectories: int = 1,
                initial: Mapping[VariableId, float] | None = None,
                sampling_interval: float = 1.0) -> TimeSeriesDataset:
    """Draw trajectories of the observed (order-0) variables.

    Per step the non-integral equations fire in dependency order with fresh
    noise; the integration identities then advance the state, exactly and
    noiselessly.  Same seed, same bytes.
    """
    if steps < 2:
        raise ValueError("steps must be >= 2")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    roles = model.role_map
    eqs = model.equation_map
    state_nodes = sorted(v for v, r in roles.items() if r is Role.INTEGRAL)
    observed = sorted(model.base_variables())

    order = _topo_order_noneq(model)
    missing = [v.token() for v in order if v not in eqs]
    if missing:
        raise ValueError(f"model lacks equations for {missing}; cannot sample")
    trajectories = []
    for t in range(n_trajectories):
        noise = rng.standard_normal((steps, len(order)))
        values: dict[VariableId, float] = {
            v: float((initial or {}).get(v, 0.0)) for v in state_nodes
        }
        out = np.empty((steps, len(observed)))
        for step in range(steps):
            for j, v in enumerate(order):
                eq = eqs[v]
                val = eq.intercept + eq.noise_sd * noise[step, j]
                for p, c in eq.coefficients:
                    val += c * values[p]
                values[v] = val
            for i, v in enumerate(observed):
                out[step, i] = values[v]
            nxt = {v: values[v] + values[v.diff()] for v in state_nodes}
            values.update(nxt)
        trajectories.append((f"t{t}", out))
    return TimeSeriesDataset(tuple(observed), tuple(trajectories),
                             sampling_interval)


def _topo_order_noneq(model: Dbcm) -> list[VariableId]:
    """Non-integral nodes in contemporaneous dependency order."""
    roles = model.role_map
    nodes = sorted(v for v, r in roles.items() if r is not Role.INTEGRAL)
    deps = {
        v: {p for p in model.parents(v) if roles[p] is not Role.INTEGRAL}
        for v in nodes
    }
    out: list[VariableId] = []
    ready = [v for v in nodes if not deps[v]]
    while ready:
        v = ready.pop(0)
        out.append(v)
        for w in nodes:
            if v in deps[w]:
                deps[w].discard(v)
                if not deps[w] and w not in out and w not in ready:
                    ready.append(w)
    if len(out) != len(nodes):
        raise ValueError("contemporaneous equations contain a cycle")
    return out


# ---------------------------------------------------------------------------
# Damped oscillator on a spring


@dataclass(frozen=True)
class ShoParams:
    """Mass on a damped spring, explicit one-step updates.

    Position is measured from the equilibrium stretch, so x = v = 0 is the
    deterministic fixed point.  Construction rejects parameterizations whose
    one-step map has an eigenvalue on or outside the unit circle.
    """

    mass_mean: float = 1.0
    spring_k: float = 1.0
    damping_b: float = 0.4
    dt: float = 0.1
    noise_sd: float = 0.1
    initial_x: float = 0.0
    initial_v: float = 0.0
    steps: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        if self.mass_mean <= 0 or self.spring_k <= 0 or self.dt <= 0:
            raise ValueError("mass_mean, spring_k and dt must be > 0")
        if self.damping_b < 0 or self.noise_sd < 0:
            raise ValueError("damping_b and noise_sd must be >= 0")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        rho = spectral_radius(sho_model(self))
        if rho >= 1.0:
            raise ValueError(
                f"unstable oscillator parameters: one-step spectral radius {rho:.4f}"
            )


def sho_model(p: ShoParams) -> Dbcm:
    """Ground-truth model of the damped oscillator in difference coordinates."""
    x = VariableId("x")
    d1, d2 = x.diff(1), x.diff(2)
    f_x, f_v, m = VariableId("F_x"), VariableId("F_v"), VariableId("m")
    c = 1.0 / p.mass_mean
    cdt2 = c * p.dt ** 2
    roles = {
        x: Role.INTEGRAL, d1: Role.INTEGRAL, d2: Role.PRIME,
        f_x: Role.STATIC, f_v: Role.STATIC, m: Role.STATIC,
    }
    equations = {
        f_x: LinearEquation.build({x: -p.spring_k}, p.noise_sd),
        f_v: LinearEquation.build({d1: -p.damping_b / p.dt}, p.noise_sd),
        m: LinearEquation.build({}, p.noise_sd, intercept=p.mass_mean),
        d2: LinearEquation.build(
            {f_x: cdt2, f_v: cdt2, m: GRAVITY * cdt2},
            p.noise_sd * p.dt ** 2,
            intercept=-GRAVITY * cdt2 * p.mass_mean,
        ),
    }
    edges = {
        (parent, v)
        for v, eq in equations.items()
        for parent, coeff in eq.coefficients if coeff != 0.0
    }
    return Dbcm.build(roles, edges, equations)


def simulate_sho(p: ShoParams) -> tuple[TimeSeriesDataset, Dbcm]:
    """Sampled oscillator data (x and the force/mass variables) plus the truth.

    Velocity and acceleration stay latent: the dataset holds only the
    order-0 columns.
    """
    model = sho_model(p)
    initial = {VariableId("x"): p.initial_x,
               VariableId("x", 1): p.initial_v * p.dt}
    data = sample_dbcm(model, p.steps, p.seed, initial=initial,
                       sampling_interval=p.dt)
    return data, model


# ---------------------------------------------------------------------------
# Two coupled oscillators


@dataclass(frozen=True)
class CoupledShoParams:
    """Two damped oscillators joined by a coupling spring.

    Stand-in structure: wall springs on both blocks, one shared coupling
    force fed by both positions, independent dampers, per-block masses.
    With coupling_k = 0 the coupling-force node is omitted entirely and the
    blocks are exactly independent.
    """

    mass_mean: tuple[float, float] = (1.0, 1.0)
    spring_k: tuple[float, float] = (1.0, 1.0)
    coupling_k: float = 0.5
    damping_b: tuple[float, float] = (0.4, 0.4)
    dt: float = 0.1
    noise_sd: float = 0.1
    initial_x: tuple[float, float] = (0.0, 0.0)
    initial_v: tuple[float, float] = (0.0, 0.0)
    steps: int = 5000
    seed: int = 0

    def __post_init__(self) -> None:
        if any(v <= 0 for v in (*self.mass_mean, *self.spring_k, self.dt)):
            raise ValueError("masses, springs and dt must be > 0")
        if self.coupling_k < 0 or self.noise_sd < 0 or any(b < 0 for b in self.damping_b):
            raise ValueError("coupling_k, damping and noise must be >= 0")
        if self.steps < 2:
            raise ValueError("steps must be >= 2")
        rho = spectral_radius(coupled_sho_model(self))
        if rho >= 1.0:
            raise ValueError(
                f"unstable coupled parameters: one-step spectral radius {rho:.4f}"
            )


def coupled_sho_model(p: CoupledShoParams) -> Dbcm:
    roles: dict[VariableId, Role] = {}
    equations: dict[VariableId, LinearEquation] = {}
    xs = [VariableId("x1"), VariableId("x2")]
    f_c = VariableId("F_c")
    coupled = p.coupling_k != 0.0
    if coupled:
        roles[f_c] = Role.STATIC
        equations[f_c] = LinearEquation.build(
            {xs[0]: -p.coupling_k, xs[1]: p.coupling_k}, p.noise_sd
        )
    for i, x in enumerate(xs):
        d1, d2 = x.diff(1), x.diff(2)
        f_x = VariableId(f"F_x{i + 1}")
        f_v = VariableId(f"F_v{i + 1}")
        m = VariableId(f"m{i + 1}")
        c = 1.0 / p.mass_mean[i]
        cdt2 = c * p.dt ** 2
        roles.update({x: Role.INTEGRAL, d1: Role.INTEGRAL, d2: Role.PRIME,
                      f_x: Role.STATIC, f_v: Role.STATIC, m: Role.STATIC})
        prime_coeffs = {f_x: cdt2, f_v: cdt2, m: GRAVITY * cdt2}
        if coupled:
            prime_coeffs[f_c] = cdt2 if i == 0 else -cdt2
        equations[f_x] = LinearEquation.build({x: -p.spring_k[i]}, p.noise_sd)
        equations[f_v] = LinearEquation.build({d1: -p.damping_b[i] / p.dt}, p.noise_sd)
        equations[m] = LinearEquation.build({}, p.noise_sd, intercept=p.mass_mean[i])
        equations[d2] = LinearEquation.build(
            prime_coeffs, p.noise_sd * p.dt ** 2,
            intercept=-GRAVITY * cdt2 * p.mass_mean[i],
        )
    edges = {
        (parent, v)
        for v, eq in equations.items()
        for parent, coeff in eq.coefficients if coeff != 0.0
    }
    return Dbcm.build(roles, edges, equations)


def simulate_coupled_sho(p: CoupledShoParams) -> tuple[TimeSeriesDataset, Dbcm]:
    model = coupled_sho_model(p)
    initial = {
        VariableId("x1"): p.initial_x[0],
        VariableId("x2"): p.initial_x[1],
        VariableId("x1", 1): p.initial_v[0] * p.dt,
        VariableId("x2", 1): p.initial_v[1] * p.dt,
    }
    data = sample_dbcm(model, p.steps, p.seed, initial=initial,
                       sampling_interval=p.dt)
    return data, model


# ---------------------------------------------------------------------------
# Random linear-Gaussian models

#: Coefficient magnitudes stay outside this band to protect faithfulness.
MIN_COEFF = 0.2

_STABILITY_BUDGET = 500


def random_dbcm(n_static: int, chains: Sequence[int], edge_density: float = 0.3,
                seed: int | np.random.Generator = 0, max_parents: int = 3,
                require_stable: bool = True) -> Dbcm:
    """Sample an acyclic difference-based model with linear-Gaussian equations.

    ``chains`` lists the prime order of each dynamic variable (x1, x2, ...);
    statics are named s1..sN.  Every chain gets damping edges from its
    intermediate differences into its prime, plus either a direct or a
    mediated feedback from the base (or, when stability is not required,
    possibly none), mirroring how physical oscillators close their loops.
    Spectral stability of the one-step map is enforced by rejection.
    """
    if any(o < 1 for o in chains):
        raise ValueError("chain orders must be >= 1")
    if not 0 <= edge_density <= 1:
        raise ValueError("edge_density must lie in [0, 1]")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)

    for _ in range(_STABILITY_BUDGET):
        model = _sample_candidate(n_static, chains, edge_density, rng,
                                  max_parents, require_stable)
        if not require_stable or spectral_radius(model) < 0.98:
            return model
    raise RuntimeError(
        "stability rejection budget exhausted; try lower chain orders or density"
    )


def _sample_candidate(n_static: int, chains: Sequence[int], edge_density: float,
                      rng: np.random.Generator, max_parents: int,
                      require_stable: bool) -> Dbcm:
    roles: dict[VariableId, Role] = {}
    bases = []
    for i, order in enumerate(chains):
        base = VariableId(f"x{i + 1}")
        bases.append((base, order))
        for j in range(order):
            roles[VariableId(base.name, j)] = Role.INTEGRAL
        roles[VariableId(base.name, order)] = Role.PRIME
    statics = [VariableId(f"s{i + 1}") for i in range(n_static)]
    for s in statics:
        roles[s] = Role.STATIC

    nodes = sorted(roles)
    perm = rng.permutation(len(nodes))
    order_of: dict[VariableId, float] = {v: float(perm[i]) for i, v in enumerate(nodes)}
    # Each prime must come after its whole chain so feedback edges can exist.
    for base, p_order in bases:
        prime = VariableId(base.name, p_order)
        top = max(order_of[VariableId(base.name, j)] for j in range(p_order))
        if order_of[prime] <= top:
            order_of[prime] = top + 0.5  # squeeze in just after the chain

    def mag(lo: float, hi: float) -> float:
        return float(rng.uniform(lo, hi))

    coeffs: dict[VariableId, dict[VariableId, float]] = {
        v: {} for v in nodes if roles[v] is not Role.INTEGRAL
    }

    # Damping gains grow with difference order; the ranges keep an isolated
    # chain's one-step map comfortably inside the unit circle while every
    # magnitude respects the faithfulness floor.
    damper_ranges = {2: [(0.5, 1.2)], 3: [(0.6, 1.6), (1.1, 1.9)]}
    for base, p_order in bases:
        prime = VariableId(base.name, p_order)
        ranges = damper_ranges.get(
            p_order, [(0.5 + 0.5 * j, 1.0 + 0.5 * j) for j in range(1, p_order)]
        )
        for j in range(1, p_order):
            lo, hi = ranges[j - 1]
            coeffs[prime][VariableId(base.name, j)] = -mag(lo, hi)
        modes = ["direct", "mediated"] if require_stable else ["direct", "mediated", "none"]
        mode = str(rng.choice(modes))
        if mode == "mediated":
            between = [s for s in statics
                       if order_of[base] < order_of[s] < order_of[prime]]
            if between:
                m = between[int(rng.integers(len(between)))]
                coeffs[m][base] = mag(0.3, 0.7)
                coeffs[prime][m] = -mag(0.3, 0.7)
            else:
                mode = "direct"
        if mode == "direct":
            hi = 0.9 if p_order == 1 else 0.45
            coeffs[prime][base] = -mag(0.2, hi)

    ranked = sorted(nodes, key=lambda v: order_of[v])
    for i, src in enumerate(ranked):
        for tgt in ranked[i + 1:]:
            if roles[tgt] is Role.INTEGRAL:
                continue
            if src.name == tgt.name:
                continue  # own-chain feedback is handled above
            if src in coeffs[tgt] or len(coeffs[tgt]) >= max_parents:
                continue
            if rng.random() < edge_density:
                sign = 1.0 if rng.random() < 0.5 else -1.0
                # edges feeding a prime perturb the dynamics: keep them mild
                hi = 0.5 if roles[tgt] is Role.PRIME else 0.9
                coeffs[tgt][src] = sign * mag(MIN_COEFF, hi)

    equations = {
        v: LinearEquation.build(cs, noise_sd=mag(0.5, 1.5))
        for v, cs in coeffs.items()
    }
    edges = {
        (parent, v)
        for v, eq in equations.items()
        for parent, c in eq.coefficients if c != 0.0
    }
    model = Dbcm.build(roles, edges, equations)
    problems = validate_dbcm(model)
    if problems:  # construction bug, not a sampling miss
        raise AssertionError(f"sampled invalid model: {problems}")
    return model


# ---------------------------------------------------------------------------
# Synthetic multichannel band-limited recording


def simulate_band_driven_channels(
    n_channels: int = 19,
    n_driven: int = 3,
    sample_rate_hz: float = 256.0,
    window_seconds: float = 0.5,
    tone_hz: float = 10.0,
    n_samples: int = 200_000,
    seed: int | np.random.Generator = 0,
    envelope_period_windows: float = 40.0,
    envelope_damping: float = 0.25,
    envelope_noise_sd: float = 0.004,
    mix_gain: tuple[float, float] = (0.6, 1.0),
    mix_noise_sd: float = 4.0,
) -> tuple[TimeSeriesDataset, tuple[str, ...]]:
    """Raw multichannel recording: a few driven channels, the rest mixtures.

    Each driven channel carries a pure tone at ``tone_hz`` whose squared
    amplitude follows a slow second-order process sampled once per analysis
    window; the tone sits exactly on a window bin and the driven channels
    carry no additive noise, so their windowed band power reads the latent
    process exactly.  Every remaining channel is an instantaneous scaled
    copy of one driven channel plus independent broadband noise.  Returns
    the raw dataset and the driven channel names.
    """
    if not 1 <= n_driven <= n_channels:
        raise ValueError("need 1 <= n_driven <= n_channels")
    window_len = window_seconds * sample_rate_hz
    if abs(window_len - round(window_len)) > 1e-9:
        raise ValueError("window must hold an integral number of samples")
    window_len = int(round(window_len))
    cycles = tone_hz * window_seconds
    if abs(cycles - round(cycles)) > 1e-9:
        raise ValueError("tone must sit exactly on a window frequency bin")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    n_windows = n_samples // window_len
    if n_windows < 2:
        raise ValueError("recording too short for the window length")

    # Slow positive second-order envelope process, one value per window.
    omega = 2.0 * math.pi / envelope_period_windows
    mean_power = 1.0
    t_idx = np.arange(n_samples)
    channels = np.empty((n_samples, n_channels))
    driven_names = tuple(f"ch{i + 1:02d}" for i in range(n_driven))
    driven_raw = []
    for d in range(n_driven):
        q = np.empty(n_windows)
        level, slope = mean_power, 0.0
        shocks = rng.standard_normal(n_windows)
        for w in range(n_windows):
            q[w] = level
            accel = (-omega ** 2 * (level - mean_power)
                     - 2.0 * envelope_damping * omega * slope
                     + envelope_noise_sd * shocks[w])
            level, slope = level + slope, slope + accel
        q = np.clip(q, 0.05, None)
        amplitude = 2.0 * np.sqrt(q)
        phase = rng.uniform(0.0, 2.0 * math.pi)
        tone = np.sin(2.0 * math.pi * tone_hz * t_idx / sample_rate_hz + phase)
        per_sample_amp = np.repeat(amplitude, window_len)
        per_sample_amp = np.pad(per_sample_amp,
                                (0, n_samples - per_sample_amp.size), mode="edge")
        raw = per_sample_amp * tone
        channels[:, d] = raw
        driven_raw.append(raw)

    for j in range(n_driven, n_channels):
        src = driven_raw[j % n_driven]
        gain = rng.uniform(*mix_gain)
        noise = mix_noise_sd * rng.standard_normal(n_samples)
        channels[:, j] = gain * src + noise

    variables = tuple(VariableId(f"ch{i + 1:02d}") for i in range(n_channels))
    data = TimeSeriesDataset(variables, (("t0", channels),),
                             sampling_interval=1.0 / sample_rate_hz)
    return data, driven_names
