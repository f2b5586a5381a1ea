"""
Simulation Monte Carlo slot par slot: évolution des batteries de tous les
relais sous une politique donnée, estimation de la probabilité d'outage.
"""
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Optional, Sequence

import numpy as np

from batterie import charge, discharge, level_boundaries, quantize_array, ENERGY_TOL, InsufficientEnergyError
from modele import sample_channels_batch, with_changes
from outils import binomial_interval, derive_seed, resolve_workers
from selection import select, select_by_energy
from structure import Action, ChannelDraw, OutageEstimate, Policy, SimConfig, SystemParams

CHUNK_SLOTS = 65_536

SWEEP_AXES = ("snr_db", "kappa", "alpha", "levels", "n_relays", "rate", "policy")


def _required_power(threshold: float, h: float) -> float:
    """P_r = T / h (0 si T = 0)."""
    if threshold == 0.0:
        return 0.0
    return threshold / h


def step(levels: Sequence[int], draw: ChannelDraw, policy: Policy, params: SystemParams,
         rng: Optional[np.random.Generator] = None,
         bounds: Optional[Sequence[float]] = None):
    """
    Un slot: sélection, décharge du relais qui transmet, charge des autres.
    Returns: (niveaux suivants, outage)
    """
    b = bounds if bounds is not None else level_boundaries(params)
    outcome = select(policy, draw, levels, params, rng, b)
    t = params.threshold
    harvest = params.source_power * params.kappa
    nxt = []
    for i, action in enumerate(outcome.actions):
        if action is Action.FORWARD:
            nxt.append(discharge(levels[i], _required_power(t, draw.h[i]), b))
        else:
            nxt.append(charge(levels[i], harvest * draw.g[i], b))
    return tuple(nxt), outcome.outage


def step_energy(stored: Sequence[float], draw: ChannelDraw, policy: Policy, params: SystemParams,
                rng: Optional[np.random.Generator] = None):
    """Variante à batterie continue: l'énergie exacte est conservée (saturée à B)."""
    outcome = select_by_energy(policy, draw, stored, params, rng)
    t = params.threshold
    harvest = params.source_power * params.kappa
    capacity = params.capacity
    nxt = []
    for i, action in enumerate(outcome.actions):
        if action is Action.FORWARD:
            remaining = stored[i] - _required_power(t, draw.h[i])
            if remaining < -ENERGY_TOL * max(1.0, stored[i]):
                raise InsufficientEnergyError(f"Énergie insuffisante pour le relais {i}")
            nxt.append(max(remaining, 0.0))
        else:
            nxt.append(min(capacity, stored[i] + harvest * draw.g[i]))
    return tuple(nxt), outcome.outage


def bars_step_batch(levels: Sequence[int], g: np.ndarray, h: np.ndarray,
                    params: SystemParams, bounds: Optional[Sequence[float]] = None):
    """
    Dynamique BARS exacte, vectorisée sur K tirages depuis un même état joint.
    Args:
        levels: (N,) niveaux de départ
        g, h: (K, N) gains de canal
    Returns: (niveaux suivants (K, N), outage (K,))
    """
    b_all = np.asarray(bounds if bounds is not None else level_boundaries(params))
    lv = np.asarray(levels, dtype=int)
    b = b_all[lv]
    t = params.threshold

    decode = params.source_power * g / params.noise_power >= t
    forward_ok = decode & (b * h >= t)
    energy = params.source_power * g * params.kappa

    outage = ~forward_ok.any(axis=1)
    chosen = np.argmin(np.where(forward_ok, energy, np.inf), axis=1)

    nxt = quantize_array(b + energy, b_all)
    rows = np.flatnonzero(~outage)
    if rows.size:
        sel = chosen[rows]
        h_sel = h[rows, sel]
        if t == 0.0:
            required = np.zeros_like(h_sel)
        else:
            required = t / h_sel
        remaining = np.maximum(b[sel] - required, 0.0)
        nxt[rows, sel] = quantize_array(remaining, b_all)
    return nxt, outage


def _flat_index(levels: Sequence[int], radix: int) -> int:
    idx = 0
    for l in levels:
        idx = idx * radix + l
    return idx


def run(config: SimConfig, track_occupancy: bool = False, verbose: bool = False) -> OutageEstimate:
    """
    Trajectoire unique de `config.slots` slots, batteries initialisées à
    `initial_level`. Les outages après `warmup_slots` sont comptés.
    """
    params = config.params
    bounds = level_boundaries(params)
    n = params.n_relays
    radix = params.levels + 2

    channel_seq, policy_seq = np.random.SeedSequence(config.seed).spawn(2)
    channel_rng = np.random.default_rng(channel_seq)
    policy_rng = np.random.default_rng(policy_seq)

    if config.continuous_battery:
        state = tuple(bounds[config.start_level] for _ in range(n))
    else:
        state = (config.start_level,) * n

    occupancy = np.zeros(radix ** n, dtype=np.int64) if track_occupancy else None
    outages = 0
    report_every = max(config.slots // 10, 1)

    t = 0
    while t < config.slots:
        size = min(CHUNK_SLOTS, config.slots - t)
        g_chunk, h_chunk = sample_channels_batch(params, channel_rng, size)
        for g_row, h_row in zip(g_chunk.tolist(), h_chunk.tolist()):
            draw = ChannelDraw(g=g_row, h=h_row)
            counted = t >= config.warmup_slots
            if occupancy is not None and counted:
                if config.continuous_battery:
                    occupancy[_flat_index([int(x) for x in quantize_array(np.array(state), bounds)], radix)] += 1
                else:
                    occupancy[_flat_index(state, radix)] += 1
            if config.continuous_battery:
                state, outage = step_energy(state, draw, config.policy, params, policy_rng)
            else:
                state, outage = step(state, draw, config.policy, params, policy_rng, bounds)
            if outage and counted:
                outages += 1
            t += 1
            if verbose and t % report_every == 0:
                print(f"  slot {t}/{config.slots}: outages={outages}", file=sys.stderr)

    p, se, lo, hi = binomial_interval(outages, config.counted_slots)
    return OutageEstimate(p_out=p, std_err=se, ci_low=lo, ci_high=hi,
                          counted_slots=config.counted_slots, seed=config.seed,
                          outages=outages, occupancy=occupancy)


def merge_estimates(estimates: Sequence[OutageEstimate]) -> OutageEstimate:
    """Regroupe des estimations indépendantes (compteurs d'outage et slots comptés additionnés)."""
    if not estimates:
        raise ValueError("Aucune estimation à regrouper")
    total = sum(e.counted_slots for e in estimates)
    outages = sum(e.outages for e in estimates)
    p, se, lo, hi = binomial_interval(outages, total)
    return OutageEstimate(p_out=p, std_err=se, ci_low=lo, ci_high=hi,
                          counted_slots=total, seed=estimates[0].seed, outages=outages)


def apply_axis(config: SimConfig, axis: str, value) -> SimConfig:
    """Configuration `config` avec le paramètre `axis` fixé à `value`."""
    if axis not in SWEEP_AXES:
        raise ValueError(f"Axe de balayage inconnu '{axis}' (attendu: {', '.join(SWEEP_AXES)})")
    if axis == "policy":
        policy = value if isinstance(value, Policy) else Policy.parse(value)
        return replace(config, policy=policy)
    if axis in ("levels", "n_relays"):
        value = int(value)
    else:
        value = float(value)
    return replace(config, params=with_changes(config.params, **{axis: value}))


def _run_point(config: SimConfig) -> OutageEstimate:
    return run(config)


def replica_configs(config: SimConfig, replicas: int) -> list[SimConfig]:
    """Copies indépendantes d'un point; graine de la copie r dérivée de (graine du point, r)."""
    if replicas < 1:
        raise ValueError(f"replicas doit être >= 1 (reçu {replicas})")
    if replicas == 1:
        return [config]
    return [replace(config, seed=derive_seed(config.seed, r)) for r in range(replicas)]


def _run_all(configs: list[SimConfig], workers: Optional[int]) -> list[OutageEstimate]:
    n_workers = resolve_workers(workers, len(configs))
    if n_workers == 1:
        return [run(cfg) for cfg in configs]
    # map() conserve l'ordre des configurations quel que soit l'ordre de fin
    with ProcessPoolExecutor(max_workers=n_workers) as pool:
        return list(pool.map(_run_point, configs))


def _pool_replicas(point: SimConfig, results: list[OutageEstimate]) -> OutageEstimate:
    if len(results) == 1:
        return results[0]
    return replace(merge_estimates(results), seed=point.seed)


def run_replicated(config: SimConfig, replicas: int = 1, workers: Optional[int] = None,
                   verbose: bool = False) -> OutageEstimate:
    """
    Estime un point avec `replicas` trajectoires indépendantes regroupées.
    Avec replicas=1, identique à run(config).
    """
    jobs = replica_configs(config, replicas)
    if len(jobs) == 1:
        return run(config, verbose=verbose)
    if verbose:
        print(f"Point unique: {replicas} trajectoires de {config.slots} slots", file=sys.stderr)
    return _pool_replicas(config, _run_all(jobs, workers))


def run_sweep(base: SimConfig, axis: str, values: Sequence, workers: Optional[int] = None,
              verbose: bool = False, replicas: int = 1) -> list[OutageEstimate]:
    """
    Une estimation par valeur; graine du point k dérivée de (graine de base, k).
    Avec replicas > 1, chaque point regroupe autant de trajectoires indépendantes.
    """
    configs = [replace(apply_axis(base, axis, v), seed=derive_seed(base.seed, k))
               for k, v in enumerate(values)]
    if not configs:
        return []

    jobs = [job for cfg in configs for job in replica_configs(cfg, replicas)]
    if verbose:
        n_workers = resolve_workers(workers, len(jobs))
        print(f"Balayage {axis}: {len(configs)} points x {replicas} trajectoire(s), "
              f"{n_workers} processus", file=sys.stderr)

    flat = _run_all(jobs, workers)
    results = [_pool_replicas(cfg, flat[k * replicas:(k + 1) * replicas])
               for k, cfg in enumerate(configs)]
    if verbose:
        for v, est in zip(values, results):
            print(f"  ✓ {axis}={v}: p_out={est.p_out:.4g}", file=sys.stderr)
    return results
