"""
Ensemble de décodage D(s), ensemble de transmission F(s) et politiques de
sélection de relais (CSI, BARS, benchmark, aléatoire).
"""
from typing import Optional, Sequence

import numpy as np

from batterie import level_boundaries
from structure import Action, ChannelDraw, Policy, SlotOutcome, SystemParams


def decoding_set(draw: ChannelDraw, params: SystemParams) -> list[int]:
    """D(s) = {i | P g_i / N0 >= T}."""
    p, n0, t = params.source_power, params.noise_power, params.threshold
    return [i for i, g in enumerate(draw.g) if p * g / n0 >= t]


def _can_transmit(stored: float, h: float, threshold: float) -> bool:
    # V_i >= P_r = T / h, écrit sans division (h peut être nul)
    return stored * h >= threshold


def forwarding_set(draw: ChannelDraw, levels: Sequence[int], params: SystemParams,
                   bounds: Optional[Sequence[float]] = None) -> list[int]:
    """F(s): relais de D(s) dont l'énergie b_{V_i} couvre P_r = T / h_i."""
    if len(levels) != params.n_relays:
        raise ValueError(f"{params.n_relays} niveaux attendus (reçu {len(levels)})")
    b = bounds if bounds is not None else level_boundaries(params)
    t = params.threshold
    return [i for i in decoding_set(draw, params) if _can_transmit(b[levels[i]], draw.h[i], t)]


def _outcome(n: int, forwarder: Optional[int], selected: Optional[int]) -> SlotOutcome:
    actions = tuple(Action.FORWARD if i == forwarder else Action.HARVEST for i in range(n))
    return SlotOutcome(selected=selected, outage=forwarder is None, actions=actions)


def select_by_energy(policy: Policy, draw: ChannelDraw, stored: Sequence[float],
                     params: SystemParams, rng: Optional[np.random.Generator] = None) -> SlotOutcome:
    """
    Applique `policy` avec un vecteur d'énergies stockées (une valeur par relais).
    Égalités départagées par le plus petit indice.
    """
    n = params.n_relays
    t = params.threshold
    harvest = params.source_power * params.kappa  # E_i = P g_i kappa

    if policy is Policy.BARS:
        eligible = [i for i in decoding_set(draw, params) if _can_transmit(stored[i], draw.h[i], t)]
        if not eligible:
            return _outcome(n, None, None)
        best = min(eligible, key=lambda i: (harvest * draw.g[i], i))
        return _outcome(n, best, best)

    decoders = decoding_set(draw, params)
    if not decoders:
        return _outcome(n, None, None)

    if policy is Policy.CSI:
        best = min(decoders, key=lambda i: (-draw.h[i], i))
    elif policy is Policy.BENCHMARK:
        best = min(decoders, key=lambda i: (harvest * draw.g[i], i))
    elif policy is Policy.RANDOM:
        if rng is None:
            raise ValueError("La politique random nécessite un générateur aléatoire")
        best = decoders[int(rng.integers(len(decoders)))]
    else:
        raise ValueError(f"Politique non gérée: {policy}")

    # relais choisi sans assez d'énergie: outage, tout le monde récolte
    if not _can_transmit(stored[best], draw.h[best], t):
        return _outcome(n, None, best)
    return _outcome(n, best, best)


def select(policy: Policy, draw: ChannelDraw, levels: Sequence[int], params: SystemParams,
           rng: Optional[np.random.Generator] = None,
           bounds: Optional[Sequence[float]] = None) -> SlotOutcome:
    """Sélection à partir des niveaux quantifiés (énergie b_{V_i})."""
    if len(levels) != params.n_relays:
        raise ValueError(f"{params.n_relays} niveaux attendus (reçu {len(levels)})")
    b = bounds if bounds is not None else level_boundaries(params)
    return select_by_energy(policy, draw, [b[l] for l in levels], params, rng)
