"""
Modèle du système: paramètres du scénario, lois des canaux (Rayleigh,
gains de puissance exponentiels) et probabilités des modes d'un relais.
"""
import math
from typing import Union

import numpy as np

from conventions import DEFAULT_NOISE, INF, energy_ratio, snr_db_to_power
from structure import ChannelDraw, SystemParams
from batterie import level_boundaries


def decoding_threshold(rate: float) -> float:
    """Seuil de décodage T = 2^(2R) - 1 (deux sauts en half-duplex)."""
    if rate < 0:
        raise ValueError(f"rate doit être >= 0 (reçu {rate})")
    return 2.0 ** (2.0 * rate) - 1.0


def exp_cdf(x: float, mean: float) -> float:
    """
    CDF d'une exponentielle de moyenne `mean`.
    0 pour x <= 0, 1 pour x = +inf.
    """
    if not mean > 0:
        raise ValueError(f"mean doit être > 0 (reçu {mean})")
    if x <= 0.0:
        return 0.0
    if x == INF:
        return 1.0
    return -math.expm1(-x / mean)


def _broadcast(value, n: int, name: str) -> tuple[float, ...]:
    if np.ndim(value) == 0:
        return (float(value),) * n
    values = tuple(float(v) for v in value)
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise ValueError(f"{name} doit avoir 1 ou {n} valeurs (reçu {len(values)})")
    return values


def make_params(n_relays: int = 2, levels: int = 1, snr_db: float = 10.0,
                rate: float = 1.0, kappa: float = 0.5, alpha: float = 1.0,
                noise: float = DEFAULT_NOISE,
                mean_g: Union[float, tuple] = 1.0,
                mean_h: Union[float, tuple] = 1.0) -> SystemParams:
    """Construit un SystemParams à partir du SNR en dB (P = N0 * 10^(SNR/10))."""
    return SystemParams(
        n_relays=int(n_relays),
        levels=int(levels),
        rate=float(rate),
        source_power=snr_db_to_power(snr_db, noise),
        noise_power=float(noise),
        kappa=float(kappa),
        alpha=float(alpha),
        mean_g=_broadcast(mean_g, int(n_relays), "mean_g"),
        mean_h=_broadcast(mean_h, int(n_relays), "mean_h"),
    )


def with_changes(params: SystemParams, **changes) -> SystemParams:
    """
    Copie de `params` avec quelques champs modifiés.
    Accepte aussi `snr_db` (P recalculé à N0 fixé) et `n_relays`
    (moyennes uniformes rediffusées).
    """
    fields = {
        "n_relays": params.n_relays,
        "levels": params.levels,
        "rate": params.rate,
        "source_power": params.source_power,
        "noise_power": params.noise_power,
        "kappa": params.kappa,
        "alpha": params.alpha,
        "mean_g": params.mean_g,
        "mean_h": params.mean_h,
    }
    snr_db = changes.pop("snr_db", None)
    unknown = set(changes) - set(fields)
    if unknown:
        raise ValueError(f"Champ(s) inconnu(s): {', '.join(sorted(unknown))}")
    fields.update(changes)

    n = int(fields["n_relays"])
    for name in ("mean_g", "mean_h"):
        means = tuple(fields[name]) if np.ndim(fields[name]) else (fields[name],)
        if len(means) != n:
            if len(set(means)) != 1:
                raise ValueError(f"{name} non uniforme: impossible de passer à {n} relais")
            means = (means[0],) * n
        fields[name] = means

    if snr_db is not None:
        fields["source_power"] = snr_db_to_power(float(snr_db), fields["noise_power"])
    return SystemParams(**fields)


# ============================================================
# Canaux
# ============================================================

def sample_channels_batch(params: SystemParams, rng: np.random.Generator, size: int):
    """
    Tire `size` slots de canaux par inversion de la CDF:
    x = -mean * log(1 - U), U ~ Uniforme[0, 1).
    Returns: (g, h) tableaux (size, N)
    """
    u = rng.random((size, 2, params.n_relays))
    g = -np.asarray(params.mean_g) * np.log1p(-u[:, 0, :])
    h = -np.asarray(params.mean_h) * np.log1p(-u[:, 1, :])
    return g, h


def sample_channels(params: SystemParams, rng: np.random.Generator) -> ChannelDraw:
    g, h = sample_channels_batch(params, rng, 1)
    return ChannelDraw(g=tuple(g[0].tolist()), h=tuple(h[0].tolist()))


# ============================================================
# Probabilités des modes (forwarding / charging) d'un relais
# ============================================================

def _check_index(level: int, relay: int, params: SystemParams):
    if not 0 <= level <= params.levels + 1:
        raise IndexError(f"niveau {level} hors de [0, {params.levels + 1}]")
    if not 0 <= relay < params.n_relays:
        raise IndexError(f"relais {relay} hors de [0, {params.n_relays - 1}]")


def prob_forwarding(level: int, relay: int, params: SystemParams) -> float:
    """Pr[A_f(m)] = (1 - F_g(T N0 / P)) (1 - F_h(T / b_m))."""
    _check_index(level, relay, params)
    b = level_boundaries(params)
    decode = 1.0 - exp_cdf(params.decode_gain, params.mean_g[relay])
    energy = 1.0 - exp_cdf(energy_ratio(params.threshold, b[level]), params.mean_h[relay])
    return decode * energy


def prob_charging(level: int, relay: int, params: SystemParams) -> float:
    """Pr[A_c(m)] = F_h(T / b_m) + (1 - F_h(T / b_m)) F_g(T N0 / P)."""
    _check_index(level, relay, params)
    b = level_boundaries(params)
    fh = exp_cdf(energy_ratio(params.threshold, b[level]), params.mean_h[relay])
    fg = exp_cdf(params.decode_gain, params.mean_g[relay])
    return fh + (1.0 - fh) * fg


def charging_vector(relay: int, params: SystemParams) -> np.ndarray:
    """Pr[A_c(m)] pour m = 0..L+1."""
    return np.array([prob_charging(m, relay, params) for m in range(params.levels + 2)])
