import math

# ============================================================
# Conventions & unités (centralisées)
# ============================================================
# - Durée d'un slot = 1: une puissance (W) et une énergie (J) sur un
#   slot ont la même valeur numérique.
# - SNR = P / N0, exprimé en dB dans les fichiers de config et les CSV.
# - Seuils de la forme T / e:
#     T = 0          -> 0      (aucune énergie requise)
#     e = 0 < T      -> +inf   (batterie vide: jamais assez)
# ============================================================

DEFAULT_NOISE = 1.0
Z_99 = 2.576  # quantile normal pour un IC bilatéral à 99 %
INF = math.inf


def db_to_linear(x_db: float) -> float:
    return 10.0 ** (x_db / 10.0)


def linear_to_db(x: float) -> float:
    return 10.0 * math.log10(x)


def snr_db_to_power(snr_db: float, noise: float = DEFAULT_NOISE) -> float:
    """P = N0 * 10^(SNR/10)."""
    return noise * db_to_linear(snr_db)


def clamp(x: float, lo: float, hi: float) -> float:
    return max(lo, min(hi, x))


def energy_ratio(threshold: float, energy: float) -> float:
    """Seuil T / e avec les conventions ci-dessus."""
    if threshold == 0.0:
        return 0.0
    if energy <= 0.0:
        return INF
    return threshold / energy
