"""
Batterie quantifiée: L niveaux intérieurs, bornes uniformes b_l = l * B / (L + 1).
Un niveau l correspond à l'intervalle [b_l, b_{l+1}) et l'énergie utilisable
attribuée au niveau l est b_l.
"""
from functools import lru_cache
from typing import Sequence

import numpy as np

from structure import SystemParams

# tolérance relative sur la comparaison énergie requise / stockée
ENERGY_TOL = 1e-12


class InsufficientEnergyError(ValueError):
    """Décharge demandée au-delà de l'énergie stockée (bug de sélection)."""


@lru_cache(maxsize=256)
def level_boundaries(params: SystemParams) -> tuple[float, ...]:
    """Bornes b_0 = 0 < b_1 < ... < b_{L+1} = B."""
    capacity = params.capacity
    if capacity <= 0:
        raise ValueError(f"Capacité batterie invalide: {capacity}")
    n = params.levels + 1
    bounds = [l * capacity / n for l in range(n)]
    bounds.append(capacity)  # b_{L+1} = B exactement
    return tuple(bounds)


def quantize_array(energies, bounds: Sequence[float]) -> np.ndarray:
    """
    Niveau l tel que b_l <= e < b_{l+1}, pour un scalaire ou un tableau
    d'énergies; L+1 si e >= B. Seule implémentation de la règle plancher.
    """
    idx = np.searchsorted(np.asarray(bounds), energies, side="right") - 1
    return np.clip(idx, 0, len(bounds) - 1)


def quantize(energy: float, bounds: Sequence[float]) -> int:
    """quantize_array pour une énergie scalaire (refuse une énergie négative)."""
    if energy < 0:
        raise ValueError(f"Énergie négative: {energy}")
    return int(quantize_array(energy, bounds))


def charge(current: int, harvested: float, bounds: Sequence[float]) -> int:
    if harvested < 0:
        raise ValueError(f"Énergie récoltée négative: {harvested}")
    if harvested == 0.0:
        return current
    return quantize(bounds[current] + harvested, bounds)


def discharge(current: int, required: float, bounds: Sequence[float]) -> int:
    """Retire `required` de l'énergie b_current puis requantifie."""
    stored = bounds[current]
    remaining = stored - required
    if remaining < 0:
        if remaining < -ENERGY_TOL * max(1.0, stored):
            raise InsufficientEnergyError(
                f"Énergie insuffisante: requis {required:.6g} > stocké {stored:.6g} (niveau {current})"
            )
        remaining = 0.0
    return quantize(remaining, bounds)
