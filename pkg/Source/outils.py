import math
import os
from typing import Optional, Sequence

import numpy as np

from conventions import Z_99, clamp

WORKERS_ENV = "BARS_WORKERS"


def binomial_interval(successes: int, trials: int, z: float = Z_99):
    """
    Estimation d'une proportion + IC normal approché.
    Returns: (p, std_err, ci_low, ci_high), IC borné à [0, 1]
    """
    if trials < 1:
        raise ValueError(f"trials doit être >= 1 (reçu {trials})")
    p = successes / trials
    std_err = math.sqrt(p * (1.0 - p) / trials)
    return p, std_err, clamp(p - z * std_err, 0.0, 1.0), clamp(p + z * std_err, 0.0, 1.0)


def derive_seed(base_seed: int, index: int) -> int:
    """Graine dérivée (déterministe) pour le point `index` d'un balayage."""
    state = np.random.SeedSequence([int(base_seed), int(index)]).generate_state(1, dtype=np.uint64)
    return int(state[0])


def resolve_workers(requested: Optional[int], n_tasks: int) -> int:
    """Nombre de processus: demandé, sinon nb de CPU; plafonné par $BARS_WORKERS."""
    workers = requested if requested else (os.cpu_count() or 1)
    cap = os.environ.get(WORKERS_ENV)
    if cap:
        try:
            workers = min(workers, int(cap))
        except ValueError:
            raise ValueError(f"{WORKERS_ENV} doit être un entier (reçu '{cap}')") from None
    return max(1, min(workers, n_tasks))


def diversity_slope(snr_db: Sequence[float], p_out: Sequence[float],
                    lo: float = 1e-5, hi: float = 1e-2) -> float:
    """
    Pente de log10(p_out) en fonction de SNR_dB / 10, sur les points où
    lo <= p_out <= hi (moindres carrés). L'ordre de diversité est -pente.
    """
    x = np.asarray(snr_db, dtype=float) / 10.0
    y = np.asarray(p_out, dtype=float)
    keep = (y >= lo) & (y <= hi)
    if keep.sum() < 2:
        raise ValueError(f"Moins de 2 points dans la fenêtre [{lo:g}, {hi:g}]")
    slope, _ = np.polyfit(x[keep], np.log10(y[keep]), 1)
    return float(slope)
