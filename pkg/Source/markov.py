"""
Analyse par chaîne de Markov (DTMC) des niveaux de batterie sous BARS.

- per_relay_matrix: transitions d'un relais seul (formes fermées)
- joint_matrix_product_form / joint_matrix_mc: matrice jointe sur (L+2)^N états
- steady_state, outage_probability, marginal_product_outage
"""
import sys
from functools import reduce
from typing import Union

import numpy as np

from batterie import level_boundaries
from conventions import INF, energy_ratio
from modele import charging_vector, exp_cdf, prob_charging, sample_channels_batch
from simulateur import bars_step_batch
from structure import JointState, Mode, SteadyState, SystemParams, TransitionMatrix

DEFAULT_STATE_CAP = 65_536
DIRECT_SOLVE_MAX = 4096
DIRECT_TOL = 1e-12
ITERATIVE_TOL = 1e-10
MC_BATCH = 262_144


class StateCapError(ValueError):
    """Espace d'états joint trop grand pour une matrice dense."""


class SolverError(RuntimeError):
    """Distribution stationnaire introuvable (chaîne réductible ou périodique)."""


# ============================================================
# États joints (base mixte, relais 1 = poids fort)
# ============================================================

def encode_state(levels, n_levels: int) -> JointState:
    levels = tuple(int(l) for l in levels)
    dims = (n_levels + 2,) * len(levels)
    if any(not 0 <= l <= n_levels + 1 for l in levels):
        raise ValueError(f"Niveaux hors de [0, {n_levels + 1}]: {levels}")
    return JointState(levels=levels, flat_index=int(np.ravel_multi_index(levels, dims)))


def decode_state(index: int, n_relays: int, n_levels: int) -> JointState:
    dims = (n_levels + 2,) * n_relays
    if not 0 <= index < (n_levels + 2) ** n_relays:
        raise ValueError(f"Indice d'état {index} hors de [0, {(n_levels + 2) ** n_relays})")
    levels = tuple(int(l) for l in np.unravel_index(index, dims))
    return JointState(levels=levels, flat_index=int(index))


def _check_cap(params: SystemParams, state_cap: int):
    if params.n_states > state_cap:
        raise StateCapError(
            f"levels/n_relays: (L+2)^N = {params.n_states} états > state_cap={state_cap}: "
            f"utiliser le mode dtmc-marginal ou la simulation"
        )


# ============================================================
# Matrice d'un relais
# ============================================================

def _gain_ratio(energy: float, per_unit_gain: float) -> float:
    """Seuil sur g pour récolter `energy` quand E = per_unit_gain * g."""
    if energy <= 0.0:
        return 0.0
    if per_unit_gain <= 0.0:
        return INF
    return energy / per_unit_gain


def per_relay_matrix(relay: int, params: SystemParams) -> TransitionMatrix:
    """
    Entrée (m, n): probabilité qu'un relais au niveau m passe au niveau n,
    en transmettant s'il est en mode forwarding et en récoltant sinon.

    Forwarding (g >= T N0/P, h >= T/b_m): reste b_m - T/h, donc niveau n
    ssi h dans [T/(b_m - b_n), T/(b_m - b_{n+1})).
    Charging: A_c(m) = (h < T/b_m) U [(h >= T/b_m) n (g < T N0/P)], puis
    niveau n ssi b_n <= b_m + P g kappa < b_{n+1} (n = L+1: >= B).
    """
    if not 0 <= relay < params.n_relays:
        raise IndexError(f"relais {relay} hors de [0, {params.n_relays - 1}]")
    b = level_boundaries(params)
    top = params.levels + 1
    t = params.threshold
    gamma = params.decode_gain
    per_unit = params.source_power * params.kappa

    def G(x):
        return exp_cdf(x, params.mean_g[relay])

    def H(x):
        return exp_cdf(x, params.mean_h[relay])

    decode = 1.0 - G(gamma)
    p = np.zeros((top + 1, top + 1))
    for m in range(top + 1):
        fh = H(energy_ratio(t, b[m]))

        # forwarding -> niveaux n <= m
        if t == 0.0:
            p[m, m] += decode * (1.0 - fh)
        else:
            for n in range(m):
                p[m, n] += decode * (H(energy_ratio(t, b[m] - b[n + 1])) - H(energy_ratio(t, b[m] - b[n])))

        # charging -> niveaux n >= m
        for n in range(m, top + 1):
            lo = _gain_ratio(b[n] - b[m], per_unit)
            hi = INF if n == top else _gain_ratio(b[n + 1] - b[m], per_unit)
            p_all = G(hi) - G(lo)
            p_fail = max(0.0, G(min(hi, gamma)) - G(min(lo, gamma)))
            p[m, n] += fh * p_all + (1.0 - fh) * p_fail

    return TransitionMatrix(entries=p, mode="per-relay")


def printed_relay_matrix(relay: int, params: SystemParams) -> np.ndarray:
    """
    Variante naïve de per_relay_matrix: termes de charge sans le facteur
    (1 - F_h(T/b_m)), seuils de charge partielle en (b_{n+1} - b_n) et
    F_h(T/kappa). Pour comparaison seulement: les lignes ne somment pas à 1
    en général.
    """
    if not 0 <= relay < params.n_relays:
        raise IndexError(f"relais {relay} hors de [0, {params.n_relays - 1}]")
    b = level_boundaries(params)
    top = params.levels + 1
    t = params.threshold
    gamma = params.decode_gain
    per_unit = params.source_power * params.kappa
    B = params.capacity

    def G(x):
        return exp_cdf(x, params.mean_g[relay])

    def H(x):
        return exp_cdf(x, params.mean_h[relay])

    q = np.zeros((top + 1, top + 1))
    for m in range(top + 1):
        for n in range(top + 1):
            if m == n == top:
                q[m, n] = prob_charging(top, relay, params)  # plein, reste plein
            elif m == n:
                step = _gain_ratio(b[1], per_unit)
                q[m, n] = G(step) * H(energy_ratio(t, b[m])) + G(min(gamma, step))  # même niveau
            elif m == 0 and n == top:
                q[m, n] = 1.0 - G(_gain_ratio(B, per_unit))  # vide -> plein
            elif m == 0:
                q[m, n] = G(_gain_ratio(b[n + 1], per_unit)) - G(_gain_ratio(b[n], per_unit))  # vide -> partiel
            elif n < m:
                q[m, n] = (1.0 - G(gamma)) * (
                    H(energy_ratio(t, b[m] - b[n + 1])) - H(energy_ratio(t, b[m] - b[n]))
                )  # décharge
            elif n == top:
                room = _gain_ratio(B - b[m], per_unit)
                extra = 0.0 if gamma <= room else G(gamma) - G(room)
                q[m, n] = H(energy_ratio(t, b[m])) * (1.0 - G(room)) + extra  # -> plein
            else:
                lo = _gain_ratio(b[n] - b[m], per_unit)
                hi = _gain_ratio(b[n + 1] - b[m], per_unit)
                first = H(energy_ratio(t, params.kappa)) * (
                    G(_gain_ratio(b[n + 1] - b[n], per_unit)) - G(lo)
                )
                if gamma < lo:
                    extra = 0.0
                elif gamma < hi:
                    extra = G(gamma) - G(lo)
                else:
                    extra = G(hi) - G(lo)
                q[m, n] = first + extra  # charge partielle
    return q


# ============================================================
# Matrices jointes
# ============================================================

def joint_matrix_product_form(params: SystemParams, state_cap: int = DEFAULT_STATE_CAP) -> TransitionMatrix:
    """p_{j,k} = prod_i P_i[m_i, n_i] (produit de Kronecker des matrices par relais)."""
    _check_cap(params, state_cap)
    mats = [per_relay_matrix(i, params).entries for i in range(params.n_relays)]
    return TransitionMatrix(entries=reduce(np.kron, mats), mode="product-form")


def joint_matrix_mc(params: SystemParams, samples_per_state: int, seed: int,
                    state_cap: int = DEFAULT_STATE_CAP, verbose: bool = False) -> TransitionMatrix:
    """
    Estimation Monte Carlo de la matrice jointe avec la dynamique BARS exacte
    (seul le relais choisi dans F(s) se décharge).
    """
    if samples_per_state < 1:
        raise ValueError(f"samples_per_state doit être >= 1 (reçu {samples_per_state})")
    _check_cap(params, state_cap)
    n_states = params.n_states
    dims = (params.levels + 2,) * params.n_relays
    bounds = level_boundaries(params)
    rng = np.random.default_rng(seed)

    p = np.zeros((n_states, n_states))
    for j in range(n_states):
        levels = decode_state(j, params.n_relays, params.levels).levels
        counts = np.zeros(n_states, dtype=np.int64)
        remaining = samples_per_state
        while remaining > 0:
            size = min(MC_BATCH, remaining)
            g, h = sample_channels_batch(params, rng, size)
            nxt, _ = bars_step_batch(levels, g, h, params, bounds)
            counts += np.bincount(np.ravel_multi_index(nxt.T, dims), minlength=n_states)
            remaining -= size
        p[j] = counts / samples_per_state
        if verbose and (j + 1) % max(n_states // 10, 1) == 0:
            print(f"  ligne {j + 1}/{n_states}", file=sys.stderr)

    return TransitionMatrix(entries=p, mode="mc-joint")


# ============================================================
# Régime stationnaire et outage
# ============================================================

def steady_state(matrix: Union[TransitionMatrix, np.ndarray], tol: float = None,
                 max_iter: int = 200_000, damping: float = 0.5) -> SteadyState:
    """
    Résout pi P = pi, sum(pi) = 1.
    - ordre <= 4096: résolution directe (une équation remplacée par la normalisation)
    - au-delà: itération de la puissance amortie pi <- (1-d) pi + d pi P
    """
    p = matrix.entries if isinstance(matrix, TransitionMatrix) else np.asarray(matrix, dtype=float)
    n = p.shape[0]

    if n <= DIRECT_SOLVE_MAX:
        tol = DIRECT_TOL if tol is None else tol
        a = p.T - np.eye(n)
        a[-1, :] = 1.0
        rhs = np.zeros(n)
        rhs[-1] = 1.0
        try:
            pi = np.linalg.solve(a, rhs)
        except np.linalg.LinAlgError as e:
            raise SolverError(f"Système singulier (chaîne réductible ?): {e}") from e
    else:
        tol = ITERATIVE_TOL if tol is None else tol
        pi = np.full(n, 1.0 / n)
        for _ in range(max_iter):
            pi_p = pi @ p
            if np.max(np.abs(pi_p - pi)) <= tol:
                break
            pi = (1.0 - damping) * pi + damping * pi_p
        else:
            raise SolverError(f"Pas de convergence en {max_iter} itérations")

    if np.any(pi < -1e-9) or not np.all(np.isfinite(pi)):
        raise SolverError("Solution non positive: chaîne réductible ou mal conditionnée")
    pi = np.clip(pi, 0.0, None)
    pi = pi / pi.sum()
    residual = float(np.max(np.abs(pi @ p - pi)))
    if residual > tol:
        raise SolverError(f"Résidu {residual:.3g} > tolérance {tol:.3g}")
    return SteadyState(pi=pi, residual=residual)


def outage_probability(steady: SteadyState, params: SystemParams) -> float:
    """P_out = sum_j pi_j prod_i Pr[A_c(V_i)]."""
    pi = np.asarray(steady.pi)
    if pi.shape != (params.n_states,):
        raise ValueError(f"Dimension de pi {pi.shape} != ({params.n_states},)")
    charging = reduce(np.kron, [charging_vector(i, params) for i in range(params.n_relays)])
    return float(pi @ charging)


def marginal_product_outage(params: SystemParams) -> float:
    """Chaînes par relais supposées indépendantes: prod_i sum_m pi_i(m) Pr[A_c(m)]."""
    out = 1.0
    for i in range(params.n_relays):
        pi_i = steady_state(per_relay_matrix(i, params)).pi
        out *= float(pi_i @ charging_vector(i, params))
    return out


def analyze(params: SystemParams, mode: Mode, samples_per_state: int = 100_000, seed: int = 1,
            state_cap: int = DEFAULT_STATE_CAP, verbose: bool = False) -> float:
    """Outage BARS en un appel pour un mode dtmc-*."""
    if mode is Mode.DTMC_MARGINAL:
        return marginal_product_outage(params)
    if mode is Mode.DTMC_PRODUCT:
        matrix = joint_matrix_product_form(params, state_cap)
    elif mode is Mode.DTMC_MC:
        matrix = joint_matrix_mc(params, samples_per_state, seed, state_cap, verbose)
    else:
        raise ValueError(f"Mode non analytique: {mode.value}")
    return outage_probability(steady_state(matrix), params)


def dump_matrix(matrix: TransitionMatrix, path: str):
    """Texte brut: en-tête `order=<n> mode=<tag>` puis une ligne par ligne de matrice."""
    np.savetxt(path, matrix.entries, fmt="%.17g", delimiter=" ",
               header=f"order={matrix.order} mode={matrix.mode}", comments="")


def dump_printed_matrices(params: SystemParams, path: str):
    """
    Écrit la variante naïve de chaque relais, à la suite dans un même fichier:
    en-tête `relay=<i> order=<n> mode=printed` puis les lignes (non stochastiques
    en général, d'où l'absence de TransitionMatrix).
    """
    with open(path, "w", encoding="utf-8") as f:
        for i in range(params.n_relays):
            q = printed_relay_matrix(i, params)
            np.savetxt(f, q, fmt="%.17g", delimiter=" ",
                       header=f"relay={i} order={q.shape[0]} mode=printed", comments="")
