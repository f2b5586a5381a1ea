"""
Expériences: lecture de la configuration `clé=valeur`, exécution d'un point
ou d'un balayage (simulation ou analyse DTMC), écriture CSV, et
reproduction des figures (courbes outage vs SNR / kappa / alpha / politique).
"""
import math
import os
import sys
from dataclasses import replace
from typing import Optional, Sequence

import pandas as pd

from markov import (DEFAULT_STATE_CAP, DIRECT_SOLVE_MAX, dump_matrix, dump_printed_matrices,
                    joint_matrix_mc, joint_matrix_product_form, marginal_product_outage,
                    outage_probability, steady_state)
from modele import make_params
from outils import derive_seed
from simulateur import SWEEP_AXES, apply_axis, run, run_replicated, run_sweep
from structure import ExperimentConfig, Mode, Policy, SimConfig

# ============================================================
# Clés de configuration et valeurs par défaut
# ============================================================

DEFAULTS = {
    "policy": "bars",
    "mode": "sim",
    "snr_db": "10",
    "n_relays": "2",
    "levels": "1",
    "alpha": "1",
    "kappa": "0.5",
    "rate": "1",
    "noise": "1",
    "mean_g": "1",
    "mean_h": "1",
    "slots": "1000000",
    "warmup_slots": "0",
    "seed": "1",
    "mc_samples_per_state": "100000",
    "sweep_axis": "",
    "sweep_values": "",
    "out": "",
    "initial_level": "",
    "continuous_battery": "false",
    "workers": "",
    "state_cap": str(DEFAULT_STATE_CAP),
    "dump_matrix": "",
    "printed_matrix": "",
    "replicas": "1",
}

# champ de SystemParams -> clé de configuration correspondante
PARAM_KEYS = {"source_power": "snr_db", "noise_power": "noise"}

CSV_COLUMNS = ["policy", "mode", "snr_db", "n_relays", "levels", "alpha", "kappa", "rate",
               "p_out", "ci_low", "ci_high", "slots", "seed"]

# seuil sous lequel une figure relance un point avec plus de slots
LOW_OUTAGE = 1e-4
DEFAULT_SLOTS = 1_000_000
RAISED_SLOTS = 10_000_000


class ConfigError(ValueError):
    """Erreur de configuration; `key` est la clé (ou l'option) fautive."""

    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key


def parse_pairs(text: str) -> dict:
    """Lignes `clé=valeur` -> dict (commentaires # et lignes vides ignorés)."""
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"Ligne {lineno}: 'clé=valeur' attendu, reçu '{line}'", key=line)
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"Clé inconnue '{key}' (ligne {lineno})", key=key)
        pairs[key] = value
    return pairs


def _to_float(key: str, text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise ConfigError(f"{key}: nombre invalide '{text}'", key=key) from None
    if not math.isfinite(value):
        raise ConfigError(f"{key}: valeur finie attendue, reçu '{text}'", key=key)
    return value


def _to_int(key: str, text: str) -> int:
    try:
        return int(text)
    except ValueError:
        pass
    value = _to_float(key, text)  # accepte 1e6
    if not value.is_integer():
        raise ConfigError(f"{key}: entier attendu, reçu '{text}'", key=key)
    return int(value)


def _to_bool(key: str, text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "oui", "on"):
        return True
    if low in ("0", "false", "no", "non", "off"):
        return False
    raise ConfigError(f"{key}: booléen attendu, reçu '{text}'", key=key)


def _to_list(key: str, text: str, conv) -> list:
    items = [s.strip() for s in text.split(",") if s.strip()]
    return [conv(key, s) for s in items]


def _sweep_value(key: str, axis: str, text: str):
    if axis == "policy":
        try:
            return Policy.parse(text)
        except ValueError as e:
            raise ConfigError(f"{key}: {e}", key=key) from None
    if axis in ("levels", "n_relays"):
        return _to_int(key, text)
    return _to_float(key, text)


def build_config(pairs: dict) -> ExperimentConfig:
    """Valeurs par défaut + validation -> ExperimentConfig."""
    unknown = set(pairs) - set(DEFAULTS)
    if unknown:
        key = sorted(unknown)[0]
        raise ConfigError(f"Clé inconnue '{key}'", key=key)
    raw = {**DEFAULTS, **{k: str(v) for k, v in pairs.items()}}

    try:
        policy = Policy.parse(raw["policy"])
    except ValueError as e:
        raise ConfigError(f"policy: {e}", key="policy") from None
    try:
        mode = Mode.parse(raw["mode"])
    except ValueError as e:
        raise ConfigError(f"mode: {e}", key="mode") from None
    if mode.is_analytic and policy is not Policy.BARS:
        raise ConfigError(
            f"mode={mode.value} n'analyse que BARS (policy={policy.value} incompatible)", key="mode"
        )

    n_relays = _to_int("n_relays", raw["n_relays"])
    levels = _to_int("levels", raw["levels"])
    try:
        params = make_params(
            n_relays=n_relays,
            levels=levels,
            snr_db=_to_float("snr_db", raw["snr_db"]),
            rate=_to_float("rate", raw["rate"]),
            kappa=_to_float("kappa", raw["kappa"]),
            alpha=_to_float("alpha", raw["alpha"]),
            noise=_to_float("noise", raw["noise"]),
            mean_g=_to_list("mean_g", raw["mean_g"], _to_float),
            mean_h=_to_list("mean_h", raw["mean_h"], _to_float),
        )
    except ConfigError:
        raise
    except OverflowError:
        raise ConfigError(f"snr_db: puissance non représentable (snr_db={raw['snr_db']})", key="snr_db") from None
    except ValueError as e:
        key = str(e).split(" ", 1)[0].rstrip(":")
        raise ConfigError(str(e), key=PARAM_KEYS.get(key, key)) from None

    initial_level = _to_int("initial_level", raw["initial_level"]) if raw["initial_level"] else None
    try:
        sim = SimConfig(
            params=params,
            policy=policy,
            slots=_to_int("slots", raw["slots"]),
            warmup_slots=_to_int("warmup_slots", raw["warmup_slots"]),
            seed=_to_int("seed", raw["seed"]),
            initial_level=initial_level,
            continuous_battery=_to_bool("continuous_battery", raw["continuous_battery"]),
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e), key=str(e).split(" ", 1)[0]) from None
    if sim.seed < 0:
        raise ConfigError(f"seed doit être >= 0 (reçu {sim.seed})", key="seed")

    axis = raw["sweep_axis"].strip() or None
    values_text = raw["sweep_values"].strip()
    if axis is None and values_text:
        raise ConfigError("sweep_values donné sans sweep_axis", key="sweep_axis")
    values = ()
    if axis is not None:
        if axis not in SWEEP_AXES:
            raise ConfigError(
                f"sweep_axis inconnu '{axis}' (attendu: {', '.join(SWEEP_AXES)})", key="sweep_axis"
            )
        if mode.is_analytic and axis == "policy":
            raise ConfigError("sweep_axis=policy incompatible avec un mode dtmc-*", key="sweep_axis")
        values = tuple(_sweep_value("sweep_values", axis, s)
                       for s in values_text.split(",") if s.strip())
        if not values:
            raise ConfigError("sweep_values vide alors qu'un balayage est demandé", key="sweep_values")

    samples = _to_int("mc_samples_per_state", raw["mc_samples_per_state"])
    if samples < 1:
        raise ConfigError(f"mc_samples_per_state doit être >= 1 (reçu {samples})", key="mc_samples_per_state")
    state_cap = _to_int("state_cap", raw["state_cap"])
    workers = _to_int("workers", raw["workers"]) if raw["workers"] else None
    if workers is not None and workers < 1:
        raise ConfigError(f"workers doit être >= 1 (reçu {workers})", key="workers")
    replicas = _to_int("replicas", raw["replicas"])
    if replicas < 1:
        raise ConfigError(f"replicas doit être >= 1 (reçu {replicas})", key="replicas")
    if replicas > 1 and mode.is_analytic:
        raise ConfigError(f"replicas={replicas} n'a de sens qu'en mode sim", key="replicas")

    return ExperimentConfig(
        sim=sim,
        mode=mode,
        sweep_axis=axis,
        sweep_values=values,
        out=raw["out"] or None,
        mc_samples_per_state=samples,
        workers=workers,
        state_cap=state_cap,
        dump_matrix=raw["dump_matrix"] or None,
        printed_matrix=raw["printed_matrix"] or None,
        replicas=replicas,
    )


def parse_config(text: str) -> ExperimentConfig:
    return build_config(parse_pairs(text))


def load_config_file(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as f:
        return parse_pairs(f.read())


# ============================================================
# Exécution
# ============================================================

def _row(sim: SimConfig, mode: Mode, p_out: float, ci_low: float, ci_high: float,
         slots: int, seed: int) -> dict:
    params = sim.params
    return {
        "policy": sim.policy.value,
        "mode": mode.value,
        "snr_db": params.snr_db,
        "n_relays": params.n_relays,
        "levels": params.levels,
        "alpha": params.alpha,
        "kappa": params.kappa,
        "rate": params.rate,
        "p_out": p_out,
        "ci_low": ci_low,
        "ci_high": ci_high,
        "slots": slots,
        "seed": seed,
    }


def _analytic_row(sim: SimConfig, mode: Mode, samples: int, state_cap: int,
                  dump_path: Optional[str] = None, verbose: bool = False) -> dict:
    params = sim.params
    slots = 0
    if mode is Mode.DTMC_MARGINAL:
        p_out = marginal_product_outage(params)
    else:
        if mode is Mode.DTMC_PRODUCT:
            matrix = joint_matrix_product_form(params, state_cap)
        else:
            matrix = joint_matrix_mc(params, samples, sim.seed, state_cap, verbose)
            slots = samples * params.n_states
        if dump_path:
            dump_matrix(matrix, dump_path)
            if verbose:
                print(f"✓ Matrice écrite: {dump_path}", file=sys.stderr)
        p_out = outage_probability(steady_state(matrix), params)
    return _row(sim, mode, p_out, p_out, p_out, slots, sim.seed)


def _points(config: ExperimentConfig) -> list[SimConfig]:
    if config.sweep_axis is None:
        return [config.sim]
    return [replace(apply_axis(config.sim, config.sweep_axis, v), seed=derive_seed(config.sim.seed, k))
            for k, v in enumerate(config.sweep_values)]


def evaluate(config: ExperimentConfig, verbose: bool = False) -> pd.DataFrame:
    """Calcule les lignes de résultats (une par point de balayage, dans l'ordre)."""
    if config.mode is Mode.SIM:
        if config.sweep_axis is None:
            estimates = [run_replicated(config.sim, config.replicas, config.workers, verbose)]
        else:
            estimates = run_sweep(config.sim, config.sweep_axis, config.sweep_values,
                                  workers=config.workers, verbose=verbose, replicas=config.replicas)
        rows = [_row(sim, Mode.SIM, e.p_out, e.ci_low, e.ci_high, sim.slots * config.replicas, e.seed)
                for sim, e in zip(_points(config), estimates)]
    else:
        points = _points(config)
        dump_path = config.dump_matrix if len(points) == 1 else None
        rows = []
        for sim in points:
            rows.append(_analytic_row(sim, config.mode, config.mc_samples_per_state,
                                      config.state_cap, dump_path, verbose))
            if verbose:
                print(f"  ✓ {config.mode.value}: p_out={rows[-1]['p_out']:.4g}", file=sys.stderr)
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def to_csv_text(table: pd.DataFrame) -> str:
    return table.to_csv(index=False, float_format="%.9g", lineterminator="\n")


def write_csv(table: pd.DataFrame, path: str):
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(to_csv_text(table))


def run_experiment(config: ExperimentConfig, verbose: bool = False) -> pd.DataFrame:
    """Évalue la configuration et écrit le CSV dans `config.out` (si donné)."""
    table = evaluate(config, verbose=verbose)
    if config.printed_matrix:
        dump_printed_matrices(config.params, config.printed_matrix)
        if verbose:
            print(f"✓ Matrices naïves écrites: {config.printed_matrix}", file=sys.stderr)
    if config.out:
        write_csv(table, config.out)
        if verbose:
            print(f"✓ CSV écrit: {config.out} ({len(table)} lignes)", file=sys.stderr)
    return table


# ============================================================
# Figures
# ============================================================

SNR_GRID = [float(x) for x in range(0, 41, 5)]
KAPPA_GRID = [round(0.1 * k, 1) for k in range(1, 11)]
ALPHA_GRID = [round(0.1 * k, 1) for k in range(2, 15)]
FIGURES = ("fig2", "fig3", "fig4", "fig5")


def _theory_modes(levels: int, n_relays: int) -> list[Mode]:
    if levels == 1:
        return [Mode.DTMC_PRODUCT, Mode.DTMC_MC]
    if (levels + 2) ** n_relays <= DIRECT_SOLVE_MAX:
        return [Mode.DTMC_PRODUCT]
    return [Mode.DTMC_MARGINAL]


def _figure_curves(name: str):
    """(nom de courbe, paramètres de base, politique, axe, modes théoriques)."""
    curves = []
    if name == "fig2":
        for levels in (1, 100):
            for n in (2, 3):
                params = make_params(n_relays=n, levels=levels, alpha=1.0, kappa=0.5, rate=1.0)
                curves.append((f"L{levels}_N{n}", params, Policy.BARS, "snr_db", _theory_modes(levels, n)))
    elif name == "fig3":
        for levels in (1, 10, 100):
            for snr in (10.0, 20.0):
                params = make_params(n_relays=3, levels=levels, snr_db=snr, alpha=1.0, rate=1.0)
                curves.append((f"L{levels}_snr{snr:g}", params, Policy.BARS, "kappa", _theory_modes(levels, 3)))
    elif name == "fig4":
        for n in (2, 3, 4):
            params = make_params(n_relays=n, levels=100, snr_db=20.0, kappa=0.5, rate=2.0)
            curves.append((f"N{n}", params, Policy.BARS, "alpha", []))
    elif name == "fig5":
        for n in (2, 3):
            params = make_params(n_relays=n, levels=10, kappa=0.5, alpha=1.0, rate=1.0)
            for policy in (Policy.BARS, Policy.CSI, Policy.BENCHMARK):
                curves.append((f"N{n}_{policy.value}", params, policy, "snr_db", []))
    else:
        raise ConfigError(f"Figure inconnue '{name}' (attendu: {', '.join(FIGURES)})", key="figure")
    return curves


def _default_grid(axis: str) -> list:
    return {"snr_db": SNR_GRID, "kappa": KAPPA_GRID, "alpha": ALPHA_GRID}[axis]


def _adaptive_sweep(base: SimConfig, axis: str, values: Sequence, raise_slots: bool,
                    workers: Optional[int], verbose: bool):
    estimates = run_sweep(base, axis, values, workers=workers, verbose=verbose)
    points = [replace(apply_axis(base, axis, v), seed=derive_seed(base.seed, k))
              for k, v in enumerate(values)]
    if raise_slots:
        for k, est in enumerate(estimates):
            if est.p_out < LOW_OUTAGE and points[k].slots < RAISED_SLOTS:
                points[k] = replace(points[k], slots=RAISED_SLOTS)
                if verbose:
                    print(f"  p_out < {LOW_OUTAGE:g} en {axis}={values[k]}: relance avec {RAISED_SLOTS} slots",
                          file=sys.stderr)
                estimates[k] = run(points[k])
    return points, estimates


def figures(name: str, out_dir: str, slots: Optional[int] = None, grid: Optional[Sequence] = None,
            mc_samples: int = 1_000_000, seed: int = 1, workers: Optional[int] = None,
            verbose: bool = False) -> list[str]:
    """
    Écrit un CSV par courbe de la figure `name` dans `out_dir`.
    Returns: chemins des fichiers écrits
    """
    curves = _figure_curves(name)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    for curve, params, policy, axis, theory in curves:
        values = list(grid) if grid is not None else _default_grid(axis)
        base = SimConfig(params=params, policy=policy, slots=slots or DEFAULT_SLOTS, seed=seed)
        if verbose:
            print(f"\n{name} / {curve}: {axis} = {values}", file=sys.stderr)

        points, estimates = _adaptive_sweep(base, axis, values, slots is None, workers, verbose)
        rows = [_row(sim, Mode.SIM, e.p_out, e.ci_low, e.ci_high, sim.slots, e.seed)
                for sim, e in zip(points, estimates)]
        path = os.path.join(out_dir, f"{name}_{curve}_sim.csv")
        write_csv(pd.DataFrame(rows, columns=CSV_COLUMNS), path)
        written.append(path)

        for mode in theory:
            rows = [_analytic_row(sim, mode, mc_samples, DEFAULT_STATE_CAP) for sim in points]
            path = os.path.join(out_dir, f"{name}_{curve}_{mode.value}.csv")
            write_csv(pd.DataFrame(rows, columns=CSV_COLUMNS), path)
            written.append(path)
        if verbose:
            print(f"  ✓ {curve}: {1 + len(theory)} fichier(s)", file=sys.stderr)
    return written
