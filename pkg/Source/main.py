"""
Main script - Simulateur BARS (relais à récupération d'énergie)

Sous-commandes:
- simulate: une simulation Monte Carlo (un point)
- analyze:  outage BARS par chaîne de Markov (dtmc-product / dtmc-mc / dtmc-marginal)
            (--printed: variante naïve des matrices par relais, pour comparaison)
- sweep:    balayage d'un paramètre (sim ou dtmc-*)
- figures:  CSV des courbes fig2..fig5

Les options surchargent les valeurs du fichier --config clé par clé.
"""
import argparse
import sys

from experiences import (FIGURES, ConfigError, build_config, figures, load_config_file,
                         run_experiment, to_csv_text)
from outils import diversity_slope

# option argparse (dest) -> clé de configuration
FLAG_KEYS = {
    "policy": "policy",
    "mode": "mode",
    "snr_db": "snr_db",
    "relays": "n_relays",
    "levels": "levels",
    "alpha": "alpha",
    "kappa": "kappa",
    "rate": "rate",
    "noise": "noise",
    "slots": "slots",
    "warmup": "warmup_slots",
    "seed": "seed",
    "samples": "mc_samples_per_state",
    "sweep_axis": "sweep_axis",
    "sweep_values": "sweep_values",
    "workers": "workers",
    "dump_matrix": "dump_matrix",
    "printed": "printed_matrix",
    "replicas": "replicas",
    "out": "out",
}


def _add_common(parser: argparse.ArgumentParser):
    parser.add_argument("--config", help="fichier clé=valeur")
    parser.add_argument("--policy", help="bars | csi | benchmark | random")
    parser.add_argument("--mode", help="sim | dtmc-product | dtmc-mc | dtmc-marginal")
    parser.add_argument("--snr-db", dest="snr_db", help="SNR P/N0 en dB")
    parser.add_argument("--relays", help="nombre de relais N")
    parser.add_argument("--levels", help="niveaux de batterie L")
    parser.add_argument("--alpha", help="facteur de taille batterie (B = alpha P)")
    parser.add_argument("--kappa", help="rendement de conversion")
    parser.add_argument("--rate", help="débit R (bits/s/Hz)")
    parser.add_argument("--noise", help="puissance de bruit N0")
    parser.add_argument("--slots", help="nombre de slots simulés")
    parser.add_argument("--warmup", help="slots de chauffe non comptés")
    parser.add_argument("--seed", help="graine")
    parser.add_argument("--samples", help="tirages Monte Carlo par état (dtmc-mc)")
    parser.add_argument("--workers", help="processus pour les balayages")
    parser.add_argument("--out", help="fichier CSV (défaut: sortie standard)")
    parser.add_argument("--quiet", action="store_true", help="pas de messages de progression")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bars",
        description="Outage de relais à récupération d'énergie: simulation et analyse DTMC.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="simulation Monte Carlo d'un point")
    _add_common(p_sim)
    p_sim.add_argument("--continuous", action="store_true", help="batterie continue (non quantifiée)")
    p_sim.add_argument("--replicas", help="trajectoires indépendantes regroupées (une par processus)")

    p_ana = sub.add_parser("analyze", help="analyse DTMC (BARS)")
    _add_common(p_ana)
    p_ana.add_argument("--dump-matrix", dest="dump_matrix", help="écrit la matrice de transition")
    p_ana.add_argument("--printed", help="écrit aussi la variante naïve des matrices par relais (comparaison)")

    p_swp = sub.add_parser("sweep", help="balayage d'un paramètre")
    _add_common(p_swp)
    p_swp.add_argument("--sweep-axis", dest="sweep_axis",
                       help="snr_db | kappa | alpha | levels | n_relays | rate | policy")
    p_swp.add_argument("--sweep-values", dest="sweep_values", help="valeurs séparées par des virgules")
    p_swp.add_argument("--replicas", help="trajectoires indépendantes regroupées par point")

    p_fig = sub.add_parser("figures", help="CSV des figures")
    p_fig.add_argument("name", help=" | ".join(FIGURES))
    p_fig.add_argument("--out-dir", dest="out_dir", default="figures", help="répertoire de sortie")
    p_fig.add_argument("--slots", type=int, help="slots par point (défaut: 1e6, relevé à 1e7 si p_out < 1e-4)")
    p_fig.add_argument("--grid", help="grille de l'axe, valeurs séparées par des virgules")
    p_fig.add_argument("--samples", type=int, default=1_000_000, help="tirages par état (dtmc-mc)")
    p_fig.add_argument("--seed", type=int, default=1, help="graine")
    p_fig.add_argument("--workers", type=int, help="processus")
    p_fig.add_argument("--quiet", action="store_true", help="pas de messages de progression")
    return parser


def _collect_pairs(args: argparse.Namespace) -> dict:
    pairs = load_config_file(args.config) if args.config else {}
    for dest, key in FLAG_KEYS.items():
        value = getattr(args, dest, None)
        if value is not None:
            pairs[key] = value
    if getattr(args, "continuous", False):
        pairs["continuous_battery"] = "true"
    return pairs


def _run_command(args: argparse.Namespace) -> int:
    verbose = not args.quiet
    log = sys.stderr

    if args.command == "figures":
        grid = None
        if args.grid:
            try:
                grid = [float(s) for s in args.grid.split(",") if s.strip()]
            except ValueError:
                raise ConfigError(f"--grid: nombre invalide dans '{args.grid}'", key="--grid") from None
        paths = figures(args.name, args.out_dir, slots=args.slots, grid=grid,
                        mc_samples=args.samples, seed=args.seed, workers=args.workers,
                        verbose=verbose)
        if verbose:
            print(f"\n✓ {len(paths)} fichier(s) écrit(s) dans {args.out_dir}", file=log)
        return 0

    pairs = _collect_pairs(args)
    if args.command == "simulate":
        if pairs.get("mode", "sim") != "sim":
            raise ConfigError("simulate: --mode doit être 'sim'", key="--mode")
        if pairs.get("sweep_axis"):
            raise ConfigError("simulate: utiliser la sous-commande sweep", key="sweep_axis")
        pairs["mode"] = "sim"
    elif args.command == "analyze":
        pairs.setdefault("mode", "dtmc-product")
        if pairs["mode"] == "sim":
            raise ConfigError("analyze: --mode doit être dtmc-product, dtmc-mc ou dtmc-marginal", key="--mode")
    elif args.command == "sweep":
        if not pairs.get("sweep_axis"):
            raise ConfigError("sweep: --sweep-axis requis", key="--sweep-axis")
        if not pairs.get("sweep_values"):
            raise ConfigError("sweep: --sweep-values requis", key="--sweep-values")

    config = build_config(pairs)
    if verbose:
        params = config.params
        print("=" * 70, file=log)
        print(f"BARS - {args.command} ({config.mode.value}, politique {config.policy.value})", file=log)
        print("=" * 70, file=log)
        print(f"  N={params.n_relays}, L={params.levels}, SNR={params.snr_db:.1f} dB, "
              f"R={params.rate:g} (T={params.threshold:g}), kappa={params.kappa:g}, alpha={params.alpha:g}",
              file=log)

    table = run_experiment(config, verbose=verbose)
    if not config.out:
        sys.stdout.write(to_csv_text(table))

    if verbose and config.sweep_axis == "snr_db":
        try:
            slope = diversity_slope(table["snr_db"], table["p_out"])
            print(f"  Ordre de diversité estimé: {-slope:.2f}", file=log)
        except ValueError as e:
            print(f"  Ordre de diversité: non estimé ({e})", file=log)
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _run_command(args)
    except ConfigError as e:
        print(f"Erreur: {e}", file=sys.stderr)
        return 2
    except (ValueError, RuntimeError, OSError) as e:
        print(f"Erreur: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
