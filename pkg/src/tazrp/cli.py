"""
Interface en ligne de commande (CLI) pour tazrp.

Chaque sous-commande passe par une fonction ``produce_<commande>(params)``
qui retourne les sorties sous forme {nom: octets}; ``replay`` réutilise ces
mêmes fonctions pour rejouer un manifeste.
"""

import argparse
import logging
import sys

import numpy as np

from .configspace import EllRule, enumerate_space, partition_wells, well_mass_report
from .exceptions import (
    ZRPError,
    ZRPDomainError,
    ZRPDivergenceError,
    ZRPSizeError,
)
from .generator import build_all
from .manifest import build_manifest, load_manifest, manifest_path_for, replay, write_manifest
from .metastability import (
    SWEEP_SCHEMA,
    TRACE_SCHEMA,
    convergence_table,
    h_conditions_report,
    i_alpha,
    limit_constants,
    reversible_limit,
    theorem1_prediction,
    trace_mean_rates,
    trend,
)
from .potential import capacity
from .simulate import (
    STATS_SCHEMA,
    TraceStatistics,
    export_segments_csv,
    jump_law_test,
    jump_target_test,
    m1_check,
    make_config,
    run_replicas,
    stationarity_test,
    trace_statistics,
)
from .utils.serialization import csv_bytes, dumps_json, write_artifact

logger = logging.getLogger(__name__)

EXIT_FAILURE = 1
EXIT_DOMAIN = 2
EXIT_SIZE = 3

SWEEP_COLUMNS = [
    "N", "ellN", "cardinality", "scaled_cap", "scaled_cap_sym", "prediction",
    "ratio", "ratio_sym", "reversible_limit", "discrete_ialpha", "i_alpha",
    "sandwich_ok", "infsup_ok", "error",
]


# -----------------------------------------------------
#   ANALYSE DES ARGUMENTS
# -----------------------------------------------------

def _int_list(text):
    """Analyse une liste d'entiers séparés par des virgules ("0,1")."""
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"liste d'entiers invalide: '{text}'")
    if not values:
        raise argparse.ArgumentTypeError("liste vide")
    return values


def _configuration(text):
    """Site initial ("0") ou vecteur d'occupation ("3,1,0")."""
    values = _int_list(text)
    return values[0] if len(values) == 1 else values


def resolve_ell(value, N, L, alpha):
    """
    ℓ_N donné comme entier ou comme règle ("sqrt", "pow:<γ>", "const:<k>", "default").
    """
    if value is None:
        value = "default"
    if isinstance(value, int):
        return value
    text = str(value).strip()
    if text.isdigit():
        return int(text)
    return EllRule.parse(text)(N, L, alpha)


def _complement(L, sites):
    sites = sorted({int(x) % L for x in sites})
    return sites, [y for y in range(L) if y not in sites]


def _prediction_or_none(func, *args):
    # la prédiction n'existe que pour α > 1
    try:
        return func(*args)
    except ZRPDivergenceError:
        return None


# -----------------------------------------------------
#   PRODUCTEURS (partagés avec replay)
# -----------------------------------------------------

def constants_payload(alpha):
    """Constantes limites; Γ(α) divergent est reporté dans ``gamma_error``."""
    payload = {"schema": "tazrp.constants/1", "alpha": alpha, "i_alpha": i_alpha(alpha)}
    try:
        payload.update(limit_constants(alpha).to_dict())
    except ZRPDivergenceError as e:
        payload.update({"gamma_alpha": None, "hop_rate": None, "gamma_error": str(e)})
    return payload


def produce_constants(params):
    return {"main": dumps_json(constants_payload(params["alpha"]))}


def produce_capacity(params):
    L, N, alpha = params["L"], params["N"], params["alpha"]
    space = enumerate_space(L, N, alpha)
    wells = partition_wells(space, params["ellN"])
    sites, others = _complement(L, params["A"])
    report = capacity(space, wells.union(sites), wells.union(others),
                      ellN=wells.ellN, labels=(sites, others),
                      dense_oracle=params.get("dense_oracle", False))
    payload = report.to_dict()
    payload.update({
        "cardinality": len(space),
        "scaled_cap": report.scaled(report.cap),
        "scaled_cap_sym": report.scaled(report.cap_sym),
        "prediction": _prediction_or_none(theorem1_prediction, L, alpha, sites),
        "reversible_limit": _prediction_or_none(reversible_limit, L, alpha, sites),
        "well_masses": well_mass_report(space, wells),
    })
    return {"main": dumps_json(payload)}


def produce_sweep(params):
    rows = convergence_table(params["L"], params["alpha"], params["A"], params["N_list"],
                             rule=params["rule"], epsilon=params.get("epsilon"),
                             workers=params.get("workers", 1))
    columns = list(SWEEP_COLUMNS)
    if params.get("epsilon") is not None:
        columns.insert(-1, "scaled_test_bound")
    ok = [row for row in rows if row.get("error") is None]
    footer = [
        f"trend ratio: {trend([row['ratio'] for row in ok])}",
        f"trend ratio_sym: {trend([row['ratio_sym'] for row in ok])}",
        f"failed rows: {len(rows) - len(ok)}",
    ]
    data = csv_bytes(columns, ([row.get(c) for c in columns] for row in rows),
                     schema=SWEEP_SCHEMA, footer_lines=footer)
    return {"main": data}


def produce_trace(params):
    L, N, alpha = params["L"], params["N"], params["alpha"]
    space = enumerate_space(L, N, alpha)
    wells = partition_wells(space, params["ellN"])
    ops = build_all(space)
    table = trace_mean_rates(space, wells, ops, check_identity=True)
    conditions = h_conditions_report(space, wells, ops, table, site=params.get("site", 0))
    payload = {
        "schema": TRACE_SCHEMA,
        "cardinality": len(space),
        "trace": table.to_dict(),
        "conditions": conditions,
    }
    return {"main": dumps_json(payload)}


def _pooled_statistics(per_replica):
    first = per_replica[0]
    return TraceStatistics(
        L=first.L,
        scale=first.scale,
        holding_times=[h for s in per_replica for h in s.holding_times],
        jump_counts=sum(s.jump_counts for s in per_replica),
        delta_fraction=float(np.mean([s.delta_fraction for s in per_replica])),
        censored_time=sum(s.censored_time for s in per_replica),
        hop_rate=first.hop_rate,
    )


def produce_simulate(params):
    L, N, alpha = params["L"], params["N"], params["alpha"]
    cfg = make_config(
        L=L, N=N, alpha=alpha, ellN=params["ellN"], seed=params["seed"],
        t_max=params["t_max"], initial=params.get("initial", 0),
        record_events=params.get("record_events", False),
        snapshot_interval=params.get("snapshot_interval"),
        max_events=params.get("max_events"),
    )
    trajectories = run_replicas(cfg, params.get("replicas", 1), params.get("workers", 1))
    per_replica = [trace_statistics(traj) for traj in trajectories]
    pooled = _pooled_statistics(per_replica)

    replicas = []
    for traj, stats_out in zip(trajectories, per_replica):
        entry = stats_out.to_dict()
        entry.update({
            "seed": traj.config.seed,
            "events": traj.events,
            "total_time": traj.total_time,
            "truncated": traj.truncated,
            "final": list(traj.final),
        })
        if cfg.record_events:
            entry["jump_law"] = jump_law_test(traj)
        replicas.append(entry)

    payload = {
        "schema": STATS_SCHEMA,
        "L": L,
        "N": N,
        "alpha": alpha,
        "ellN": cfg.ellN,
        "seed": cfg.seed,
        "replicas": replicas,
        "pooled": pooled.to_dict(),
    }
    if params.get("exact"):
        space = enumerate_space(L, N, alpha)
        if cfg.snapshot_interval is not None:
            payload["stationarity"] = [stationarity_test(traj, space) for traj in trajectories]
        if cfg.ellN >= 1 and alpha > 1:
            table = trace_mean_rates(space, partition_wells(space, cfg.ellN), check_identity=False)
            payload["jump_targets_test"] = jump_target_test(pooled, table)
    if params.get("m1_trials"):
        payload["m1"] = m1_check(L, N, alpha, cfg.ellN, trials=params["m1_trials"],
                                 seed=cfg.seed).to_dict()

    outputs = {"main": dumps_json(payload)}
    if params.get("trajectory"):
        outputs["trajectory"] = export_segments_csv(trajectories[0])
    return outputs


PRODUCERS = {
    "constants": produce_constants,
    "capacity": produce_capacity,
    "sweep": produce_sweep,
    "trace": produce_trace,
    "simulate": produce_simulate,
}


# -----------------------------------------------------
#   ÉCRITURE DES SORTIES
# -----------------------------------------------------

def emit(subcommand, params, outputs, out=None, extra_paths=None, seed=None):
    """
    Écrit la sortie principale (stdout ou ``out``), les sorties annexes et
    le manifeste (``<out>.manifest.json`` ou stderr).
    """
    paths = {"main": out or "-"}
    paths.update(extra_paths or {})
    for name, data in outputs.items():
        path = paths.get(name, "-")
        if path == "-":
            sys.stdout.buffer.write(data)
            sys.stdout.flush()
        else:
            write_artifact(path, data)
            print(f"✅ {name}: {path}", file=sys.stderr)

    manifest = build_manifest(subcommand, params, outputs, paths, seed=seed)
    if out:
        manifest_file = manifest_path_for(out)
        write_manifest(manifest, manifest_file)
        print(f"📝 Manifeste: {manifest_file}", file=sys.stderr)
    else:
        sys.stderr.write(dumps_json(manifest.to_dict()).decode("utf-8"))
    return manifest


def _abort(e):
    """Affiche l'erreur et quitte avec le code associé à son type."""
    if isinstance(e, ZRPSizeError):
        print(f"❌ Espace trop grand: {e}", file=sys.stderr)
        sys.exit(EXIT_SIZE)
    if isinstance(e, ZRPDomainError):
        print(f"❌ Paramètre invalide: {e}", file=sys.stderr)
        sys.exit(EXIT_DOMAIN)
    print(f"❌ Erreur tazrp: {e}", file=sys.stderr)
    sys.exit(EXIT_FAILURE)


# -----------------------------------------------------
#   COMMANDES
# -----------------------------------------------------

def cmd_constants(args):
    """Commande pour calculer Γ(α), I_α et le taux limite"""
    try:
        params = {"alpha": args.alpha}
        outputs = produce_constants(params)
        emit("constants", params, outputs, args.out)
        if "gamma_error" in constants_payload(args.alpha):
            print(f"❌ Γ(α) diverge pour α = {args.alpha} ≤ 1", file=sys.stderr)
            sys.exit(EXIT_DOMAIN)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


def cmd_capacity(args):
    """Commande pour calculer Cap_N(𝓔_N(A), 𝓔_N(A^c))"""
    try:
        params = {
            "L": args.L,
            "N": args.N,
            "alpha": args.alpha,
            "ellN": resolve_ell(args.ellN, args.N, args.L, args.alpha),
            "A": args.A,
            "dense_oracle": args.dense_oracle,
        }
        print(f"🔌 Capacité L={args.L} N={args.N} α={args.alpha} ℓ_N={params['ellN']}...",
              file=sys.stderr)
        outputs = produce_capacity(params)
        emit("capacity", params, outputs, args.out)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


def cmd_sweep(args):
    """Commande pour la table de convergence en N"""
    try:
        EllRule.parse(args.ellN_rule)
        params = {
            "L": args.L,
            "alpha": args.alpha,
            "A": args.A,
            "N_list": args.N_list,
            "rule": args.ellN_rule,
            "epsilon": args.epsilon,
            "workers": args.workers,
        }
        print(f"📈 Balayage N ∈ {args.N_list} (règle ℓ_N: {args.ellN_rule})...", file=sys.stderr)
        outputs = produce_sweep(params)
        emit("sweep", params, outputs, args.out)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


def cmd_trace(args):
    """Commande pour les taux du processus trace et les conditions (H0)–(H2)"""
    try:
        params = {
            "L": args.L,
            "N": args.N,
            "alpha": args.alpha,
            "ellN": resolve_ell(args.ellN, args.N, args.L, args.alpha),
            "site": args.site,
        }
        print(f"🔁 Processus trace L={args.L} N={args.N} ℓ_N={params['ellN']}...", file=sys.stderr)
        outputs = produce_trace(params)
        emit("trace", params, outputs, args.out)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


def cmd_simulate(args):
    """Commande pour simuler la dynamique et ses statistiques trace"""
    try:
        params = {
            "L": args.L,
            "N": args.N,
            "alpha": args.alpha,
            "ellN": resolve_ell(args.ellN, args.N, args.L, args.alpha),
            "seed": args.seed,
            "t_max": args.tmax,
            "replicas": args.replicas,
            "workers": args.workers,
            "initial": args.initial,
            "record_events": args.record_events,
            "snapshot_interval": args.snapshot_interval,
            "max_events": args.max_events,
            "exact": args.exact,
            "m1_trials": args.m1_trials,
            "trajectory": bool(args.trajectory),
        }
        print(f"🎲 Simulation L={args.L} N={args.N} t_max={args.tmax} "
              f"({args.replicas} réplique(s), graine {args.seed})...", file=sys.stderr)
        outputs = produce_simulate(params)
        extra = {"trajectory": args.trajectory} if args.trajectory else None
        emit("simulate", params, outputs, args.out, extra, seed=args.seed)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


def cmd_replay(args):
    """Commande pour rejouer un manifeste et comparer les sorties"""
    try:
        manifest = load_manifest(args.manifest)
        print(f"🔍 Rejeu de '{manifest.subcommand}' ({args.manifest})...", file=sys.stderr)
        verdict = replay(manifest, PRODUCERS, rtol=args.rtol)
        sys.stdout.buffer.write(dumps_json({"subcommand": manifest.subcommand, "outputs": verdict}))
        sys.stdout.flush()
        if all(v in ("identical", "within_tolerance") for v in verdict.values()):
            print("✅ Sorties reproduites", file=sys.stderr)
        else:
            print("❌ Sorties divergentes", file=sys.stderr)
            sys.exit(EXIT_FAILURE)
    except ZRPError as e:
        _abort(e)
    except Exception as e:
        print(f"❌ Erreur: {e}", file=sys.stderr)
        sys.exit(EXIT_FAILURE)


# -----------------------------------------------------
#   POINT D'ENTRÉE
# -----------------------------------------------------

def _add_model_arguments(parser, with_n=True):
    parser.add_argument("--L", type=int, required=True, help="Nombre de sites du tore (≥ 2)")
    if with_n:
        parser.add_argument("--N", type=int, required=True, help="Nombre de particules")
    parser.add_argument("--alpha", type=float, required=True, help="Exposant α > 0")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="tazrp",
        description="Laboratoire numérique du processus de zéro-portée totalement asymétrique",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Exemples:
  # Constantes limites
  tazrp constants --alpha 4

  # Capacité entre puits
  tazrp capacity --L 3 --N 10 --alpha 2 --ellN 2 --A 0 --dense-oracle

  # Table de convergence
  tazrp sweep --L 3 --alpha 4 --ellN-rule sqrt --N-list 8,12,16 -o sweep.csv

  # Processus trace et conditions (H0)–(H2)
  tazrp trace --L 3 --N 16 --alpha 4 --ellN sqrt

  # Simulation reproductible
  tazrp simulate --L 3 --N 12 --alpha 2 --ellN 3 --seed 7 --tmax 1e5 --trajectory traj.csv.zst

  # Rejouer un manifeste
  tazrp replay sweep.csv.manifest.json
        """
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="Journalisation détaillée (DEBUG)")

    subparsers = parser.add_subparsers(dest="command", help="Commandes disponibles")

    # Commande constants
    constants_parser = subparsers.add_parser("constants", help="Γ(α), I_α et taux limite")
    constants_parser.add_argument("--alpha", type=float, required=True, help="Exposant α > 0")
    constants_parser.add_argument("-o", "--out", help="Fichier JSON de sortie (stdout par défaut)")
    constants_parser.set_defaults(func=cmd_constants)

    # Commande capacity
    capacity_parser = subparsers.add_parser("capacity", help="Capacité entre 𝓔_N(A) et 𝓔_N(A^c)")
    _add_model_arguments(capacity_parser)
    capacity_parser.add_argument("--ellN", default="default", help="ℓ_N (entier ou règle)")
    capacity_parser.add_argument("--A", type=_int_list, default=[0], help="Sites de A (ex. 0,1)")
    capacity_parser.add_argument("--dense-oracle", action="store_true",
                                 help="Ajoute l'oracle dense indépendant")
    capacity_parser.add_argument("-o", "--out", help="Fichier JSON de sortie (stdout par défaut)")
    capacity_parser.set_defaults(func=cmd_capacity)

    # Commande sweep
    sweep_parser = subparsers.add_parser("sweep", help="Table de convergence N^{1+α}·Cap_N")
    _add_model_arguments(sweep_parser, with_n=False)
    sweep_parser.add_argument("--ellN-rule", dest="ellN_rule", default="default",
                              help="Règle ℓ_N: sqrt, pow:<γ>, const:<k>, default")
    sweep_parser.add_argument("--N-list", dest="N_list", type=_int_list, required=True,
                              help="Valeurs de N (ex. 8,12,16)")
    sweep_parser.add_argument("--A", type=_int_list, default=[0], help="Sites de A (ex. 0,1)")
    sweep_parser.add_argument("--epsilon", type=float, default=None,
                              help="Ajoute le majorant par fonctions test (ε ∈ ]0, 1/6[)")
    sweep_parser.add_argument("--workers", type=int, default=1, help="Processus parallèles")
    sweep_parser.add_argument("-o", "--out", help="Fichier CSV de sortie (stdout par défaut)")
    sweep_parser.set_defaults(func=cmd_sweep)

    # Commande trace
    trace_parser = subparsers.add_parser("trace", help="Taux du processus trace et conditions (H)")
    _add_model_arguments(trace_parser)
    trace_parser.add_argument("--ellN", default="default", help="ℓ_N (entier ou règle)")
    trace_parser.add_argument("--site", type=int, default=0, help="Site des diagnostics (H1)")
    trace_parser.add_argument("-o", "--out", help="Fichier JSON de sortie (stdout par défaut)")
    trace_parser.set_defaults(func=cmd_trace)

    # Commande simulate
    simulate_parser = subparsers.add_parser("simulate", help="Simulation de la dynamique")
    _add_model_arguments(simulate_parser)
    simulate_parser.add_argument("--ellN", default="default", help="ℓ_N (entier ou règle)")
    simulate_parser.add_argument("--seed", type=int, default=0, help="Graine 64 bits")
    simulate_parser.add_argument("--tmax", type=float, required=True, help="Durée simulée")
    simulate_parser.add_argument("--replicas", type=int, default=1, help="Nombre de répliques")
    simulate_parser.add_argument("--workers", type=int, default=1, help="Processus parallèles")
    simulate_parser.add_argument("--initial", type=_configuration, default=0,
                                 help="Site du condensat initial ou vecteur d'occupation")
    simulate_parser.add_argument("--snapshot-interval", type=float, default=None,
                                 help="Intervalle entre deux échantillons d'état")
    simulate_parser.add_argument("--max-events", type=int, default=None,
                                 help="Nombre maximal de sauts")
    simulate_parser.add_argument("--record-events", action="store_true",
                                 help="Journalise les sauts (test χ² de la loi des sauts)")
    simulate_parser.add_argument("--exact", action="store_true",
                                 help="Compare à μ_N et aux taux trace exacts (énumère E_N)")
    simulate_parser.add_argument("--m1-trials", type=int, default=0,
                                 help="Nombre d'essais pour la vérification (M1)")
    simulate_parser.add_argument("--trajectory", default=None,
                                 help="Fichier CSV des segments (.zst pour compresser)")
    simulate_parser.add_argument("-o", "--out", help="Fichier JSON de sortie (stdout par défaut)")
    simulate_parser.set_defaults(func=cmd_simulate)

    # Commande replay
    replay_parser = subparsers.add_parser("replay", help="Rejouer un manifeste")
    replay_parser.add_argument("manifest", help="Fichier manifeste JSON")
    replay_parser.add_argument("--rtol", type=float, default=1e-8,
                               help="Tolérance relative pour les sorties numériques")
    replay_parser.set_defaults(func=cmd_replay)

    return parser


def main(argv=None):
    """Point d'entrée principal du CLI"""
    parser = build_parser()
    args = parser.parse_args(argv)

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )

    if not args.command:
        parser.print_help()
        sys.exit(EXIT_FAILURE)

    args.func(args)


if __name__ == "__main__":
    main()
