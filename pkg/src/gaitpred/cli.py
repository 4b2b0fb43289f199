"""Command-line entry point.

Commands: gen, run-trial, run-participant, bench, gradcheck, plot.
Every command that writes files also writes a run_manifest.json with the
full resolved configuration, so a run is reproducible from the manifest
alone. Exit codes: 0 success, 1 partial failure (some cells failed),
2 invalid invocation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .data import DataError, load_manifest, load_trial, save_manifest, trial_csv_bytes
from .data import truncate_auto, truncate_manual
from .experiments import (
    BY_PARTICIPANT_GRID,
    ExperimentConfig,
    benchmark_timing,
    run_by_participant,
    run_by_trial,
    write_results_dir,
    write_timing_csv,
)
from .metrics import SummedSeries, write_plot_svg
from .models import ModelKind, ModelSpec, build
from .nn import BiLSTM, Conv1D, Dense, LSTM, SimpleRNN, gradient_check
from .rng import SplitMix64, derive_seed
from .synth import GaitProfile, generate_participant, profile_from_config, sample_profile
from ._kernels import BACKEND

EXIT_OK = 0
EXIT_PARTIAL = 1
EXIT_USAGE = 2


def _write_run_manifest(outdir: Path, command: str, config: dict,
                        artifacts: list) -> None:
    manifest = {
        "tool": "gaitpred",
        "version": __version__,
        "backend": BACKEND,
        "command": command,
        "config": config,
        "artifacts": sorted(str(Path(p).relative_to(outdir)) for p in artifacts),
    }
    path = outdir / "run_manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _parse_models(arg: str) -> tuple:
    return tuple(ModelKind.parse(name) for name in arg.split(","))


def _parse_cell(arg: str) -> tuple:
    try:
        w_in, w_out = arg.lower().split("x")
        return (int(w_in), int(w_out))
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"bad cell {arg!r}: expected WINxWOUT, e.g. 20x5") from None


def _apply_config_file(argv: list, parser: argparse.ArgumentParser,
                       subparsers: dict) -> list:
    """Pre-scan for --config key=value file and fold it into parser
    defaults; explicit flags win. Defaults go onto every subparser because
    each subcommand parses into its own namespace."""
    if "--config" not in argv:
        return argv
    i = argv.index("--config")
    if i + 1 >= len(argv):
        parser.error("--config requires a file path")
    defaults = {}
    for lineno, raw in enumerate(
            Path(argv[i + 1]).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"bad config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        defaults[key.replace("-", "_")] = value
    for sub in subparsers.values():
        known = {a.dest for a in sub._actions}
        sub.set_defaults(**{k: v for k, v in defaults.items() if k in known})
    return argv[:i] + argv[i + 2:]


# ---------------------------------------------------------------------------
# gen


def _cmd_gen(args) -> int:
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    if args.profile:
        base = profile_from_config(Path(args.profile).read_text(encoding="utf-8"))
    else:
        base = GaitProfile()
    base = replace(base, noise_std=float(args.noise),
                   cadence_jitter=float(args.jitter))

    n_participants = int(args.participants)
    seed = int(args.seed)
    if args.trials_per_participant:
        counts = [int(args.trials_per_participant)] * n_participants
    else:
        counts = _draw_trial_counts(n_participants, seed, target=args.target_trials)

    entries = []
    for i in range(n_participants):
        pid = f"p{i + 1:02d}"
        profile = replace(sample_profile(base, derive_seed(seed, "participant", i)),
                          noise_std=base.noise_std)
        trials = generate_participant(
            profile, counts[i], derive_seed(seed, "trials", i),
            duration_s=float(args.duration), participant_id=pid)
        pdir = outdir / pid
        pdir.mkdir(exist_ok=True)
        for trial in trials:
            path = pdir / f"{trial.trial_id}.csv"
            path.write_bytes(trial_csv_bytes(trial))
            entries.append((pid, trial.trial_id, path.relative_to(outdir)))
    manifest_path = outdir / "manifest.csv"
    save_manifest(entries, manifest_path)

    _write_run_manifest(outdir, "gen", {
        "seed": seed,
        "participants": n_participants,
        "trial_counts": counts,
        "duration_s": float(args.duration),
        "noise_std": base.noise_std,
        "cadence_jitter": base.cadence_jitter,
        "profile_file": args.profile or "",
        "target_trials": args.target_trials,
    }, [manifest_path] + [outdir / p for _, _, p in entries])
    print(f"wrote {len(entries)} trials for {n_participants} participants "
          f"to {outdir}")
    return EXIT_OK


def _draw_trial_counts(n_participants: int, seed: int, target: int = 108) -> list:
    """Per-participant trial counts drawn in [3, 12], nudged deterministically
    so the corpus totals the target when feasible."""
    rng = SplitMix64(derive_seed(seed, "trial-counts"))
    counts = list(rng.integers(3, 12, n_participants))
    lo, hi = 3 * n_participants, 12 * n_participants
    goal = min(max(target, lo), hi)
    i = 0
    while sum(counts) > goal:
        j = max(range(n_participants), key=lambda k: (counts[k], -k))
        counts[j] -= 1
        i += 1
    while sum(counts) < goal:
        j = min(range(n_participants), key=lambda k: (counts[k], k))
        counts[j] += 1
    return [int(c) for c in counts]


# ---------------------------------------------------------------------------
# run-trial / run-participant


def _load_participant_trials(manifest_path: str, participant: str) -> list:
    entries = load_manifest(manifest_path)
    chosen = [e for e in entries if e[0] == participant]
    if not chosen:
        available = sorted({e[0] for e in entries})
        raise DataError(
            f"participant {participant!r} not in manifest; available: "
            f"{', '.join(available)}")
    return [load_trial(path, pid, tid) for pid, tid, path in chosen]


def _experiment_config(args, protocol: str) -> ExperimentConfig:
    grid = BY_PARTICIPANT_GRID
    if protocol == "participant" and args.cell:
        grid = (args.cell,)
    return ExperimentConfig(
        protocol=protocol,
        model_kinds=_parse_models(args.models),
        include_baseline=not args.no_baseline,
        normalization=args.normalization,
        seed=int(args.seed),
        batch_size=int(args.batch_size),
        shuffle=not args.no_shuffle,
        hidden=int(args.hidden),
        dropout_enabled=args.dropout,
        stitch_mode=args.stitch,
        epochs_override=int(args.epochs) if args.epochs else None,
        grid=grid,
        test_trial_index=args.test_trial,
        val_trial_index=args.val_trial,
    )


def _maybe_truncate(trial, args):
    if args.truncate == "manual":
        if args.start is None or args.end is None:
            raise DataError("--truncate manual requires --start and --end")
        return truncate_manual(trial, int(args.start), int(args.end))
    if args.truncate == "auto":
        return truncate_auto(trial)
    return trial


def _cmd_run_trial(args) -> int:
    trials = _load_participant_trials(args.manifest, args.participant)
    by_id = {t.trial_id: t for t in trials}
    if args.trial not in by_id:
        print(f"error: trial {args.trial!r} not found; available: "
              f"{', '.join(sorted(by_id))}", file=sys.stderr)
        return EXIT_USAGE
    trial = _maybe_truncate(by_id[args.trial], args)
    cfg = _experiment_config(args, "trial")
    result = run_by_trial(trial, cfg)
    outdir = Path(args.out)
    artifacts = write_results_dir(outdir, result, cfg)
    _write_run_manifest(outdir, "run-trial", {
        "manifest": str(args.manifest),
        "participant": args.participant,
        "trial": args.trial,
        "truncate": args.truncate,
        **cfg.metadata(),
    }, artifacts)
    for label, err in sorted(result.errors.items()):
        print(f"cell {label} failed: {err}", file=sys.stderr)
    print(f"wrote results to {outdir}")
    if result.all_failed:
        return EXIT_PARTIAL
    return EXIT_PARTIAL if result.errors else EXIT_OK


def _cmd_run_participant(args) -> int:
    trials = _load_participant_trials(args.manifest, args.participant)
    if len(trials) < 3:
        print(f"error: participant {args.participant} needs >= 3 trials, "
              f"has {len(trials)}", file=sys.stderr)
        return EXIT_USAGE
    cfg = _experiment_config(args, "participant")
    result = run_by_participant(trials, cfg)
    outdir = Path(args.out)
    artifacts = write_results_dir(outdir, result, cfg)
    _write_run_manifest(outdir, "run-participant", {
        "manifest": str(args.manifest),
        "participant": args.participant,
        "grid": [f"{a}x{b}" for a, b in cfg.grid],
        **cfg.metadata(),
    }, artifacts)
    for label, err in sorted(result.errors.items()):
        print(f"cell {label} failed: {err}", file=sys.stderr)
    print(f"wrote results to {outdir}")
    if result.all_failed:
        return EXIT_PARTIAL
    return EXIT_PARTIAL if result.errors else EXIT_OK


# ---------------------------------------------------------------------------
# bench


def _cmd_bench(args) -> int:
    trials = _load_participant_trials(args.manifest, args.participant)
    protocol = args.protocol
    cfg = _experiment_config(args, protocol)
    rows = benchmark_timing(trials, cfg, repetitions=int(args.repetitions))
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    timing_path = outdir / "timing.csv"
    write_timing_csv(rows, timing_path,
                     {**cfg.metadata(), "repetitions": args.repetitions})
    _write_run_manifest(outdir, "bench", {
        "manifest": str(args.manifest),
        "participant": args.participant,
        "repetitions": int(args.repetitions),
        **cfg.metadata(),
    }, [timing_path])
    for kind, w_in, w_out, train_s, predict_s, measured_s, ratio in rows:
        print(f"{kind:12s} {w_in:>2d}x{w_out}: train {train_s:8.3f}s  "
              f"predict {predict_s:.5f}s  measured {measured_s:.3f}s  "
              f"ratio {ratio:.5f}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# gradcheck


def _gradcheck_targets(selector: str, seed: int, hidden: int = 6):
    rng = SplitMix64(derive_seed(seed, "gradcheck-inputs"))

    def inputs(shape):
        return rng.normal(int(np.prod(shape))).reshape(shape)

    layer_specs = {
        "dense": lambda s: (Dense(4, 3, s), inputs((4,))),
        "rnn": lambda s: (SimpleRNN(2, 3, s), inputs((5, 2))),
        "lstm": lambda s: (LSTM(3, 4, s), inputs((6, 3))),
        "bilstm": lambda s: (BiLSTM(3, 4, s), inputs((6, 3))),
        "conv1d": lambda s: (Conv1D(6, 4, 3, s), inputs((7, 6))),
    }
    model_specs = {
        "model-simple": ModelKind.SIMPLE_RNN,
        "model-lstm": ModelKind.LSTM2,
        "model-bilstm": ModelKind.BILSTM2,
        "model-cnnrnn": ModelKind.CNN_RNN,
    }
    targets = {}
    for name, make in layer_specs.items():
        targets[name] = make
    for name, kind in model_specs.items():
        def make_model(s, kind=kind):
            spec = ModelSpec(kind, w_in=8, w_out=2, hidden=hidden, conv_filters=6)
            return build(spec, s), inputs((8, 6))
        targets[name] = make_model
    if selector != "all":
        wanted = selector.split(",")
        unknown = [w for w in wanted if w not in targets]
        if unknown:
            raise DataError(
                f"unknown gradcheck target(s) {unknown}; valid: "
                f"{', '.join(targets)}")
        targets = {k: targets[k] for k in wanted}
    return targets


def _cmd_gradcheck(args) -> int:
    targets = _gradcheck_targets(args.layer, int(args.seed))
    threshold = 1e-4
    failed = False
    for name, make in targets.items():
        worst = 0.0
        for i in range(int(args.instances)):
            target, X = make(derive_seed(int(args.seed), name, i))
            corrupt = None
            if args.inject_fault:
                corrupt = next(target.parameters())[0]
            err = gradient_check(target, X, epsilon=1e-5,
                                 seed=derive_seed(int(args.seed), name, i, "probe"),
                                 corrupt=corrupt)
            worst = max(worst, err)
        status = "PASS" if worst <= threshold else "FAIL"
        if status == "FAIL":
            failed = True
        print(f"{status} {name:14s} max relative error {worst:.3e}")
    return EXIT_PARTIAL if failed else EXIT_OK


# ---------------------------------------------------------------------------
# plot


def _cmd_plot(args) -> int:
    path = Path(args.input)
    ts, true_vals, pred_vals = [], [], []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader)
        if header[:3] != ["t", "true_sum", "pred_sum"]:
            print("error: expected plot CSV header t,true_sum,pred_sum",
                  file=sys.stderr)
            return EXIT_USAGE
        for row in reader:
            ts.append(int(row[0]))
            true_vals.append(float(row[1]) if row[1] else np.nan)
            pred_vals.append(float(row[2]) if row[2] else np.nan)
    true_arr = np.array(true_vals)
    pred_arr = np.array(pred_vals)
    true_s = SummedSeries(np.nan_to_num(true_arr), ~np.isnan(true_arr))
    pred_s = SummedSeries(np.nan_to_num(pred_arr), ~np.isnan(pred_arr))
    out = Path(args.out) if args.out else path.with_suffix(".svg")
    write_plot_svg(true_s, pred_s, out, title=path.stem)
    print(f"wrote {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------


def _add_common_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--manifest", required=True, help="dataset manifest CSV")
    p.add_argument("--participant", required=True, help="participant id")
    p.add_argument("--out", required=True, help="results directory")
    p.add_argument("--seed", default=0, help="run seed (all randomness derives from it)")
    p.add_argument("--models", default="simple,lstm,bilstm,cnnrnn",
                   help="comma-separated model kinds")
    p.add_argument("--no-baseline", action="store_true",
                   help="skip the persistence baseline")
    p.add_argument("--epochs", default=None, help="override epoch count")
    p.add_argument("--batch-size", default=32)
    p.add_argument("--no-shuffle", action="store_true",
                   help="keep window order during training")
    p.add_argument("--hidden", default=20, help="hidden units per recurrent layer")
    p.add_argument("--normalization", choices=("unit", "offset"), default="unit")
    p.add_argument("--dropout", action="store_true",
                   help="enable the (inferior) dropout variants")
    p.add_argument("--stitch", choices=("tile", "overlap"), default="tile",
                   help="whole-trial stitching mode")
    p.add_argument("--test-trial", type=int, default=None,
                   help="index of the test trial (default: last)")
    p.add_argument("--val-trial", type=int, default=None,
                   help="index of the validation trial (default: second-to-last)")
    p.add_argument("--config", help="key=value config file (flags win)")


def build_parser() -> tuple:
    parser = argparse.ArgumentParser(
        prog="gaitpred",
        description="Gait pressure value prediction: synthetic data, "
                    "from-scratch models, experiments and reports.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a synthetic dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--seed", default=0)
    g.add_argument("--participants", default=17)
    g.add_argument("--trials-per-participant", default=None,
                   help="fixed trial count (default: drawn in [3,12])")
    g.add_argument("--target-trials", type=int, default=108,
                   help="corpus total when counts are drawn")
    g.add_argument("--duration", default=12.0, help="nominal trial seconds")
    g.add_argument("--noise", default=0.01, help="additive noise std")
    g.add_argument("--jitter", default=0.02, help="cadence jitter (relative std)")
    g.add_argument("--profile", help="base profile config file")
    g.add_argument("--config", help="key=value config file (flags win)")

    t = sub.add_parser("run-trial", help="short-distance protocol on one trial")
    _add_common_run_flags(t)
    t.add_argument("--trial", required=True, help="trial id")
    t.add_argument("--truncate", choices=("none", "auto", "manual"), default="none")
    t.add_argument("--start", default=None, help="manual truncation start step")
    t.add_argument("--end", default=None, help="manual truncation end step")

    p = sub.add_parser("run-participant",
                       help="long-distance protocol over one participant")
    _add_common_run_flags(p)
    p.add_argument("--grid", choices=("full",), default="full",
                   help="run all 12 window combinations")
    p.add_argument("--cell", type=_parse_cell, default=None,
                   help="run a single cell, e.g. 20x5")

    b = sub.add_parser("bench", help="timing benchmark")
    _add_common_run_flags(b)
    b.add_argument("--protocol", choices=("trial", "participant"),
                   default="participant")
    b.add_argument("--cell", type=_parse_cell, default=None)
    b.add_argument("--repetitions", default=100)

    c = sub.add_parser("gradcheck", help="finite-difference gradient check")
    c.add_argument("--layer", default="all",
                   help="all, or comma-separated targets (dense, rnn, lstm, "
                        "bilstm, conv1d, model-simple, model-lstm, "
                        "model-bilstm, model-cnnrnn)")
    c.add_argument("--seed", default=0)
    c.add_argument("--instances", default=20, help="random instances per target")
    c.add_argument("--inject-fault", action="store_true",
                   help="corrupt one analytic gradient entry (must FAIL)")

    pl = sub.add_parser("plot", help="render an SVG from a plot CSV")
    pl.add_argument("--input", required=True, help="plot CSV (t,true_sum,pred_sum)")
    pl.add_argument("--out", default=None, help="output SVG path")

    return parser, {"gen": g, "run-trial": t, "run-participant": p,
                    "bench": b, "gradcheck": c, "plot": pl}


_COMMANDS = {
    "gen": _cmd_gen,
    "run-trial": _cmd_run_trial,
    "run-participant": _cmd_run_participant,
    "bench": _cmd_bench,
    "gradcheck": _cmd_gradcheck,
    "plot": _cmd_plot,
}


def main(argv: list | None = None) -> int:
    parser, subparsers = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    argv = _apply_config_file(argv, parser, subparsers)
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (DataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
