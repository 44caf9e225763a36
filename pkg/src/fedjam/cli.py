"""Command-line entry point.

Subcommands mirror the experiment flow: ``synth`` writes per-client
dataset files and a manifest, ``stage1``/``stage2`` train and checkpoint
the two federated phases, ``eval`` scores a classifier (or the full
six-way comparison grid with ``--grid``), and ``pca`` emits the
heterogeneity diagnostic. Every command reads one JSON config and writes
CSVs (plus figures unless ``--no-figures``) under ``--out``.

Exit codes: 0 success, 2 configuration error, 3 data-format/IO error,
4 numeric failure (non-finite loss; partial history is still flushed).
"""

import argparse
import hashlib
import json
import math
import sys
from pathlib import Path

from .checkpoint import canonical_layers, load_checkpoint, save_checkpoint
from .config import ExperimentConfig, load_config
from .dataset import load_dataset, save_dataset, synth_client_dataset
from .errors import ConfigError, DataFormatError, NumericError
from .nn import ModelState
from .pipeline import (
    ReportRow,
    build_classifier,
    cae_layers,
    classifier_layers,
    evaluate,
    pca_diagnostic,
    run_stage1,
    run_stage2,
    run_table_grid,
    shared_input_dim,
)
from .reporting import (
    render_history_figure,
    render_pca_figure,
    render_report_figure,
    write_history_csv,
    write_pca_csv,
    write_report_csv,
)
from .seeding import derive_seed


def _profile_json(profile) -> dict:
    return {
        "client_id": profile.client_id,
        "femtocell_id": profile.femtocell_id,
        "n1": profile.cell.n1,
        "n2": profile.cell.n2,
        "pci": profile.cell.pci,
        "channel_taps": [[t.real, t.imag] for t in profile.channel.taps],
        "snr_db": profile.channel.snr_db,
        "channel_seed": profile.channel.seed,
        "jammer_kind": profile.jammer.kind,
        "jsr_db": profile.jammer.jsr_db,
        "tone_offset": profile.jammer.tone_offset,
        "jammer_seed": profile.jammer.seed,
        "n_obs": profile.n_obs,
        "split": list(profile.split),
        "n_fft": profile.n_fft,
        "cp_len": profile.cp_len,
        "pbch_fill": profile.pbch_fill,
        "q_len": profile.q_len,
    }


def cmd_synth(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out)
    data_dir = out / "datasets"
    data_dir.mkdir(parents=True, exist_ok=True)
    entries = []
    for profile in cfg.profiles:
        ds = synth_client_dataset(profile)
        name = f"client_{profile.client_id:03d}.ssbds"
        path = data_dir / name
        save_dataset(ds, path)
        digest = hashlib.sha256(path.read_bytes()).hexdigest()
        entries.append(
            {
                "client_id": profile.client_id,
                "femtocell_id": profile.femtocell_id,
                "file": f"datasets/{name}",
                "sha256": digest,
                "profile": _profile_json(profile),
            }
        )
        print(f"wrote {path} ({ds.n_obs} obs, q={ds.q_len})")
    manifest = {
        "version": 1,
        "master_seed": cfg.master_seed,
        "n_clients": len(cfg.profiles),
        "clients": entries,
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"wrote {out / 'manifest.json'}")


def _load_clients(data_dir: Path, expected: int):
    paths = sorted(Path(data_dir).glob("*.ssbds"))
    if not paths:
        raise DataFormatError(f"no .ssbds files in {data_dir}")
    clients = sorted((load_dataset(p) for p in paths), key=lambda c: c.client_id)
    if expected and len(clients) != expected:
        raise ConfigError(
            f"config names {expected} clients but {data_dir} holds {len(clients)}"
        )
    return clients


def _run_history(run, out_csv: Path, stage: int, algorithm: str):
    """Run a training closure, flushing partial history on numeric failure."""
    try:
        return run()
    except NumericError as exc:
        write_history_csv(out_csv, exc.partial_history, stage, algorithm)
        raise


def cmd_stage1(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out) / "stage1"
    out.mkdir(parents=True, exist_ok=True)
    clients = _load_clients(args.data, cfg.federation.n_clients)
    params, history = _run_history(
        lambda: run_stage1(clients, cfg.stage, cfg.federation, n_threads=args.threads),
        out / "history.csv", 1, "fedavg",
    )
    model = ModelState(
        layers=cae_layers(shared_input_dim(clients), cfg.stage), params=params, mode="eval"
    )
    save_checkpoint(out / "cae.fjck", model)
    write_history_csv(out / "history.csv", history, 1, "fedavg")
    if args.figures:
        render_history_figure(out / "loss.png", history, 1, "fedavg")
    print(f"stage1 done: final train loss {history[-1].global_train_loss:.6f}")
    print(f"wrote {out / 'cae.fjck'} and {out / 'history.csv'}")


def cmd_stage2(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out) / "stage2"
    out.mkdir(parents=True, exist_ok=True)
    clients = _load_clients(args.data, cfg.federation.n_clients)
    input_dim = shared_input_dim(clients)
    cae = load_checkpoint(args.cae)
    if cae.layers != canonical_layers(cae_layers(input_dim, cfg.stage)):
        raise ConfigError(
            f"checkpoint {args.cae} layer specs disagree with configured widths"
        )
    classifier = build_classifier(
        cae.params, cfg.stage, input_dim, derive_seed(cfg.federation.seed, 202)
    )
    params, history = _run_history(
        lambda: run_stage2(
            clients, classifier, cfg.stage, cfg.federation, n_threads=args.threads
        ),
        out / "history.csv", 2, "fedprox",
    )
    final = ModelState(layers=classifier.layers, params=params, mode="eval")
    save_checkpoint(out / "classifier.fjck", final)
    write_history_csv(out / "history.csv", history, 2, "fedprox")
    if args.figures:
        render_history_figure(out / "curves.png", history, 2, "fedprox")
    print(
        f"stage2 done: final valid accuracy "
        f"{history[-1].valid_acc if history[-1].valid_acc is not None else 'n/a'}"
    )
    print(f"wrote {out / 'classifier.fjck'} and {out / 'history.csv'}")


def cmd_eval(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out) / "eval"
    out.mkdir(parents=True, exist_ok=True)
    clients = _load_clients(args.data, cfg.federation.n_clients)
    if args.grid:
        rows = run_table_grid(
            clients, cfg.stage, cfg.federation, n_threads=args.threads
        )
    else:
        if not args.classifier:
            raise ConfigError("eval needs --classifier (or --grid)")
        model = load_checkpoint(args.classifier)
        input_dim = shared_input_dim(clients)
        if model.layers != canonical_layers(classifier_layers(input_dim, cfg.stage)):
            raise ConfigError(
                f"checkpoint {args.classifier} layer specs disagree with configured widths"
            )
        report = evaluate(model, model.params, clients, threshold=cfg.threshold)
        n_part = math.ceil(cfg.federation.participation_fraction * len(clients))
        rows = [
            ReportRow(
                algorithm="fedavg+fedprox", n_clients=n_part,
                precision=report.precision, recall=report.recall,
                f1=report.f1, accuracy=report.accuracy,
            )
        ]
    write_report_csv(out / "report.csv", rows)
    if args.figures:
        render_report_figure(out / "report.png", rows)
    for row in rows:
        print(
            f"{row.algorithm} (D={row.n_clients}): precision={row.precision:.4f} "
            f"recall={row.recall:.4f} f1={row.f1:.4f} accuracy={row.accuracy:.4f}"
        )
    print(f"wrote {out / 'report.csv'}")


def cmd_pca(cfg: ExperimentConfig, args) -> None:
    out = Path(args.out) / "pca"
    out.mkdir(parents=True, exist_ok=True)
    clients = _load_clients(args.data, cfg.federation.n_clients)
    ids, projections, ratios = pca_diagnostic(clients)
    write_pca_csv(out / "projections.csv", ids, projections)
    if args.figures:
        render_pca_figure(out / "pca.png", ids, projections, ratios)
    print("explained_variance_ratios: " + " ".join(repr(float(r)) for r in ratios))
    print(f"wrote {out / 'projections.csv'}")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedjam",
        description="Two-stage federated jamming detection on synthetic SSB data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, needs_data: bool):
        p.add_argument("--config", required=True, help="experiment JSON config")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed override")
        p.add_argument("--threads", type=int, default=1, help="client worker threads")
        p.add_argument(
            "--no-figures", dest="figures", action="store_false",
            help="skip figure rendering",
        )
        if needs_data:
            p.add_argument(
                "--data", default=None,
                help="dataset directory (default: <out>/datasets)",
            )

    p = sub.add_parser("synth", help="synthesize per-client dataset files")
    common(p, needs_data=False)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("stage1", help="federated autoencoder pretraining")
    common(p, needs_data=True)
    p.set_defaults(func=cmd_stage1)

    p = sub.add_parser("stage2", help="federated classifier training")
    common(p, needs_data=True)
    p.add_argument("--cae", required=True, help="stage1 checkpoint (.fjck)")
    p.set_defaults(func=cmd_stage2)

    p = sub.add_parser("eval", help="score a classifier or run the comparison grid")
    common(p, needs_data=True)
    p.add_argument("--classifier", default=None, help="stage2 checkpoint (.fjck)")
    p.add_argument(
        "--grid", action="store_true",
        help="train and score all algorithm/participation combinations",
    )
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("pca", help="client heterogeneity diagnostic")
    common(p, needs_data=True)
    p.set_defaults(func=cmd_pca)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed_override=args.seed)
        if args.out is None:
            args.out = cfg.out_dir or "."
        if getattr(args, "data", None) is None and args.command != "synth":
            args.data = Path(args.out) / "datasets"
        if args.threads < 1:
            raise ConfigError(f"--threads must be >= 1, got {args.threads}")
        args.func(cfg, args)
        return 0
    except ConfigError as exc:
        print(f"error: config: {exc}", file=sys.stderr)
        return 2
    except DataFormatError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: data: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"error: numeric: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
