"""Command-line entry point: ``circuitdream <command> ...``.

Every command writes its outputs plus a ``manifest.json`` (command line, resolved
configuration, digest, library versions) into an output directory.  The default
directory is ``$CIRCUITDREAM_OUT/<command>`` (``./runs/<command>`` when unset).
Failures print a JSON error object to stderr and exit with status 2.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import platform
import sys
from pathlib import Path

OUT_ENV = "CIRCUITDREAM_OUT"


class CliError(Exception):
    def __init__(self, kind: str, message: str):
        super().__init__(message)
        self.kind = kind


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


def _out_dir(args) -> Path:
    if args.out_dir:
        path = Path(args.out_dir)
    else:
        path = Path(os.environ.get(OUT_ENV, "runs")) / args.command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _versions() -> dict:
    import numba
    import numpy

    from . import __version__

    return {
        "circuitdream": __version__,
        "numpy": numpy.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
    }


def _write_manifest(out: Path, args, config: dict, outputs: list[str]) -> None:
    manifest = {
        "command": args.command,
        "argv": [a for a in args.argv],
        "config": config,
        "config_digest": _digest(config),
        "outputs": sorted(outputs),
        "versions": _versions(),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def _workers(args) -> int:
    return args.workers or os.cpu_count() or 1


def _hamiltonian(args):
    from .hamiltonian import HamiltonianSpec

    return HamiltonianSpec(args.n_qubits, args.J, args.g, args.boundary)


# --- commands -------------------------------------------------------------------


def cmd_gen(args) -> None:
    from dataclasses import replace

    from .circuit import GatePool
    from .datagen import DATASET_SPECS, PRESET_NAMES, DatasetSpec, build_dataset, build_preset, save_dataset
    from .vqe import VqeConfig

    h = _hamiltonian(args)
    vqe_cfg = VqeConfig(restarts=args.restarts, seed=args.vqe_seed)
    if bool(args.preset) == bool(args.spec):
        raise CliError("usage", "give exactly one of --preset or --spec")
    if args.preset:
        if args.preset not in PRESET_NAMES:
            raise CliError("unknown_preset", f"unknown preset {args.preset!r}; choose from {', '.join(PRESET_NAMES)}")
        records = build_preset(args.preset, h, vqe_cfg, args.scale, args.seed, _workers(args))
        config = {"preset": args.preset, "scale": args.scale, "seed": args.seed}
    else:
        d = json.loads(Path(args.spec).read_text())
        d["pool"] = GatePool.from_dict(d["pool"]) if isinstance(d.get("pool"), dict) else DATASET_SPECS["B_s"].pool
        for key in ("moment_range", "gate_ratios"):
            if key in d:
                d[key] = tuple(d[key])
        spec = DatasetSpec(**d)
        if args.seed is not None:
            spec = replace(spec, seed=args.seed)
        records = build_dataset(spec.scaled(args.scale), h, vqe_cfg, _workers(args))
        config = {"spec": spec.to_dict(), "scale": args.scale}
    config.update(hamiltonian=vars(h), vqe=vqe_cfg.to_dict())
    out = _out_dir(args)
    save_dataset(records, out / "dataset.jsonl")
    _write_manifest(out, args, config, ["dataset.jsonl"])
    _emit({"dataset": str(out / "dataset.jsonl"), "records": len(records)})


def _load_records(path):
    from .datagen import load_dataset

    if not Path(path).exists():
        raise CliError("missing_file", f"dataset file {path} does not exist")
    return load_dataset(path)


def _train_config(args):
    from .presets import load_preset, train_config

    overrides = {k: getattr(args, k) for k in ("lr", "epochs", "seed") if getattr(args, k) is not None}
    return train_config(load_preset(args.preset), desk=args.desk, **overrides)


def cmd_train(args) -> None:
    from .datagen import dataset_vocabulary
    from .neuralnet import save_checkpoint, train

    records = _load_records(args.dataset)
    cfg = _train_config(args)
    model, report = train(records, dataset_vocabulary(records), cfg)
    out = _out_dir(args)
    save_checkpoint(model, out / "model.ckpt", cfg.to_dict())
    (out / "report.json").write_text(json.dumps(report.to_dict(), sort_keys=True) + "\n")
    _write_manifest(out, args, {"train": cfg.to_dict(), "dataset": args.dataset}, ["model.ckpt", "report.json"])
    _emit({
        "checkpoint": str(out / "model.ckpt"),
        "test_loss": report.test_loss,
        "baseline_loss": report.baseline_loss,
        "best_epoch": report.best_epoch,
    })


def cmd_sweep(args) -> None:
    from .datagen import dataset_vocabulary
    from .neuralnet import train
    from .presets import load_preset, sweep_configs

    records = _load_records(args.dataset)
    vocab = dataset_vocabulary(records)
    base = _train_config(args)
    out = _out_dir(args)
    rows = []
    for i, (label, cfg) in enumerate(sweep_configs(load_preset(args.preset), base)):
        if args.limit is not None and i >= args.limit:
            break
        _, report = train(records, vocab, cfg)
        rows.append({"label": label, "config_digest": cfg.digest(), "train_loss": report.train_loss,
                     "test_loss": report.test_loss, "baseline_loss": report.baseline_loss})
    (out / "sweep.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    _write_manifest(out, args, {"base": base.to_dict(), "preset": args.preset, "limit": args.limit}, ["sweep.jsonl"])
    _emit({"sweep": str(out / "sweep.jsonl"), "points": len(rows)})


def cmd_dream(args) -> None:
    from .analysis import cohort_metrics, export_report, trace_metrics
    from .circuit import CircuitError, parse_circuit_string
    from .dreaming import dream_cohort, save_trace
    from .encoding import EncodingError, encode
    from .neuralnet import FingerprintError, load_checkpoint
    from .presets import dream_config, load_preset
    from .seeding import child_rng
    from .vqe import VqeConfig

    if not Path(args.checkpoint).exists():
        raise CliError("missing_file", f"checkpoint {args.checkpoint} does not exist")
    model = load_checkpoint(args.checkpoint)
    if model.vocab is None:
        raise CliError("vocabulary_mismatch", "checkpoint carries no vocabulary")
    n_qubits = model.vocab.n_qubits
    if args.n_qubits is None:
        args.n_qubits = n_qubits
    elif args.n_qubits != n_qubits:
        raise CliError("vocabulary_mismatch", f"model was trained on {n_qubits} qubits, --n-qubits is {args.n_qubits}")
    if args.circuit:
        sources = [args.circuit]
    elif args.circuits:
        sources = [line.strip() for line in Path(args.circuits).read_text().splitlines() if line.strip()]
    elif args.dataset:
        records = _load_records(args.dataset)
        order = child_rng(args.seed, 0).permutation(len(records))[: args.n]
        sources = [records[i].circuit for i in sorted(order)]
    else:
        raise CliError("usage", "give --circuit, --circuits or --dataset with --n")
    circuits = []
    for s in sources:
        try:
            c = parse_circuit_string(s, n_qubits)
            encode(c, model.vocab)
        except (CircuitError, EncodingError, FingerprintError) as exc:
            raise CliError("vocabulary_mismatch", f"{s!r} does not fit the model's vocabulary: {exc}") from None
        circuits.append(c)

    overrides = {"seed": args.seed}
    for key, attr in (("target_energy", "target"), ("lr", "lr"), ("inner_steps", "steps"), ("outer_epochs", "epochs")):
        if getattr(args, attr) is not None:
            overrides[key] = getattr(args, attr)
    cfg = dream_config(load_preset(args.preset), **overrides)
    vqe_cfg = VqeConfig(restarts=args.restarts, seed=args.vqe_seed)
    traces = dream_cohort(model, circuits, cfg, _hamiltonian(args), vqe_cfg)

    out = _out_dir(args)
    outputs = []
    for i, t in enumerate(traces):
        name = f"traces/trace-{i:04d}.jsonl"
        save_trace(t, out / name)
        outputs.append(name)
    provenance = {"dream_config": cfg.digest(), "model_checksum": model.checksum()[:16],
                  "train_config": str(model.meta.get("train_config_digest"))}
    metrics = [trace_metrics(t) for t in traces]
    export_report(metrics, out / "metrics.jsonl", "lines", provenance)
    export_report(metrics, out / "metrics.txt", "table", provenance)
    cohort = cohort_metrics(traces)
    from dataclasses import asdict

    (out / "cohort.json").write_text(json.dumps(asdict(cohort), indent=2, sort_keys=True) + "\n")
    outputs += ["metrics.jsonl", "metrics.txt", "cohort.json"]
    _write_manifest(out, args, {"dream": cfg.to_dict(), "vqe": vqe_cfg.to_dict(), "sources": sources}, outputs)
    _emit(asdict(cohort))


def cmd_oracle(args) -> None:
    from .hamiltonian import exact_ground_energy

    h = _hamiltonian(args)
    energy = exact_ground_energy(h)
    result = {"n_qubits": h.n_qubits, "J": h.J, "g": h.g, "boundary": h.boundary, "energy": energy}
    if args.out_dir or os.environ.get(OUT_ENV):
        out = _out_dir(args)
        (out / "oracle.json").write_text(json.dumps(result, sort_keys=True) + "\n")
        _write_manifest(out, args, result, ["oracle.json"])
    _emit(result)


def cmd_expr(args) -> None:
    from .analysis import expressibility
    from .circuit import parse_circuit_string
    from .datagen import mean_field_circuit
    from .dreaming import load_trace

    if args.samples < args.bins:
        raise CliError("invalid_argument", f"samples ({args.samples}) must be at least bins ({args.bins})")
    if args.circuit:
        labelled = [("circuit", args.circuit)]
    elif args.trace:
        t = load_trace(args.trace)
        labelled = [(f"epoch-{e.epoch}", e.circuit) for e in t.epochs if e.accepted]
    elif args.mean_field:
        from .circuit import serialize_circuit

        labelled = [(f"mean-field-{args.mean_field}", serialize_circuit(mean_field_circuit(args.mean_field)))]
    else:
        raise CliError("usage", "give --circuit, --trace or --mean-field")
    rows = []
    for label, s in labelled:
        score = expressibility(parse_circuit_string(s, args.n_qubits), args.samples, args.bins, args.seed)
        rows.append(dict(score.to_dict(), label=label, circuit=s))
    out = _out_dir(args)
    (out / "expressibility.jsonl").write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in rows))
    _write_manifest(out, args, {"samples": args.samples, "bins": args.bins, "seed": args.seed,
                                "circuits": [s for _, s in labelled]}, ["expressibility.jsonl"])
    for r in rows:
        _emit(r)


# --- parser ---------------------------------------------------------------------


def _add_hamiltonian(p, n_default=6):
    p.add_argument("--n", dest="n_qubits", type=int, default=n_default, help="number of qubits")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--boundary", choices=("open", "periodic"), default="open")


def _add_vqe(p):
    p.add_argument("--restarts", type=int, default=3, help="VQE restarts per circuit")
    p.add_argument("--vqe-seed", type=int, default=0)


def _add_train(p):
    p.add_argument("dataset")
    p.add_argument("--preset", default="B_s")
    p.add_argument("--desk", action="store_true", help="apply the preset's small-scale overrides")
    p.add_argument("--lr", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--seed", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="circuitdream", description=__doc__.splitlines()[0])
    parser.add_argument("--out-dir", help=f"output directory (default ${OUT_ENV}/<command>)")
    parser.add_argument("--workers", type=int, default=None, help="worker processes (default: all cores)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="build a labelled dataset")
    p.add_argument("--preset")
    p.add_argument("--spec", help="JSON file with DatasetSpec fields")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    _add_hamiltonian(p)
    _add_vqe(p)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train an energy regressor")
    _add_train(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sweep", help="train every grid point of a preset's search")
    _add_train(p)
    p.add_argument("--limit", type=int, help="stop after this many grid points")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("dream", help="dream circuits with a trained model")
    p.add_argument("checkpoint")
    p.add_argument("--circuit")
    p.add_argument("--circuits", help="file with one circuit string per line")
    p.add_argument("--dataset", help="sample starting circuits from this dataset")
    p.add_argument("--n", type=int, default=100, help="circuits to sample from --dataset")
    p.add_argument("--preset", default="B_s")
    p.add_argument("--target", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--steps", type=int, help="gradient steps per epoch")
    p.add_argument("--epochs", type=int, help="outer epochs")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-qubits", dest="n_qubits", type=int, help="defaults to the model's width")
    p.add_argument("--J", type=float, default=1.0)
    p.add_argument("--g", type=float, default=1.0)
    p.add_argument("--boundary", choices=("open", "periodic"), default="open")
    _add_vqe(p)
    p.set_defaults(func=cmd_dream)

    p = sub.add_parser("oracle", help="exact ground energy by dense diagonalization")
    _add_hamiltonian(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("expr", help="expressibility of circuits")
    p.add_argument("--circuit")
    p.add_argument("--trace", help="dream trace file; scores every accepted circuit")
    p.add_argument("--mean-field", choices=("relaxed", "fixed"))
    p.add_argument("--n-qubits", dest="n_qubits", type=int, default=6)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--bins", type=int, default=75)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_expr)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    args.argv = argv
    try:
        args.func(args)
    except CliError as exc:
        _fail(exc.kind, str(exc))
        return 2
    except (ValueError, KeyError, OSError) as exc:
        _fail(type(exc).__name__, str(exc))
        return 2
    return 0


def _fail(kind: str, message: str) -> None:
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
