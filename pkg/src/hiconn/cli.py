"""Command line interface: dataset generation, training, evaluation, checks.

Exit codes: 0 success, 1 validation/usage error, 2 I/O error. The seed for
any subcommand comes from --seed, falling back to the HICONN_SEED
environment variable, then 0.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .ablation import ablate, format_table
from .config import TrainConfig
from .connectome import DatasetSplit, load_dataset, stratified_split
from .errors import ContractError, DataFormatError, GraphValidationError
from .gradcheck import REL_TOLERANCE, gradient_report
from .model import Model, VARIANT_FULL
from .synthetic import SyntheticSpec, generate_synthetic
from .training import evaluate, train


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _resolve_seed(seed) -> int:
    if seed is not None:
        return int(seed)
    return int(os.environ.get("HICONN_SEED", "0"))


def _build_parser() -> _Parser:
    parser = _Parser(prog="hiconn", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--subjects", type=int, required=True)
    gen.add_argument("--nodes", type=int, required=True)
    gen.add_argument("--modules", type=int, required=True)
    gen.add_argument("--p-in", type=float, default=0.3)
    gen.add_argument("--p-out", type=float, default=0.05)
    gen.add_argument("--mu-in", type=float, default=1.0)
    gen.add_argument("--mu-out", type=float, default=0.5)
    gen.add_argument("--noise", type=float, default=0.2)
    gen.add_argument("--delta", type=float, default=1.0)
    gen.add_argument("--prevalence", type=float, default=0.3)
    gen.add_argument("--mc-noise", type=float, default=0.05)
    gen.add_argument("--seed", type=int, default=None)
    gen.add_argument("--out", required=True)

    tr = sub.add_parser("train", help="train a model on a dataset")
    tr.add_argument("--data", required=True, help="dataset directory with manifest.json")
    tr.add_argument("--config", default=None, help="JSON file mirroring TrainConfig")
    tr.add_argument("--split", default=None, help="existing split JSON; derived from seed otherwise")
    tr.add_argument("--seed", type=int, default=None)
    tr.add_argument("--out", default=None, help="output directory (default: <data>/run)")

    ev = sub.add_parser("eval", help="evaluate a saved model on a split's test set")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--split", required=True)

    gc = sub.add_parser("gradcheck", help="finite-difference gradient verification")
    gc.add_argument("--seed", type=int, default=None)

    ab = sub.add_parser("ablate", help="multi-seed ablation table")
    ab.add_argument("--data", required=True)
    ab.add_argument("--seeds", type=int, default=5, help="number of seeds")
    ab.add_argument("--seed", type=int, default=None, help="first seed")
    ab.add_argument("--config", default=None)
    ab.add_argument("--out", default=None, help="table file (stdout otherwise)")
    return parser


def _load_config(path, seed: int) -> TrainConfig:
    if path is None:
        return TrainConfig(seed=seed)
    config = TrainConfig.from_file(path)
    return TrainConfig(**{**config.to_dict(), "seed": seed})


def _save_model(model: Model, path: Path) -> None:
    payload = {
        "atlas_size": model.n_nodes,
        "variant": model.variant,
        "config": model.config.to_dict(),
        "params": {name: values.tolist() for name, values in model.state_dict().items()},
    }
    path.write_text(json.dumps(payload) + "\n", encoding="utf-8")


def _load_model(path) -> Model:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    config = TrainConfig.from_dict(payload["config"])
    model = Model(int(payload["atlas_size"]), config, variant=payload["variant"])
    model.load_state(payload["params"])
    return model


def _cmd_gen(args) -> int:
    seed = _resolve_seed(args.seed)
    spec = SyntheticSpec(
        n_subjects=args.subjects, n_nodes=args.nodes, n_modules=args.modules,
        p_in=args.p_in, p_out=args.p_out, mu_in=args.mu_in, mu_out=args.mu_out,
        sigma=args.noise, delta=args.delta, prevalence=args.prevalence,
        mc_noise=args.mc_noise,
    )
    manifest = generate_synthetic(spec, seed, args.out)
    print(f"wrote {spec.n_subjects} subjects ({spec.n_nodes} nodes) to {manifest.parent}")
    return 0


def _cmd_train(args) -> int:
    seed = _resolve_seed(args.seed)
    config = _load_config(args.config, seed)
    subjects = load_dataset(Path(args.data) / "manifest.json")
    if args.split:
        split = DatasetSplit.from_json(json.loads(Path(args.split).read_text(encoding="utf-8")))
    else:
        split = stratified_split(subjects, config.seed)
    model, record = train(subjects, split, config)

    out_dir = Path(args.out) if args.out else Path(args.data) / "run"
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "split.json").write_text(
        json.dumps(split.to_json(), indent=2) + "\n", encoding="utf-8")
    (out_dir / "run_record.json").write_text(
        json.dumps(record.to_json(), indent=2) + "\n", encoding="utf-8")
    _save_model(model, out_dir / "model.json")
    print(f"digest: {record.digest()}")
    print(f"test metrics: ACC={record.test_metrics['accuracy']:.2f} "
          f"F1={record.test_metrics['f1']:.2f} (best epoch {record.best_epoch})")
    return 0


def _cmd_eval(args) -> int:
    model = _load_model(args.model)
    subjects = load_dataset(Path(args.data) / "manifest.json")
    split = DatasetSplit.from_json(json.loads(Path(args.split).read_text(encoding="utf-8")))
    by_id = {s.id: s for s in subjects}
    test = [by_id[i] for i in split.test]
    metrics = evaluate(model, test)
    print(json.dumps(metrics.to_json()))
    return 0


def _cmd_gradcheck(args) -> int:
    seed = _resolve_seed(args.seed)
    report = gradient_report(seed=seed)
    print(f"max relative error: {report['max_error']:.3e} (tolerance {REL_TOLERANCE:.0e})")
    worst = max(report["per_parameter"], key=report["per_parameter"].get)
    print(f"worst parameter: {worst}")
    return 0 if report["max_error"] < REL_TOLERANCE else 1


def _cmd_ablate(args) -> int:
    base_seed = _resolve_seed(args.seed)
    config = _load_config(args.config, base_seed)
    subjects = load_dataset(Path(args.data) / "manifest.json")
    seeds = [base_seed + i for i in range(args.seeds)]
    results = ablate(subjects, config, seeds, log=lambda msg: print(msg, file=sys.stderr))
    table = format_table(results)
    if args.out:
        Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "gradcheck": _cmd_gradcheck,
    "ablate": _cmd_ablate,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ContractError, DataFormatError, GraphValidationError, KeyError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
