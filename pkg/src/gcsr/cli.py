"""Command-line entry point.

Subcommands: trajectories, condense, eval, metrics, baseline. Every option
resolves with precedence

    command-line flag > environment variable (GCSR_<KEY>) > config file > default

and each run with an --out directory echoes its fully resolved configuration
to <out>/resolved_config.txt as "key = value" lines, which can be fed back
via --config to reproduce the run bit-identically.

Exit codes: 0 success, 1 validation error, 2 runtime/numeric failure.
"""

import argparse
import json
import os
import sys

from .data import load_dataset
from .engine import CondenseConfig, condense, load_condensed, save_condensed
from .errors import NumericError, ValidationError
from .evaluation import (
    ccns,
    metrics_report,
    random_coreset,
    silhouette,
    test_stage,
    write_ccns_csv,
    write_features_csv,
    write_metrics_report,
)
from .models import TrainConfig
from .trajectory import generate_expert_trajectories, load_buffer, save_buffer

ENV_PREFIX = "GCSR_"


class _Option:
    def __init__(self, key, type_, default, help_, required=False):
        self.key = key
        self.type = type_
        self.default = default
        self.help = help_
        self.required = required

    @property
    def flag(self):
        return "--" + self.key.replace("_", "-")


_TRAIN_OPTIONS = [
    _Option("arch", str, "sgc", "model architecture (sgc|gcn|mlp)"),
    _Option("epochs", int, 200, "training epochs per expert"),
    _Option("experts", int, 10, "number of expert runs"),
    _Option("lr", float, 0.01, "optimizer learning rate"),
    _Option("weight_decay", float, 5e-4, "L2 penalty strength"),
    _Option("hidden", int, 256, "hidden width"),
    _Option("k", int, 2, "propagation order"),
    _Option("seed", int, 0, "base random seed"),
]

_CONDENSE_OPTIONS = [
    _Option("ratio", float, None, "synthetic node count as a fraction of the original", required=True),
    _Option("alpha", float, 1.0, "prior regularization strength"),
    _Option("beta", float, 1.0, "history regularization strength"),
    _Option("tau", float, 0.95, "prior update momentum"),
    _Option("gamma", float, 0.5, "history update momentum"),
    _Option("inner_steps_n", int, 20, "student steps per outer iteration"),
    _Option("expert_steps_m", int, 1, "expert steps matched per segment"),
    _Option("feature_lr", float, 0.01, "Adam learning rate on the synthetic features"),
    _Option("inner_lr", float, 0.01, "SGD learning rate of the unrolled student"),
    _Option("k", int, 2, "propagation order"),
    _Option("init_k", int, None, "feature-init smoothing order (defaults to k)"),
    _Option("iters", int, 200, "outer iterations"),
    _Option("seed", int, 0, "random seed"),
]

_EVAL_OPTIONS = [
    _Option("arch", str, "gcn", "test-stage architecture (sgc|gcn|mlp)"),
    _Option("repeats", int, 10, "independent test-stage runs"),
    _Option("epochs", int, 600, "test-stage training epochs"),
    _Option("lr", float, 0.01, "test-stage learning rate"),
    _Option("weight_decay", float, 5e-4, "test-stage L2 penalty"),
    _Option("hidden", int, 256, "hidden width"),
    _Option("k", int, 2, "propagation order"),
    _Option("seed", int, 0, "base random seed"),
]


class _ArgumentParser(argparse.ArgumentParser):
    """argparse that reports usage problems as validation errors (exit 1)."""

    def error(self, message):
        raise ValidationError(message)


def _build_parser():
    parser = _ArgumentParser(prog="gcsr", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("trajectories", help="train expert models and store every checkpoint")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="buffer output directory")
    p.add_argument("--config", help="key = value config file")
    _add_options(p, _TRAIN_OPTIONS)

    p = sub.add_parser("condense", help="condense a dataset against an expert buffer")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--buffer", help="trajectory buffer directory")
    p.add_argument("--out", help="condensed graph output directory")
    p.add_argument("--config", help="key = value config file")
    _add_options(p, _CONDENSE_OPTIONS)

    p = sub.add_parser("eval", help="train models on a condensed graph and score on the original test set")
    p.add_argument("--condensed", help="condensed graph directory")
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="optional metrics output directory")
    p.add_argument("--config", help="key = value config file")
    _add_options(p, _EVAL_OPTIONS)

    p = sub.add_parser("metrics", help="compute a single quality metric")
    p.add_argument("metric", choices=("ccns", "silhouette"))
    p.add_argument("--input", help="dataset or condensed graph directory")
    p.add_argument("--out", help="optional output directory")

    p = sub.add_parser("baseline", help="build a coreset baseline")
    p.add_argument("kind", choices=("random",))
    p.add_argument("--dataset", help="dataset directory")
    p.add_argument("--out", help="output directory")
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--ratio", type=str, default=None, help="coreset size as a fraction")
    p.add_argument("--seed", type=str, default=None, help="random seed")

    return parser


def _add_options(parser, options):
    for opt in options:
        # parsed as strings so unset flags are distinguishable from defaults
        parser.add_argument(opt.flag, type=str, default=None, help=opt.help)


# ---------------------------------------------------------------------------
# Config resolution
# ---------------------------------------------------------------------------


def _read_config_file(path, known_keys):
    if not os.path.isfile(path):
        raise ValidationError(f"config file not found: {path}")
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValidationError(f"{path} line {lineno}: expected 'key = value'")
            key, _, value = line.partition("=")
            key = key.strip()
            if key not in known_keys:
                raise ValidationError(f"{path} line {lineno}: unknown key {key!r}")
            values[key] = value.strip()
    return values


def _coerce(key, raw, type_):
    if raw is None or type_ is str:
        return raw
    try:
        return type_(raw)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{key} must be {type_.__name__}, got {raw!r}") from exc


def _resolve(args, options, path_keys):
    """Merge flags, GCSR_* environment variables, the config file, and
    defaults into one dict, rejecting unknown config-file keys."""
    specs = {opt.key: opt for opt in options}
    for key in path_keys:
        specs[key] = _Option(key, str, None, "", required=path_keys[key])
    file_values = {}
    if getattr(args, "config", None):
        file_values = _read_config_file(args.config, set(specs))

    resolved = {}
    for key, opt in specs.items():
        raw = getattr(args, key, None)
        if raw is None:
            raw = os.environ.get(ENV_PREFIX + key.upper())
        if raw is None:
            raw = file_values.get(key)
        if raw is None:
            value = opt.default
        else:
            value = _coerce(key, raw, opt.type)
        if value is None and opt.required:
            raise ValidationError(f"missing required option {opt.flag}")
        resolved[key] = value
    return resolved


def _echo_config(resolved, out_dir):
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "resolved_config.txt"), "w") as fh:
        for key in sorted(resolved):
            value = resolved[key]
            if value is None:
                continue
            fh.write(f"{key} = {value!r}\n" if isinstance(value, float) else f"{key} = {value}\n")


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def _cmd_trajectories(args):
    cfg = _resolve(args, _TRAIN_OPTIONS, {"dataset": True, "out": True})
    dataset = load_dataset(cfg["dataset"])
    tc = TrainConfig(
        learning_rate=cfg["lr"],
        weight_decay=cfg["weight_decay"],
        epochs=cfg["epochs"],
        optimizer="adam",
        seed=cfg["seed"],
    )
    buffer = generate_expert_trajectories(
        dataset, arch=cfg["arch"], cfg=tc, num_experts=cfg["experts"],
        hidden=cfg["hidden"], k=cfg["k"],
    )
    save_buffer(buffer, cfg["out"])
    _echo_config(cfg, cfg["out"])
    print(f"wrote {buffer.num_experts} expert trajectories ({buffer.num_steps} steps each) to {cfg['out']}")
    return 0


def _cmd_condense(args):
    cfg = _resolve(args, _CONDENSE_OPTIONS, {"dataset": True, "buffer": True, "out": True})
    ccfg = CondenseConfig(
        ratio=cfg["ratio"],
        inner_steps_n=cfg["inner_steps_n"],
        expert_steps_m=cfg["expert_steps_m"],
        inner_lr=cfg["inner_lr"],
        feature_lr=cfg["feature_lr"],
        alpha=cfg["alpha"],
        beta=cfg["beta"],
        tau=cfg["tau"],
        gamma=cfg["gamma"],
        k=cfg["k"],
        init_k=cfg["init_k"],
        outer_iterations=cfg["iters"],
        seed=cfg["seed"],
    )
    dataset = load_dataset(cfg["dataset"])
    buffer = load_buffer(cfg["buffer"])
    condensed, loss_log = condense(dataset, buffer, ccfg)
    save_condensed(condensed, cfg["out"], loss_log=loss_log)
    _echo_config(cfg, cfg["out"])
    tail = loss_log[-1] if loss_log else float("nan")
    print(
        f"condensed {dataset.num_nodes} -> {condensed.num_nodes} nodes "
        f"({len(loss_log)} iterations, final matching loss {tail:.4g}); wrote {cfg['out']}"
    )
    return 0


def _cmd_eval(args):
    cfg = _resolve(args, _EVAL_OPTIONS, {"condensed": True, "dataset": True, "out": False})
    condensed = load_condensed(cfg["condensed"])
    dataset = load_dataset(cfg["dataset"])
    tc = TrainConfig(
        learning_rate=cfg["lr"],
        weight_decay=cfg["weight_decay"],
        epochs=cfg["epochs"],
        optimizer="adam",
        seed=cfg["seed"],
    )
    report = test_stage(
        condensed, dataset, arch=cfg["arch"], repeats=cfg["repeats"],
        cfg=tc, hidden=cfg["hidden"], k=cfg["k"], seed=cfg["seed"],
    )
    num_classes = condensed.labels.per_class_counts.size
    ccns_matrix = ccns(condensed.adjacency, condensed.labels.labels, num_classes)
    sil = silhouette(condensed.features, condensed.labels.labels)
    out = metrics_report(report, ccns_matrix, sil, cfg)
    print(json.dumps(out, indent=1, sort_keys=True))
    if cfg["out"]:
        os.makedirs(cfg["out"], exist_ok=True)
        write_metrics_report(out, os.path.join(cfg["out"], "metrics.json"))
        write_ccns_csv(ccns_matrix, os.path.join(cfg["out"], "ccns.csv"))
        write_features_csv(
            condensed.features, condensed.labels.labels,
            os.path.join(cfg["out"], "features_labeled.csv"),
        )
        _echo_config(cfg, cfg["out"])
    return 0


def _cmd_metrics(args):
    if not args.input:
        raise ValidationError("missing required option --input")
    adjacency, features, labels, num_classes = _load_any_graph(args.input)
    if args.metric == "ccns":
        matrix = ccns(adjacency, labels, num_classes)
        payload = {"ccns": matrix.tolist()}
    else:
        payload = {"silhouette": silhouette(features, labels)}
    print(json.dumps(payload, indent=1, sort_keys=True))
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        if args.metric == "ccns":
            write_ccns_csv(matrix, os.path.join(args.out, "ccns.csv"))
        with open(os.path.join(args.out, f"{args.metric}.json"), "w") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)
            fh.write("\n")
    return 0


def _load_any_graph(path):
    """Accept either a condensed graph directory or a dataset directory."""
    if os.path.isfile(os.path.join(path, "condensed_meta.json")):
        cg = load_condensed(path)
        return cg.adjacency, cg.features, cg.labels.labels, cg.labels.per_class_counts.size
    if os.path.isfile(os.path.join(path, "meta.json")):
        ds = load_dataset(path)
        return ds.adjacency, ds.features, ds.labels, ds.num_classes
    raise ValidationError(f"{path} is neither a dataset nor a condensed graph directory")


def _cmd_baseline(args):
    options = [
        _Option("ratio", float, None, "", required=True),
        _Option("seed", int, 0, ""),
    ]
    cfg = _resolve(args, options, {"dataset": True, "out": True})
    dataset = load_dataset(cfg["dataset"])
    coreset = random_coreset(dataset, cfg["ratio"], cfg["seed"])
    save_condensed(coreset, cfg["out"])
    _echo_config(cfg, cfg["out"])
    print(f"wrote random coreset with {coreset.num_nodes} nodes to {cfg['out']}")
    return 0


_COMMANDS = {
    "trajectories": _cmd_trajectories,
    "condense": _cmd_condense,
    "eval": _cmd_eval,
    "metrics": _cmd_metrics,
    "baseline": _cmd_baseline,
}


def run(argv):
    """Parse and execute; returns the process exit code."""
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return _COMMANDS[args.command](args)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
