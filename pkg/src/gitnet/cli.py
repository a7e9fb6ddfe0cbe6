"""Batch command-line front end.

Subcommands:
    generate CONFIG             write train/test OPDS1 dataset files
    train    CONFIG             fit bases, train, write checkpoint + history CSV
    eval     CHECKPOINT DATASET print error metrics, write per-sample errors CSV
    flops    CONFIG             write analytic (and optionally instrumented) costs

Configs are plain text, one ``key = value`` per line with ``#`` comments.
Unknown keys are rejected. Exit codes: 0 ok, 2 config error, 3 I/O error,
4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import cost, formats, model as modelmod, pca, pdedata, train as trainmod
from .tensor import count_flops


class ConfigError(ValueError):
    pass


def _fmt(x):
    """CSV number formatting: '.' decimal separator, 17 significant digits."""
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


_KEY_TYPES = {
    "problem": str, "n_train": int, "n_test": int, "seed": int,
    "mesh_n": int, "nx": int, "ny": int, "lengthscale": float,
    "n_in": int, "n_out": int, "rank": int, "noise_std": float,
    "train_path": str, "test_path": str, "checkpoint_path": str,
    "history_path": str, "cost_path": str, "errors_path": str,
    "C": int, "K": int, "L": int, "variant": str,
    "energy_threshold": float, "p_cap": int,
    "epochs": int, "batch_size": int, "lr": float,
    "activation": str, "loss": str, "arch": str,
    "hidden_width": int, "n_hidden": int,
    "n_points": int, "d_in": int, "d_out": int, "p_u": int, "p_v": int,
}

_CHOICES = {
    "problem": ("advection", "poisson", "linear"),
    "variant": ("standard", "pre_residual"),
    "activation": ("gelu", "identity"),
    "loss": ("absolute_mse", "relative"),
    "arch": ("gitnet", "pcanet"),
}

_POSITIVE = {
    "n_train", "n_test", "mesh_n", "nx", "ny", "n_in", "n_out", "rank",
    "C", "K", "L", "p_cap", "epochs", "batch_size",
    "hidden_width", "n_hidden", "n_points", "d_in", "d_out", "p_u", "p_v",
}


def parse_config(path):
    try:
        with open(path) as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    config = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in config:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        try:
            typed = _KEY_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(
                f"{path}:{lineno}: bad value for {key!r}: {value!r}"
            ) from exc
        if key in _CHOICES and typed not in _CHOICES[key]:
            raise ConfigError(
                f"{path}:{lineno}: {key} must be one of {_CHOICES[key]}, got {typed!r}"
            )
        if key in _POSITIVE and typed <= 0:
            raise ConfigError(f"{path}:{lineno}: {key} must be positive, got {typed}")
        config[key] = typed
    return config


def _require(config, keys, path):
    for key in keys:
        if key not in config:
            raise ConfigError(f"{path}: missing required key {key!r}")


def _generate_full(config):
    n_total = config["n_train"] + config["n_test"]
    seed = config["seed"]
    problem = config["problem"]
    if problem == "advection":
        return pdedata.advection_dataset(
            pdedata.Mesh1D(config["mesh_n"]), n_total, seed
        )
    if problem == "poisson":
        return pdedata.poisson_dataset(
            pdedata.Mesh2D(config["nx"], config["ny"]), n_total, seed,
            lengthscale=config.get("lengthscale", 0.2),
        )
    return pdedata.linear_operator_dataset(
        config["n_in"], config["n_out"], config["rank"], n_total,
        config["noise_std"], seed,
    )


def cmd_generate(config_path):
    config = parse_config(config_path)
    _require(config, ["problem", "n_train", "n_test", "seed",
                      "train_path", "test_path"], config_path)
    problem_keys = {
        "advection": ["mesh_n"],
        "poisson": ["nx", "ny"],
        "linear": ["n_in", "n_out", "rank", "noise_std"],
    }
    _require(config, problem_keys[config["problem"]], config_path)
    full = _generate_full(config)
    n_train = config["n_train"]
    train_set = pdedata.Dataset(
        inputs=full.inputs[:n_train], outputs=full.outputs[:n_train],
        generator=full.generator, seed=full.seed,
    )
    test_set = pdedata.Dataset(
        inputs=full.inputs[n_train:], outputs=full.outputs[n_train:],
        generator=full.generator, seed=full.seed,
    )
    formats.write_dataset(config["train_path"], train_set)
    formats.write_dataset(config["test_path"], test_set)
    for name, ds, path in (("train", train_set, config["train_path"]),
                           ("test", test_set, config["test_path"])):
        print(f"{name}: {ds.n_samples} samples, inputs {ds.inputs.shape[1:]}, "
              f"outputs {ds.outputs.shape[1:]}, seed {ds.seed} -> {path}")
    return 0


def _fit_bases(train_set, config):
    threshold = config.get("energy_threshold", pca.DEFAULT_ENERGY_THRESHOLD)
    p_cap = config.get("p_cap", pca.DEFAULT_P_CAP)
    seed = config["seed"]
    n, d_in, n_u = train_set.inputs.shape
    _, d_out, n_v = train_set.outputs.shape
    basis_u = pca.fit_pca(train_set.inputs.reshape(n * d_in, n_u),
                          threshold, p_cap, seed)
    basis_v = pca.fit_pca(train_set.outputs.reshape(n * d_out, n_v),
                          threshold, p_cap, seed)
    return basis_u, basis_v


def cmd_train(config_path):
    config = parse_config(config_path)
    _require(config, ["train_path", "test_path", "checkpoint_path", "history_path",
                      "C", "K", "L", "epochs", "batch_size", "lr", "seed"],
             config_path)
    train_set = formats.read_dataset(config["train_path"])
    test_set = formats.read_dataset(config["test_path"])
    basis_u, basis_v = _fit_bases(train_set, config)
    d_in = train_set.inputs.shape[1]
    d_out = train_set.outputs.shape[1]
    arch = config.get("arch", "gitnet")
    seed = config["seed"]
    if arch == "gitnet":
        net = modelmod.init_params(
            d_in, d_out, basis_u.n_components, basis_v.n_components,
            config["C"], config["K"], config["L"],
            variant=config.get("variant", "standard"), seed=seed,
            activation=config.get("activation", "gelu"),
        )
    else:
        net = modelmod.init_pcanet(
            d_in, d_out, basis_u.n_components, basis_v.n_components,
            hidden_width=config.get("hidden_width", config["K"]),
            n_hidden=config.get("n_hidden", 4), seed=seed,
        )
    cfg = trainmod.TrainConfig(
        epochs=config["epochs"], batch_size=config["batch_size"],
        lr=config["lr"], seed=seed, loss=config.get("loss", "absolute_mse"),
    )
    result = trainmod.train_loop(
        net, basis_u, basis_v, train_set.inputs, train_set.outputs, cfg,
        test_inputs=test_set.inputs, test_outputs=test_set.outputs,
    )
    if arch == "gitnet":
        formats.write_gitnet_checkpoint(
            config["checkpoint_path"], result.model, basis_u, basis_v)
    else:
        formats.write_pcanet_checkpoint(
            config["checkpoint_path"], result.model, basis_u, basis_v)
    hist = result.history
    with open(config["history_path"], "w") as fh:
        fh.write("epoch,train_loss,test_rel_error,lr\n")
        for e, tl, te, lr in zip(hist.epochs, hist.train_loss,
                                 hist.test_rel_error, hist.lr):
            fh.write(f"{e},{_fmt(tl)},{_fmt(te)},{_fmt(lr)}\n")
    print(f"trained {arch}: final test rel error "
          f"{_fmt(hist.test_rel_error[-1])}, best {_fmt(result.best_test_error)}")
    print(f"checkpoint -> {config['checkpoint_path']}")
    print(f"history -> {config['history_path']}")
    return 0


def cmd_eval(checkpoint_path, dataset_path, errors_csv=None):
    net, basis_u, basis_v = formats.read_checkpoint(checkpoint_path)
    dataset = formats.read_dataset(dataset_path)
    preds = trainmod.predict(net, basis_u, basis_v, dataset.inputs)
    errors = trainmod.per_sample_errors(preds, dataset.outputs)
    print(f"samples: {errors.size}")
    print(f"mean_rel_error: {_fmt(errors.mean())}")
    print(f"min: {_fmt(errors.min())}")
    print(f"median: {_fmt(np.median(errors))}")
    print(f"max: {_fmt(errors.max())}")
    if errors_csv is not None:
        with open(errors_csv, "w") as fh:
            fh.write("sample,rel_error\n")
            for i, err in enumerate(errors):
                fh.write(f"{i},{_fmt(err)}\n")
        print(f"errors -> {errors_csv}")
    return 0


def _trivial_basis(n_points, p):
    components = np.zeros((p, n_points))
    components[np.arange(p), np.arange(p)] = 1.0
    return pca.PcaBasis(
        n_points=n_points, mean=np.zeros(n_points), components=components,
        singular_values=np.ones(p),
    )


def cmd_flops(config_path, instrument=False):
    config = parse_config(config_path)
    _require(config, ["n_points", "d_in", "d_out", "C", "K", "L", "cost_path"],
             config_path)
    n_p = config["n_points"]
    d_in, d_out = config["d_in"], config["d_out"]
    c, k, l = config["C"], config["K"], config["L"]
    p_u = config.get("p_u", k)
    p_v = config.get("p_v", k)
    activation = config.get("activation", "gelu")
    widths = ([d_in * p_u]
              + [config.get("hidden_width", k)] * config.get("n_hidden", 4)
              + [d_out * p_v])
    git_report = cost.flops_gitnet_exact(n_p, d_in, d_out, p_u, p_v, c, k, l,
                                         activation=activation)
    pca_report = cost.flops_pcanet_exact(n_p, d_in, d_out, p_u, p_v, widths)
    rows = [
        ("gitnet", git_report.flops),
        ("pcanet", pca_report.flops),
        ("fno", cost.flops_fno_scaling(n_p, c, l)),
        ("pod_deeponet", cost.flops_pod_deeponet_scaling(n_p, c, k)),
    ]
    instrumented = {}
    if instrument:
        if p_u > n_p or p_v > n_p:
            raise ConfigError("instrumented run needs p_u, p_v <= n_points")
        basis_u = _trivial_basis(n_p, p_u)
        basis_v = _trivial_basis(n_p, p_v)
        git = modelmod.init_params(d_in, d_out, p_u, p_v, c, k, l,
                                   seed=config.get("seed", 0),
                                   activation=activation)
        f = np.zeros((d_in, n_p))
        with count_flops() as counter:
            modelmod.gitnet_forward(git, basis_u, basis_v, f)
        instrumented["gitnet"] = counter.total
        mlp = modelmod.init_pcanet(d_in, d_out, p_u, p_v,
                                   hidden_width=config.get("hidden_width", k),
                                   n_hidden=config.get("n_hidden", 4),
                                   seed=config.get("seed", 0))
        with count_flops() as counter:
            modelmod.pcanet_forward(mlp, basis_u, basis_v, f)
        instrumented["pcanet"] = counter.total
    header = "architecture,flops" + (",instrumented" if instrument else "")
    with open(config["cost_path"], "w") as fh:
        fh.write(header + "\n")
        for name, flops in rows:
            line = f"{name},{flops}"
            if instrument:
                line += f",{instrumented.get(name, '')}"
            fh.write(line + "\n")
    print(f"cost report -> {config['cost_path']}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gitnet",
        description="Operator-learning toolkit: data generation, training, "
                    "evaluation, and cost reporting.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("generate", "train", "flops"):
        p = sub.add_parser(name)
        p.add_argument("config")
        if name == "flops":
            p.add_argument("--instrument", action="store_true")
    p_eval = sub.add_parser("eval")
    p_eval.add_argument("checkpoint")
    p_eval.add_argument("dataset")
    p_eval.add_argument("--errors-csv", default=None)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            return cmd_generate(args.config)
        if args.command == "train":
            return cmd_train(args.config)
        if args.command == "eval":
            return cmd_eval(args.checkpoint, args.dataset, args.errors_csv)
        return cmd_flops(args.config, instrument=args.instrument)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, formats.FormatError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except trainmod.NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
