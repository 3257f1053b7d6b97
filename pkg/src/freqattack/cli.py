"""Command-line entry point wiring the modules into reproducible
pipelines.

Every subcommand resolves its parameters as: command-line flag, then the
JSON config file (flat dotted keys like "evaluate.epsilon", bare keys for
globals like "seed"), then the built-in default.  Each run writes a
run.json with the resolved config under the output directory, and reruns
with the same seed and config produce identical artifacts.

Exit codes: 0 success, 2 config error, 3 IO error, 4 oracle transport
error, 5 attack failure on a single-image attack.
"""

import argparse
import json
import os
import sys
from dataclasses import asdict

import numpy as np

from . import analysis, attack as attack_mod, core, metrics as metrics_mod, oracle as oracle_mod
from . import wavelet, whitebox

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_ORACLE = 4
EXIT_ATTACK_FAILED = 5


class ConfigError(Exception):
    pass


class IOFailure(Exception):
    pass


def _io(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (FileNotFoundError, OSError, ValueError, json.JSONDecodeError) as exc:
        raise IOFailure(str(exc)) from exc


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config file must hold a JSON object with flat dotted keys")
    return cfg


def _pick(args, config, prefix, name, default):
    v = getattr(args, name.replace("-", "_"), None)
    if v is not None:
        return v
    for key in (f"{prefix}.{name}", name):
        if key in config:
            return config[key]
    return default


def _bands_arg(value):
    if isinstance(value, (list, tuple)):
        return tuple(value)
    return tuple(b for b in str(value).split(",") if b)


def _attack_config(args, config, prefix):
    try:
        return attack_mod.AttackConfig(
            epsilon=float(_pick(args, config, prefix, "epsilon", 1.5)),
            n_coords=int(_pick(args, config, prefix, "n-coords", 4)),
            bands=_bands_arg(_pick(args, config, prefix, "bands", attack_mod.DEFAULT_BANDS)),
            depth=int(_pick(args, config, prefix, "depth", 3)),
            filter_name=str(_pick(args, config, prefix, "filter", "haar")),
            max_queries=int(_pick(args, config, prefix, "max-queries", 5000)),
            gamma=float(_pick(args, config, prefix, "gamma", 10.0)),
            beta=float(_pick(args, config, prefix, "beta", 0.9)),
            w_min=float(_pick(args, config, prefix, "w-min", 0.05)),
            mode=str(_pick(args, config, prefix, "mode", "frequency")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _make_oracle(args, config, prefix):
    kind = str(_pick(args, config, prefix, "oracle", "builtin"))
    timeout = float(_pick(args, config, prefix, "timeout", 10.0))
    try:
        if kind == "builtin":
            ckpt = _pick(args, config, prefix, "checkpoint", None)
            if ckpt is None:
                raise ConfigError("builtin oracle needs --checkpoint")
            model = _io(whitebox.load_checkpoint, ckpt)
            return oracle_mod.BuiltinOracle(model)
        if kind == "http":
            endpoint = _pick(args, config, prefix, "endpoint", None)
            if endpoint is None:
                raise ConfigError("http oracle needs --endpoint")
            return oracle_mod.HttpOracle(endpoint, timeout=timeout)
        if kind == "stdio":
            command = _pick(args, config, prefix, "command", None)
            classes = _pick(args, config, prefix, "classes", None)
            if command is None or classes is None:
                raise ConfigError("stdio oracle needs --command and --classes")
            import shlex

            return oracle_mod.StdioOracle(
                shlex.split(str(command)), classes=int(classes), timeout=timeout
            )
    except oracle_mod.OracleError:
        raise
    raise ConfigError(f"unknown oracle kind {kind!r}")


def _load_image_any(path):
    if str(path).endswith(".rt"):
        return _io(core.load_raw_tensor, path)
    return _io(core.load_png, path)


def _write_manifest(out, command, resolved, seed):
    analysis.write_run_manifest(out, command, resolved, seed)


def cmd_make_dataset(args, config):
    seed = int(_pick(args, config, "make-dataset", "seed", 0))
    count = int(_pick(args, config, "make-dataset", "count", 60))
    out = _pick(args, config, "make-dataset", "out", None)
    cifar = _pick(args, config, "make-dataset", "cifar", None)
    if out is None:
        raise ConfigError("make-dataset needs --out")
    if cifar is not None:
        ds = _io(core.load_cifar10_binary, cifar, count)
        source = f"cifar10:{cifar}"
    else:
        ds = core.synthetic_dataset(count, seed)
        source = "synthetic"
    _io(core.save_dataset, out, ds)
    _write_manifest(out, "make-dataset", {"count": count, "source": source}, seed)
    print(f"wrote {count} {source} images to {out}")
    return EXIT_OK


def cmd_decompose(args, config):
    out = _pick(args, config, "decompose", "out", None)
    image = _pick(args, config, "decompose", "image", None)
    if out is None or image is None:
        raise ConfigError("decompose needs --image and --out")
    filter_name = str(_pick(args, config, "decompose", "filter", "haar"))
    depth = int(_pick(args, config, "decompose", "depth", 3))
    img = _load_image_any(image)
    try:
        filt = wavelet.get_filter(filter_name)
        tree = wavelet.decompose_image(img, filt, depth)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    _io(wavelet.save_band_tree, out, tree)
    _write_manifest(out, "decompose", {"filter": filter_name, "depth": depth}, None)
    print(f"wrote {2 ** depth} bands to {out}")
    return EXIT_OK


def cmd_reconstruct(args, config):
    tree_dir = _pick(args, config, "reconstruct", "tree", None)
    out = _pick(args, config, "reconstruct", "out", None)
    if tree_dir is None or out is None:
        raise ConfigError("reconstruct needs --tree and --out")
    tree = _io(wavelet.load_band_tree, tree_dir)
    try:
        filt = wavelet.get_filter(tree.filter_name)
        img = wavelet.reconstruct_image(tree, filt)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    if str(out).endswith(".rt"):
        _io(core.save_raw_tensor, out, img)
    else:
        _io(core.save_png, out, core.clip01(img))
    print(f"reconstructed image written to {out}")
    return EXIT_OK


def cmd_train(args, config):
    seed = int(_pick(args, config, "train", "seed", 0))
    out = _pick(args, config, "train", "out", None)
    if out is None:
        raise ConfigError("train needs --out")
    dataset_dir = _pick(args, config, "train", "dataset", None)
    count = int(_pick(args, config, "train", "count", 600))
    epochs = int(_pick(args, config, "train", "epochs", 20))
    lr = float(_pick(args, config, "train", "lr", 0.05))
    if dataset_dir is None:
        ds = core.synthetic_dataset(count, seed)
    else:
        ds = _io(core.load_dataset, dataset_dir)
        if count and count < len(ds):
            ds = ds.subset(np.arange(count))
    model = whitebox.init_model(ds.images.shape[1:], ds.num_classes, seed)
    model, history = whitebox.train(model, ds, epochs=epochs, lr=lr, rng=core.make_rng(seed + 1))
    _io(whitebox.save_checkpoint, out, model)
    resolved = {"epochs": epochs, "lr": lr, "count": len(ds), "dataset": dataset_dir or "synthetic"}
    _write_manifest(out, "train", resolved, seed)
    with open(os.path.join(out, "history.json"), "w") as fh:
        json.dump({"train_accuracy": history}, fh)
    print(f"train accuracy {history[-1]:.4f} after {epochs} epochs; checkpoint at {out}")
    return EXIT_OK


def _whitebox_attack(args, config, prefix):
    ckpt = _pick(args, config, prefix, "checkpoint", None)
    image = _pick(args, config, prefix, "image", None)
    label = _pick(args, config, prefix, "label", None)
    out = _pick(args, config, prefix, "out", None)
    if None in (ckpt, image, label, out):
        raise ConfigError(f"{prefix} needs --checkpoint, --image, --label and --out")
    model = _io(whitebox.load_checkpoint, ckpt)
    x = _load_image_any(image)
    y = int(label)
    try:
        if prefix == "fgsm":
            cfg = whitebox.FgsmConfig(epsilon=float(_pick(args, config, prefix, "epsilon", 0.03)))
            x_adv = whitebox.fgsm(model, x, y, cfg)
            resolved = {"epsilon": cfg.epsilon}
        else:
            eps = float(_pick(args, config, prefix, "epsilon", 0.03))
            alpha = _pick(args, config, prefix, "alpha", None)
            cfg = whitebox.PgdConfig(
                epsilon=eps,
                alpha=float(alpha) if alpha is not None else None,
                steps=int(_pick(args, config, prefix, "steps", 10)),
            )
            x_adv = whitebox.pgd(model, x, y, cfg)
            resolved = {"epsilon": cfg.epsilon, "alpha": cfg.alpha, "steps": cfg.steps}
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    os.makedirs(out, exist_ok=True)
    _io(core.save_png, os.path.join(out, "adv.png"), x_adv)
    _io(core.save_raw_tensor, os.path.join(out, "adv.rt"), x_adv)
    pm = metrics_mod.compute_pair_metrics(x, x_adv)
    with open(os.path.join(out, "metrics.json"), "w") as fh:
        json.dump(asdict(pm), fh, indent=2)
    _write_manifest(out, prefix, resolved, None)
    print(f"{prefix} adversarial example written to {out} (l2={pm.l2:.4f})")
    return EXIT_OK


def cmd_fgsm(args, config):
    return _whitebox_attack(args, config, "fgsm")


def cmd_pgd(args, config):
    return _whitebox_attack(args, config, "pgd")


def cmd_analyze(args, config):
    ckpt = _pick(args, config, "analyze", "checkpoint", None)
    dataset_dir = _pick(args, config, "analyze", "dataset", None)
    out = _pick(args, config, "analyze", "out", None)
    if None in (ckpt, dataset_dir, out):
        raise ConfigError("analyze needs --checkpoint, --dataset and --out")
    method = str(_pick(args, config, "analyze", "attack", "fgsm"))
    filter_name = str(_pick(args, config, "analyze", "filter", "haar"))
    depth = int(_pick(args, config, "analyze", "depth", 3))
    count = _pick(args, config, "analyze", "count", None)
    model = _io(whitebox.load_checkpoint, ckpt)
    ds = _io(core.load_dataset, dataset_dir)
    if count is not None and int(count) < len(ds):
        ds = ds.subset(np.arange(int(count)))
    try:
        row = analysis.band_similarity_study(
            ds, model, method, filter_name=filter_name, depth=depth,
            dataset_name=os.path.basename(os.path.normpath(dataset_dir)),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    os.makedirs(out, exist_ok=True)
    analysis.similarity_rows_to_csv(os.path.join(out, "similarity.csv"), [row])
    flags = analysis.qualitative_ordering_flags(row)
    with open(os.path.join(out, "analysis.json"), "w") as fh:
        json.dump({"qualitative": flags, "values": row.values}, fh, indent=2)
    _write_manifest(out, "analyze", {"attack": method, "filter": filter_name, "depth": depth}, None)
    print(f"similarity table written to {out} (d<a at depth 1: {flags['depth1_d_below_a']})")
    return EXIT_OK


def cmd_attack(args, config):
    image = _pick(args, config, "attack", "image", None)
    label = _pick(args, config, "attack", "label", None)
    out = _pick(args, config, "attack", "out", None)
    if None in (image, label, out):
        raise ConfigError("attack needs --image, --label and --out")
    seed = int(_pick(args, config, "attack", "seed", 0))
    cfg = _attack_config(args, config, "attack")
    orc = _make_oracle(args, config, "attack")
    x = _load_image_any(image)
    try:
        result = attack_mod.run_attack(x, int(label), orc, cfg, core.make_rng(seed))
    except attack_mod.AttackInterrupted as exc:
        os.makedirs(out, exist_ok=True)
        attack_mod.write_trace(os.path.join(out, "trace.jsonl"), exc.partial_result)
        raise
    os.makedirs(out, exist_ok=True)
    attack_mod.write_trace(os.path.join(out, "trace.jsonl"), result)
    _io(core.save_png, os.path.join(out, "adv.png"), result.x_adv)
    _io(core.save_raw_tensor, os.path.join(out, "adv.rt"), result.x_adv)
    summary = {
        "success": result.success,
        "status": result.status,
        "queries": result.queries,
        "initial_confidence": result.initial_confidence,
        "final_confidence": result.final_confidence,
        "accepted_steps": len(result.accepted),
        "metrics": asdict(result.metrics) if result.metrics else None,
    }
    with open(os.path.join(out, "result.json"), "w") as fh:
        json.dump(summary, fh, indent=2)
    _write_manifest(out, "attack", _cfg_dict(cfg), seed)
    print(
        f"attack {'succeeded' if result.success else 'FAILED (' + result.status + ')'} "
        f"after {result.queries} queries"
    )
    return EXIT_OK if result.success else EXIT_ATTACK_FAILED


def _cfg_dict(cfg):
    d = asdict(cfg)
    d["bands"] = list(d["bands"])
    return d


def cmd_evaluate(args, config):
    dataset_dir = _pick(args, config, "evaluate", "dataset", None)
    out = _pick(args, config, "evaluate", "out", None)
    if None in (dataset_dir, out):
        raise ConfigError("evaluate needs --dataset and --out")
    seed = int(_pick(args, config, "evaluate", "seed", 0))
    count = _pick(args, config, "evaluate", "count", None)
    anq_mode = str(_pick(args, config, "evaluate", "anq-mode", "successes-only"))
    cfg = _attack_config(args, config, "evaluate")
    orc = _make_oracle(args, config, "evaluate")
    ds = _io(core.load_dataset, dataset_dir)
    if count is not None and int(count) < len(ds):
        ds = ds.subset(np.arange(int(count)))
    _write_manifest(out, "evaluate", _cfg_dict(cfg) | {"anq_mode": anq_mode, "count": len(ds)}, seed)
    report, rows, curve = analysis.evaluate_attack(
        ds, orc, cfg, seed, mode=anq_mode, out_dir=out
    )
    if report is None:
        print("no correctly-classified images to attack")
        return EXIT_OK
    print(
        f"ASR {report.asr:.3f} ({report.succeeded}/{report.attempted}), "
        f"ANQ {report.anq:.2f}, MNQ {report.mnq:.1f}; artifacts in {out}"
    )
    return EXIT_OK


def cmd_ablate(args, config):
    dataset_dir = _pick(args, config, "ablate", "dataset", None)
    out = _pick(args, config, "ablate", "out", None)
    if None in (dataset_dir, out):
        raise ConfigError("ablate needs --dataset and --out")
    seed = int(_pick(args, config, "ablate", "seed", 0))
    count = _pick(args, config, "ablate", "count", None)
    cfg = _attack_config(args, config, "ablate")
    subsets_arg = _pick(args, config, "ablate", "subsets", None)
    spec = analysis.AblationSpec(
        subsets=tuple(tuple(_bands_arg(s)) for s in str(subsets_arg).split(";"))
        if subsets_arg is not None
        else None
    )
    orc = _make_oracle(args, config, "ablate")
    ds = _io(core.load_dataset, dataset_dir)
    if count is not None and int(count) < len(ds):
        ds = ds.subset(np.arange(int(count)))
    _write_manifest(out, "ablate", _cfg_dict(cfg), seed)
    results = analysis.ablation_run(ds, orc, cfg, spec, seed, out_dir=out)
    for subset, (report, _, _) in results.items():
        print(f"{'+'.join(subset):24s} ASR {report.asr:.3f} ANQ {report.anq:.2f}")
    return EXIT_OK


def cmd_metrics(args, config):
    x = _load_image_any(args.image)
    x_adv = _load_image_any(args.adversarial)
    try:
        pm = metrics_mod.compute_pair_metrics(x, x_adv)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    for k, v in asdict(pm).items():
        print(f"{k}={v:.6g}")
    out = _pick(args, config, "metrics", "out", None)
    if out is not None:
        with open(out, "w") as fh:
            json.dump(asdict(pm), fh, indent=2)
    return EXIT_OK


def _add_oracle_flags(p):
    p.add_argument("--oracle", choices=["builtin", "http", "stdio"], default=None)
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--endpoint", default=None)
    p.add_argument("--command", default=None)
    p.add_argument("--classes", type=int, default=None)
    p.add_argument("--timeout", type=float, default=None)


def _add_attack_flags(p):
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--n-coords", type=int, default=None)
    p.add_argument("--bands", default=None, help="comma-separated band paths")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--filter", default=None)
    p.add_argument("--max-queries", type=int, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--w-min", type=float, default=None)
    p.add_argument("--mode", choices=list(attack_mod.MODES), default=None)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="freqattack",
        description="Wavelet-packet frequency analysis and band-constrained black-box attacks",
    )
    parser.add_argument("--config", default=None, help="JSON config file with flat dotted keys")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser(
        "make-dataset", help="generate the synthetic 3-class dataset or ingest CIFAR-10 binary"
    )
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--cifar", default=None, help="CIFAR-10 binary batch file to ingest instead")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_make_dataset)

    p = sub.add_parser("decompose", help="wavelet-packet decompose an image")
    p.add_argument("--image", default=None)
    p.add_argument("--filter", default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("reconstruct", help="invert a band-tree directory back to an image")
    p.add_argument("--tree", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("train", help="train the builtin classifier")
    p.add_argument("--dataset", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_train)

    for name in ("fgsm", "pgd"):
        p = sub.add_parser(name, help=f"generate a {name.upper()} adversarial example")
        p.add_argument("--checkpoint", default=None)
        p.add_argument("--image", default=None)
        p.add_argument("--label", type=int, default=None)
        p.add_argument("--epsilon", type=float, default=None)
        if name == "pgd":
            p.add_argument("--alpha", type=float, default=None)
            p.add_argument("--steps", type=int, default=None)
        p.add_argument("--out", default=None)
        p.set_defaults(func=cmd_fgsm if name == "fgsm" else cmd_pgd)

    p = sub.add_parser("analyze", help="per-band cosine similarity study")
    p.add_argument("--checkpoint", default=None)
    p.add_argument("--dataset", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--attack", choices=list(analysis.ATTACK_METHODS), default=None)
    p.add_argument("--filter", default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("attack", help="black-box attack on one image")
    p.add_argument("--image", default=None)
    p.add_argument("--label", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    _add_attack_flags(p)
    _add_oracle_flags(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("evaluate", help="attack a dataset and aggregate metrics")
    p.add_argument("--dataset", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--anq-mode", choices=list(metrics_mod.AGG_MODES), default=None)
    p.add_argument("--out", default=None)
    _add_attack_flags(p)
    _add_oracle_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="band-subset ablation with paired seeds")
    p.add_argument("--dataset", default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--subsets", default=None, help='e.g. "aaa;daa;aaa,daa"')
    p.add_argument("--out", default=None)
    _add_attack_flags(p)
    _add_oracle_flags(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("metrics", help="distance metrics between two images")
    p.add_argument("image")
    p.add_argument("adversarial")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_metrics)

    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        config = _load_config(args.config)
        return args.func(args, config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except IOFailure as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except attack_mod.AttackInterrupted as exc:
        print(f"oracle error: {exc.__cause__}", file=sys.stderr)
        return EXIT_ORACLE
    except oracle_mod.OracleError as exc:
        print(f"oracle error: {exc}", file=sys.stderr)
        return EXIT_ORACLE


if __name__ == "__main__":
    sys.exit(main())
