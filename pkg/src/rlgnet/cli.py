"""``rlgnet`` command line: prepare, stats, train, eval, ablate, sweep.

Exit codes: 0 ok, 1 internal error, 2 usage error, 3 missing artifact or file,
4 dataset error, 5 checkpoint error, 6 configuration error, 7 training diverged.
Failures print one line to stderr: ``rlgnet: error code=<CODE> exit=<n> msg=<json string>``.
"""
from __future__ import annotations

import argparse
import csv
import datetime as dt
import io
import json
import logging
import os
import sys
from dataclasses import asdict, dataclass, field

from rlgnet import kernels
from rlgnet.checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from rlgnet.config import MODULE_IDS, ConfigError, TrainConfig, load_config
from rlgnet.data import (
    DatasetError,
    MissingFileError,
    add_reverse_relations,
    dataset_dir,
    fingerprint,
    load_dataset,
    load_sequence,
    save_sequence,
)
from rlgnet.evaluate import (
    ALL_COMBOS,
    EnsembleConfig,
    MissingModule,
    UnsupportedCombination,
    ablate,
    check_combo,
    evaluate,
)
from rlgnet.history import build_index, repeating_proportion
from rlgnet.train import TrainingDivergence, train_module

log = logging.getLogger("rlgnet")

DEFAULT_K_LIST = "5,10,20,30,100,inf"
CACHE_VERSION = 1
EXIT_CODES = {
    "INTERNAL": 1,
    "USAGE": 2,
    "MISSING_ARTIFACT": 3,
    "DATASET_ERROR": 4,
    "CHECKPOINT_ERROR": 5,
    "CONFIG_ERROR": 6,
    "TRAINING_DIVERGED": 7,
}


class MissingArtifact(FileNotFoundError):
    pass


@dataclass
class RunManifest:
    command: str
    dataset: str
    config_hash: str
    seed: int
    artifacts: dict = field(default_factory=dict)
    started: str = ""
    finished: str = ""
    kernel_backend: str = kernels.BACKEND


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds")


class Workspace:
    """Paths of the cached artifacts for one dataset under the runs directory."""

    def __init__(self, runs_root: str, dataset: str):
        self.root = os.path.join(runs_root, dataset)
        self.dataset = dataset

    def path(self, *parts):
        return os.path.join(self.root, *parts)

    @property
    def sequence(self):
        return self.path("sequence.npz")

    @property
    def index(self):
        return self.path("index.txt")

    @property
    def prepare_manifest(self):
        return self.path("prepare.json")

    def checkpoint(self, module_id, subdir="checkpoints"):
        return self.path(subdir, f"{module_id}.pt")

    def report(self, *name):
        return self.path("reports", *name)

    def require_prepared(self):
        if not os.path.exists(self.sequence):
            raise MissingArtifact(
                f"prepared cache {self.sequence} not found; run 'rlgnet prepare --dataset {self.dataset}' first"
            )
        return load_sequence(self.sequence)

    def write_manifest(self, manifest: RunManifest, name: str):
        manifest.finished = _now()
        path = self.path("manifests", name)
        os.makedirs(os.path.dirname(path), exist_ok=True)
        with open(path, "w") as f:
            json.dump(asdict(manifest), f, indent=1)
        return path


def _write(path, text):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        f.write(text)


def parse_k_list(text: str):
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        if not tok:
            continue
        out.append(None if tok.lower() in ("inf", "infinity", "∞") else int(tok))
    return out


def _k_label(k):
    return "inf" if k is None else str(k)


def _config_from_args(args, **extra) -> TrainConfig:
    overrides = {}
    for item in getattr(args, "set", None) or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value
    overrides.update({k: v for k, v in extra.items() if v is not None})
    return load_config(getattr(args, "config", None), dataset=args.dataset, **overrides)


def cmd_prepare(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    src = dataset_dir(args.data_root, args.dataset)
    fp = fingerprint(src)
    started = _now()
    if not args.force and os.path.exists(ws.prepare_manifest) and os.path.exists(ws.sequence) and os.path.exists(ws.index):
        with open(ws.prepare_manifest) as f:
            prev = json.load(f)
        if prev.get("fingerprint") == fp and prev.get("time_gap") == args.time_gap and prev.get("version") == CACHE_VERSION:
            print(f"cache hit: {ws.root} (fingerprint {fp})")
            return 0
    seq = add_reverse_relations(load_dataset(src, args.dataset, time_gap=args.time_gap))
    os.makedirs(ws.root, exist_ok=True)
    save_sequence(seq, ws.sequence)
    index = build_index(seq, seq.test_start)
    index.dump(ws.index)
    info = dict(
        version=CACHE_VERSION,
        fingerprint=fp,
        source=os.path.abspath(src),
        time_gap=args.time_gap,
        num_entities=seq.num_entities,
        num_relations_raw=seq.num_relations_raw,
        num_timestamps=seq.num_timestamps,
        valid_start=seq.valid_start,
        test_start=seq.test_start,
        facts={s: seq.num_facts(s) for s in ("train", "valid", "test")},
        index_frontier=index.frontier,
    )
    _write(ws.prepare_manifest, json.dumps(info, indent=1))
    ws.write_manifest(
        RunManifest("prepare", args.dataset, fp, 0,
                    dict(sequence=ws.sequence, index=ws.index), started),
        "prepare.json",
    )
    print(f"prepared {args.dataset}: |E|={seq.num_entities} |R|={seq.num_relations_raw} "
          f"T={seq.num_timestamps} facts(augmented)={seq.num_facts()} -> {ws.root}")
    return 0


def proportion_rows(seq, k_list, backend=None):
    return [(_k_label(k), repeating_proportion(seq, k, backend=backend)) for k in k_list]


def format_stats_csv(dataset, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "top_k", "repeating_pct"])
    for k, pct in rows:
        w.writerow([dataset, k, f"{pct:.4f}"])
    return buf.getvalue()


def cmd_stats(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    seq = ws.require_prepared()
    rows = proportion_rows(seq, parse_k_list(args.k))
    text = format_stats_csv(args.dataset, rows)
    out = args.out or ws.report("repeating_proportion.csv")
    _write(out, text)
    sys.stdout.write(text)
    return 0


def _train_one(ws, seq, module_id, cfg, subdir="checkpoints"):
    log_path = ws.path("logs" if subdir == "checkpoints" else subdir, f"{module_id}.csv")
    ckpt = train_module(module_id, seq, cfg.replace(module=module_id), log_path=log_path)
    path = ws.checkpoint(module_id, subdir)
    save_checkpoint(ckpt, path)
    return ckpt, path, log_path


def cmd_train(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    seq = ws.require_prepared()
    cfg = _config_from_args(args, module=args.module, max_epochs=args.epochs, seed=args.seed)
    started = _now()
    ckpt, path, log_path = _train_one(ws, seq, cfg.module, cfg)
    ws.write_manifest(
        RunManifest("train", args.dataset, cfg.hash(), cfg.seed,
                    dict(checkpoint=path, log=log_path, config=cfg.to_dict()), started),
        f"train-{cfg.module}.json",
    )
    print(f"trained {cfg.module}: best epoch {ckpt.epoch}, valid MRR {ckpt.valid_mrr:.4f} -> {path}")
    return 0


def parse_modules(text: str | None):
    if not text:
        return frozenset(MODULE_IDS)
    return check_combo(m.strip() for m in text.split(",") if m.strip())


def parse_combos(text: str | None):
    if not text:
        return list(ALL_COMBOS)
    return [parse_modules(part) for part in text.split(";") if part.strip()]


def _load_checkpoints(ws, seq, modules, subdir="checkpoints", fallback=None):
    out = {}
    for mid in sorted(modules):
        path = ws.checkpoint(mid, subdir)
        if not os.path.exists(path) and fallback:
            path = ws.checkpoint(mid, fallback)
        if not os.path.exists(path):
            raise MissingArtifact(
                f"checkpoint for module {mid!r} not found at {path}; run 'rlgnet train --dataset {ws.dataset} --module {mid}'"
            )
        out[mid] = load_checkpoint(path, mid, seq.num_entities, seq.num_relations)
    return out


def _eval_config(args, cfg):
    alpha = cfg.alpha if args.alpha is None else args.alpha
    return EnsembleConfig(alpha=alpha, mode=args.mode, fusion=args.fusion, filtered=not args.raw)


def _run_hash(cfg: TrainConfig, ecfg: EnsembleConfig, extra=""):
    return cfg.replace(alpha=ecfg.alpha).hash() + ("-" + ecfg.mode) + extra


def cmd_eval(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    seq = ws.require_prepared()
    cfg = _config_from_args(args)
    ecfg = _eval_config(args, cfg)
    combo = parse_modules(args.modules)
    ckpts = _load_checkpoints(ws, seq, combo)
    started = _now()
    rh = _run_hash(cfg, ecfg)
    report = evaluate(ckpts, seq, ecfg, split=args.split, combo=combo, config_hash=rh)
    name = f"eval-{report.label}-{ecfg.mode}-a{ecfg.alpha:g}"
    path = args.out or ws.report(name + ".json")
    _write(path, report.to_json())
    ws.write_manifest(RunManifest("eval", args.dataset, rh, cfg.seed, dict(report=path), started), name + ".json")
    print(report.to_table())
    return 0


def cmd_ablate(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    seq = ws.require_prepared()
    cfg = _config_from_args(args)
    ecfg = _eval_config(args, cfg)
    combos = parse_combos(args.combos)
    ckpts = _load_checkpoints(ws, seq, set().union(*combos))
    started = _now()
    rh = _run_hash(cfg, ecfg)
    reports = ablate(ckpts, seq, ecfg, combos, split=args.split, config_hash=rh)
    paths = {}
    for rep in reports:
        path = ws.report(f"ablate-{rep.label}-{ecfg.mode}.json")
        _write(path, rep.to_json())
        paths[rep.label] = path
        print(rep.to_table())
        print()
    ws.write_manifest(RunManifest("ablate", args.dataset, rh, cfg.seed, paths, started), f"ablate-{ecfg.mode}.json")
    return 0


EVAL_ONLY_PARAMS = ("alpha",)
# training parameter -> modules that must be retrained when it changes
PARAM_MODULES = {
    "m": ("local",),
    "omega": ("local",),
    "time_dim": ("local",),
    "lr_decay": ("local",),
    "lr_step": ("local",),
    "top_k": ("repeat",),
    "top_k_all": ("global",),
}


def cmd_sweep(args) -> int:
    ws = Workspace(args.runs, args.dataset)
    seq = ws.require_prepared()
    base = _config_from_args(args)
    combo = parse_modules(args.modules)
    param = args.param
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    if not values:
        raise ConfigError("--values is empty")
    started = _now()
    rows, paths = [], {}
    for raw in values:
        if param in EVAL_ONLY_PARAMS:
            cfg = base.replace(alpha=float(raw))
            ckpts = _load_checkpoints(ws, seq, combo)
        else:
            cfg = _config_from_args(args, **{param: raw})
            subdir = f"sweep-{param}-{raw}"
            retrain = [m for m in PARAM_MODULES.get(param, MODULE_IDS) if m in combo]
            for mid in retrain:
                _train_one(ws, seq, mid, cfg, subdir)
            ckpts = _load_checkpoints(ws, seq, combo, subdir=subdir, fallback="checkpoints")
        ecfg = EnsembleConfig(alpha=cfg.alpha if param == "alpha" or args.alpha is None else args.alpha,
                              mode=args.mode, fusion=args.fusion, filtered=not args.raw)
        rh = _run_hash(cfg, ecfg, f"-{param}={raw}")
        report = evaluate(ckpts, seq, ecfg, split=args.split, combo=combo, config_hash=rh)
        path = ws.report(f"sweep-{param}", f"{param}={raw}.json")
        _write(path, report.to_json())
        paths[raw] = path
        rows.append((raw, report.mrr, *(report.hits[k] for k in sorted(report.hits))))
        print(f"{param}={raw}: MRR {100 * report.mrr:.2f}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([param, "mrr", "hits@1", "hits@3", "hits@10"])
    for row in rows:
        w.writerow([row[0]] + [f"{x:.6f}" for x in row[1:]])
    summary = ws.report(f"sweep-{param}", "summary.csv")
    _write(summary, buf.getvalue())
    paths["summary"] = summary
    ws.write_manifest(RunManifest("sweep", args.dataset, base.hash(), base.seed, paths, started), f"sweep-{param}.json")
    sys.stdout.write(buf.getvalue())
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rlgnet", description=__doc__.split("\n")[0])
    p.add_argument("--data-root", default=os.environ.get("RLGNET_DATA", "data"),
                   help="directory holding one folder per dataset (env RLGNET_DATA)")
    p.add_argument("--runs", default=os.environ.get("RLGNET_RUNS", "runs"),
                   help="artifact directory (env RLGNET_RUNS)")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--dataset", required=True)
        return sp

    def config_opts(sp):
        sp.add_argument("--config", help="flat key = value config file")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override one config key")

    def eval_opts(sp):
        sp.add_argument("--alpha", type=float)
        sp.add_argument("--mode", choices=("single_step", "multi_step"), default="single_step")
        sp.add_argument("--fusion", choices=("prob", "raw"), default="prob")
        sp.add_argument("--raw", action="store_true", help="report unfiltered ranks instead of time-aware filtered")
        sp.add_argument("--split", choices=("valid", "test"), default="test")

    sp = common(sub.add_parser("prepare", help="parse a dataset and cache the snapshot sequence and index"))
    sp.add_argument("--time-gap", type=int, default=None)
    sp.add_argument("--force", action="store_true")
    sp.set_defaults(func=cmd_prepare)

    sp = common(sub.add_parser("stats", help="repeating-fact proportions per top_k as CSV"))
    sp.add_argument("--k", default=DEFAULT_K_LIST)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_stats)

    sp = common(sub.add_parser("train", help="train one module"))
    sp.add_argument("--module", required=True, choices=MODULE_IDS)
    sp.add_argument("--epochs", type=int)
    sp.add_argument("--seed", type=int)
    config_opts(sp)
    sp.set_defaults(func=cmd_train)

    sp = common(sub.add_parser("eval", help="evaluate the fused model"))
    sp.add_argument("--modules", help="comma-separated subset of local,global,repeat")
    sp.add_argument("--out")
    config_opts(sp)
    eval_opts(sp)
    sp.set_defaults(func=cmd_eval)

    sp = common(sub.add_parser("ablate", help="evaluate module combinations"))
    sp.add_argument("--combos", help="';'-separated combos, e.g. 'local,global;local,repeat'")
    config_opts(sp)
    eval_opts(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = common(sub.add_parser("sweep", help="one report per value of a hyperparameter"))
    sp.add_argument("--param", required=True)
    sp.add_argument("--values", required=True, help="comma-separated values")
    sp.add_argument("--modules", help="comma-separated subset of local,global,repeat")
    config_opts(sp)
    eval_opts(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def _classify(exc) -> str:
    if isinstance(exc, (MissingArtifact, MissingFileError, FileNotFoundError, MissingModule)):
        return "MISSING_ARTIFACT"
    if isinstance(exc, DatasetError):
        return "DATASET_ERROR"
    if isinstance(exc, CheckpointError):
        return "CHECKPOINT_ERROR"
    if isinstance(exc, (ConfigError, UnsupportedCombination)):
        return "CONFIG_ERROR"
    if isinstance(exc, TrainingDivergence):
        return "TRAINING_DIVERGED"
    return "INTERNAL"


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except Exception as exc:  # every failure path ends in one parseable line
        code = _classify(exc)
        if code == "INTERNAL" and args.verbose:
            raise
        msg = str(exc.args[0]) if isinstance(exc, KeyError) and exc.args else str(exc)
        print(f"rlgnet: error code={code} exit={EXIT_CODES[code]} msg={json.dumps(msg)}", file=sys.stderr)
        return EXIT_CODES[code]


if __name__ == "__main__":
    sys.exit(main())
