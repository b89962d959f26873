"""Command-line entry point.

Usage::

    socgcf <command> [--config FILE] [--key value ...]

Commands: ``preprocess``, ``graphs``, ``train``, ``evaluate``, ``ablate``,
``check``. Settings come from defaults, then the flat ``key = value`` config
file, then ``--key value`` overrides.
"""
from __future__ import annotations

import contextlib
import dataclasses
import logging
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Iterator, Optional, Sequence

from . import checks
from .checkpoint import load_checkpoint, save_checkpoint
from .data import (DEFAULT_RATIOS, load_dataset, load_interactions, load_social, preprocess,
                   save_dataset, stats_line)
from .graph import build_graph_inputs, operator_stats, run_label
from .metrics import MetricsReport, ablation_report, evaluate_all
from .model import ModelConfig, forward_final
from .sparse import save_coo
from .train import TrainConfig, TrainingError, train

logger = logging.getLogger("socgcf")

COMMANDS = ("preprocess", "graphs", "train", "evaluate", "ablate", "check")
ABLATION_RUNS = ("lightgcn", "w_interact", "w_social", "model_all")
_CHANNELS = {
    "lightgcn": (False, False),
    "w_interact": (False, True),
    "w_social": (True, False),
    "model_all": (True, True),
}


class CommandError(Exception):
    """A user-facing failure; reported without a traceback, exit status 1."""


@dataclass
class RunConfig:
    # inputs
    interactions: str = ""
    social: str = ""
    format: str = "canonical"
    dataset: str = ""
    data: str = ""
    checkpoint: str = ""
    out: str = "out"
    # preprocessing
    k_core: int = 10
    ratio: float = 0.0
    test_fraction: float = 0.2
    single_pass: bool = False
    # model
    embed_dim: int = 64
    n_layers: int = 3
    w_a: float = 1.0
    w_c: float = 1.0
    w_s: float = 1.0
    use_social: bool = True
    use_correlation: bool = True
    jaccard_floor: float = 0.1
    # training
    lr: float = 1e-3
    l2_lambda: float = 1e-4
    batch_size: int = 2048
    max_epochs: int = 1500
    eval_every: int = 10
    patience: int = 5
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    k: int = 20
    seed: int = 0
    # ablation / checks
    runs: str = ",".join(ABLATION_RUNS)
    baseline: str = "lightgcn"
    inject: str = ""
    stats: bool = False

    def model_config(self) -> ModelConfig:
        return ModelConfig(self.embed_dim, self.n_layers, (self.w_a, self.w_c, self.w_s), self.seed)

    def train_config(self) -> TrainConfig:
        return TrainConfig(self.lr, self.l2_lambda, self.batch_size, self.max_epochs, self.eval_every,
                           self.patience, self.adam_beta1, self.adam_beta2, self.adam_eps,
                           self.k, self.seed)

    def resolved_ratio(self) -> float:
        if self.ratio > 0:
            return self.ratio
        if self.dataset.lower() in DEFAULT_RATIOS:
            return DEFAULT_RATIOS[self.dataset.lower()]
        raise CommandError("no ratio given; set --ratio or --dataset "
                           f"({', '.join(sorted(DEFAULT_RATIOS))})")


def _coerce(name: str, kind, text: str):
    if kind is bool or kind == "bool":
        low = text.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise CommandError(f"{name}: expected a boolean, got {text!r}")
    try:
        return {"int": int, "float": float, "str": str}.get(kind, kind)(text.strip())
    except ValueError as exc:
        raise CommandError(f"{name}: cannot parse {text!r}") from exc


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def read_config_file(path: str) -> dict[str, str]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CommandError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            key, _, value = line.partition(" ")
        key, value = key.strip(), value.strip()
        if key not in _FIELD_TYPES:
            raise CommandError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = value
    return out


def parse_overrides(argv: Sequence[str]) -> tuple[Optional[str], dict[str, str]]:
    """Split ``--key value`` pairs; bare boolean flags (``--stats``) mean true."""
    config_path = None
    out: dict[str, str] = {}
    i = 0
    argv = list(argv)
    while i < len(argv):
        tok = argv[i]
        if not tok.startswith("--"):
            raise CommandError(f"unexpected argument {tok!r}")
        key = tok[2:].replace("-", "_")
        if "=" in key:
            key, value = key.split("=", 1)
            i += 1
        elif i + 1 < len(argv) and not argv[i + 1].startswith("--"):
            value = argv[i + 1]
            i += 2
        elif _FIELD_TYPES.get(key) in (bool, "bool"):
            value = "true"
            i += 1
        else:
            raise CommandError(f"--{key} needs a value")
        if key == "config":
            config_path = value
        elif key not in _FIELD_TYPES:
            raise CommandError(f"unknown option --{key}")
        else:
            out[key] = value
    return config_path, out


def build_config(argv: Sequence[str]) -> RunConfig:
    config_path, cli = parse_overrides(argv)
    merged = read_config_file(config_path) if config_path else {}
    merged.update(cli)
    cfg = RunConfig()
    for key, value in merged.items():
        setattr(cfg, key, _coerce(key, _FIELD_TYPES[key], value))
    return cfg


@contextlib.contextmanager
def _locked(directory: Path) -> Iterator[None]:
    directory.mkdir(parents=True, exist_ok=True)
    lock = directory / ".socgcf.lock"
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError:
        raise CommandError(f"output directory {directory} is locked by another run ({lock})")
    except OSError as exc:
        raise CommandError(f"output directory {directory} is not writable: {exc}") from exc
    os.close(fd)
    try:
        yield
    finally:
        lock.unlink(missing_ok=True)


def _require(path: str, what: str) -> Path:
    if not path:
        raise CommandError(f"--{what} is required")
    p = Path(path)
    if not p.exists():
        raise CommandError(f"{what} path does not exist: {path}")
    return p


# ---------------------------------------------------------------- commands

def cmd_preprocess(cfg: RunConfig) -> int:
    inter = _require(cfg.interactions, "interactions")
    if cfg.use_social:
        if not cfg.social:
            raise CommandError("use_social is on but no --social file was given "
                               "(pass --use_social false to preprocess without one)")
        _require(cfg.social, "social")
    ratio = cfg.resolved_ratio()
    raw = load_interactions(inter, cfg.format)
    social = load_social(cfg.social) if cfg.use_social else []
    dataset = preprocess(raw, social, ratio=ratio, k_core=cfg.k_core,
                         test_fraction=cfg.test_fraction, single_pass=cfg.single_pass)
    out = Path(cfg.out)
    with _locked(out):
        save_dataset(dataset, out)
    print(stats_line(dataset))
    return 0


def _load_data(cfg: RunConfig):
    return load_dataset(_require(cfg.data, "data"))


def cmd_graphs(cfg: RunConfig) -> int:
    dataset = _load_data(cfg)
    g = build_graph_inputs(dataset, cfg.use_social, cfg.use_correlation, cfg.jaccard_floor)
    out = Path(cfg.out)
    with _locked(out):
        save_coo(g.r_norm, out / "R_norm.coo")
        if g.s_norm is not None:
            save_coo(g.s_norm, out / "S_norm.coo")
        if g.c_norm is not None:
            save_coo(g.c_norm, out / "C_norm.coo")
    if cfg.stats:
        for name, nnz, density in operator_stats(g):
            print(f"{name} nnz={nnz} density={density:.6g}")
    return 0


def _train_one(cfg: RunConfig, dataset, g, out: Path, label: str) -> MetricsReport:
    final_state, history = train(dataset, g, cfg.model_config(), cfg.train_config())
    save_checkpoint(final_state, out / "checkpoint.bin")
    history.write_csv(out / "history.csv")
    report = evaluate_all(forward_final(final_state, g, cfg.model_config()), dataset, cfg.k)
    (out / "metrics.txt").write_text(f"run={label}\n" + report.to_text(), encoding="ascii")
    (out / "metrics.csv").write_text(MetricsReport.csv_header() + "\n" + report.csv_row(label) + "\n",
                                     encoding="ascii")
    (out / "timing.txt").write_text(
        f"epochs_run={len(history.epoch_losses)}\nepochs_to_best={history.epochs_to_best}\n"
        f"mean_epoch_seconds={history.mean_epoch_seconds:.4f}\n", encoding="ascii")
    return report


def cmd_train(cfg: RunConfig) -> int:
    dataset = _load_data(cfg)
    g = build_graph_inputs(dataset, cfg.use_social, cfg.use_correlation, cfg.jaccard_floor)
    label = run_label(g.use_social, g.use_correlation)
    out = Path(cfg.out)
    with _locked(out):
        report = _train_one(cfg, dataset, g, out, label)
    print(f"run={label} " + " ".join(report.to_text().split()))
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    dataset = _load_data(cfg)
    state = load_checkpoint(_require(cfg.checkpoint, "checkpoint"))
    g = build_graph_inputs(dataset, cfg.use_social, cfg.use_correlation, cfg.jaccard_floor)
    report = evaluate_all(forward_final(state, g, cfg.model_config()), dataset, cfg.k)
    print(report.to_text(), end="")
    return 0


def cmd_ablate(cfg: RunConfig) -> int:
    names = [r.strip() for r in cfg.runs.split(",") if r.strip()]
    unknown = [r for r in names if r not in _CHANNELS]
    if unknown:
        raise CommandError(f"unknown run name(s) {unknown}; choose from {list(ABLATION_RUNS)}")
    dataset = _load_data(cfg)
    need_social = any(_CHANNELS[r][0] for r in names)
    need_corr = any(_CHANNELS[r][1] for r in names)
    full = build_graph_inputs(dataset, need_social, need_corr, cfg.jaccard_floor)
    out = Path(cfg.out)
    reports = {}
    with _locked(out):
        for name in names:
            g = full.with_channels(*_CHANNELS[name])
            sub = out / name
            sub.mkdir(exist_ok=True)
            reports[name] = _train_one(cfg, dataset, g, sub, name)
        baseline = cfg.baseline if cfg.baseline in reports else names[0]
        extra = ["w_interact"] if "w_interact" in reports else []
        table = ablation_report(reports, baseline, extra)
        (out / "ablation.txt").write_text(table, encoding="ascii")
        rows = [MetricsReport.csv_header()] + [rep.csv_row(n) for n, rep in reports.items()]
        (out / "ablation.csv").write_text("\n".join(rows) + "\n", encoding="ascii")
    print(table, end="")
    return 0


def cmd_check(cfg: RunConfig) -> int:
    forward_fn = checks.forward
    if cfg.inject:
        if cfg.inject != "social_sign_flip":
            raise CommandError(f"unknown fault {cfg.inject!r} (known: social_sign_flip)")
        forward_fn = checks.social_sign_flip
    results = checks.run_all_checks(forward_fn)
    for r in results:
        print(r.line())
    failed = [r.name for r in results if not r.passed]
    if failed:
        print("failed: " + "; ".join(failed))
        return 1
    return 0


_DISPATCH = {
    "preprocess": cmd_preprocess,
    "graphs": cmd_graphs,
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "ablate": cmd_ablate,
    "check": cmd_check,
}


def _thread_limit():
    value = os.environ.get("SOCGCF_THREADS")
    if not value:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=max(1, int(value)))


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] in ("-h", "--help") or argv[0] not in COMMANDS:
        print(__doc__.strip(), file=sys.stderr)
        return 0 if argv and argv[0] in ("-h", "--help") else 2
    logging.basicConfig(level=os.environ.get("SOCGCF_LOG", "WARNING"),
                        format="%(levelname)s %(name)s: %(message)s")
    command, rest = argv[0], argv[1:]
    try:
        cfg = build_config(rest)
        with _thread_limit():
            return _DISPATCH[command](cfg)
    except (CommandError, ValueError, FileNotFoundError, TrainingError, RuntimeError) as exc:
        print(f"socgcf {command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
