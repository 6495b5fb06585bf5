"""Command-line pipeline: generate scenarios, extract pairs, train, evaluate.

Subcommands wire the library modules together with reproducible config.
Every option can also come from a flat key=value config file (--config);
explicit flags win over the file, the file wins over defaults.  All file
outputs are written atomically (temp file + rename) and each gets a
`<name>.manifest.json` echoing the resolved configuration, so any output can
be regenerated from its manifest alone.
"""

from __future__ import annotations

import os
import sys


def _configure_threads() -> None:
    """Pin BLAS thread pools before numpy loads; default 1 for determinism."""
    n = None
    argv = sys.argv
    for i, a in enumerate(argv):
        if a == "--threads" and i + 1 < len(argv):
            n = argv[i + 1]
        elif a.startswith("--threads="):
            n = a.split("=", 1)[1]
    explicit = n is not None
    n = n if explicit else "1"
    for var in ("OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                "OMP_NUM_THREADS", "NUMEXPR_NUM_THREADS"):
        if explicit:
            os.environ[var] = n
        else:
            os.environ.setdefault(var, n)


_configure_threads()

import argparse
import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Callable

from . import context, corpus as corpus_mod, embed, evaluate, synth
from .scoring import DiscrepancyScorer

PACKAGE = "scenevec 0.1.0"


def _parse_bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s: str) -> list[int]:
    return [int(part) for part in s.split(",") if part.strip()]


@dataclass(frozen=True)
class Opt:
    """One resolvable option: flag name, parser, default, help."""

    name: str                        # long flag without leading dashes
    parse: Callable[[str], Any]
    default: Any = None
    help: str = ""
    required: bool = False
    flag: bool = False               # boolean switch (store_true)

    @property
    def dest(self) -> str:
        return self.name.replace("-", "_")


_COMMON = [
    Opt("config", str, None, "flat key=value config file; flags override it"),
    Opt("threads", int, 1, "BLAS/OpenMP thread cap (1 keeps runs bit-reproducible)"),
]

_SCORER_OPTS = [
    Opt("scorer", str, "gaussian", "distance score: threshold, minmax, or gaussian"),
    Opt("d-theta", float, 0.3, "cutoff distance for the threshold score"),
    Opt("sigma-d", float, 0.25, "width of the Gaussian distance decay"),
]

_COMMANDS: dict[str, list[Opt]] = {
    "gen": _COMMON + [
        Opt("scenario", str, required=True,
            help="grid5x5, seq4, school_event, or two_scene"),
        Opt("frames", int, 2000, "number of frames to generate"),
        Opt("timestamps", int, 10, "timestamp count (school_event, two_scene)"),
        Opt("seed", int, 0, "generator seed"),
        Opt("out", str, required=True, help="annotation JSONL output path"),
        Opt("truth", str, None,
            "ground-truth JSON path (default: ground_truth.json next to out)"),
    ],
    "pairs": _COMMON + _SCORER_OPTS + [
        Opt("annotations", str, required=True, help="annotation JSONL input"),
        Opt("timestamps", int, 1, "number of timestamps for the partition"),
        Opt("mechanisms", str, "same_frame",
            "comma list of same_frame, surrounding_frames, neighbor_timestamps"),
        Opt("w-f", int, 1, "frame window radius for surrounding_frames"),
        Opt("w-t", int, 1, "timestamp window radius for neighbor_timestamps"),
        Opt("sigma-t", float, 1.0, "temporal Gaussian width"),
        Opt("negatives", int, 0, "negative pairs drawn per positive"),
        Opt("static", _parse_bool, False,
            "emit static pairs (no reference timestamp)", flag=True),
        Opt("no-frame-diffusion", _parse_bool, False,
            "disable frame-level damping of cross-frame scores", flag=True),
        Opt("seed", int, 0, "negative sampling seed"),
        Opt("out", str, required=True, help="pair CSV output path"),
    ],
    "train": _COMMON + [
        Opt("annotations", str, required=True, help="annotation JSONL input"),
        Opt("timestamps", int, 1, "number of timestamps for the partition"),
        Opt("pairs", str, required=True, help="pair CSV input"),
        Opt("objective", str, "t1", "t1s, or t1 through t9"),
        Opt("dim", int, 32, "embedding width"),
        Opt("lr", float, 0.05, "SGD learning rate"),
        Opt("epochs", int, 50, "training epochs"),
        Opt("batch-size", int, 256, "minibatch size"),
        Opt("seed", int, 0, "init and shuffle seed"),
        Opt("sigma-t", float, 1.0, "temporal Gaussian width"),
        Opt("sigma-f", float, None,
            "frequency squash width (default: half the peak per-timestamp count)"),
        Opt("epsilon", float, 0.01, "frequency smoothing constant"),
        Opt("optimizer", str, "sgd", "sgd or adam"),
        Opt("out", str, required=True, help="embedding output path"),
    ],
    "eval": _COMMON + [
        Opt("emb", str, required=True,
            help="embedding file, or a comma list for hit_at_k"),
        Opt("annotations", str, None, "annotation JSONL input"),
        Opt("timestamps", int, 1, "number of timestamps for the partition"),
        Opt("metric", str, required=True, help="hit_at_k, cluster, or consistency"),
        Opt("k", _parse_int_list, [1, 3, 5, 10], "comma list of neighbor depths"),
        Opt("clusters", int, 3, "cluster count for the cluster metric"),
        Opt("truth", str, None, "ground-truth JSON with a classes table"),
        Opt("seed", int, 0, "clustering seed"),
        Opt("out", str, required=True, help="CSV or JSON output path"),
    ],
    "nn": _COMMON + [
        Opt("emb", str, required=True, help="embedding file"),
        Opt("label", str, required=True, help="query label string"),
        Opt("t", int, None, "timestamp (temporal embeddings)"),
        Opt("k", int, 10, "neighbors to report"),
        Opt("out", str, None, "CSV output path (default: stdout)"),
    ],
    "series": _COMMON + [
        Opt("emb", str, required=True, help="temporal embedding file"),
        Opt("a", str, required=True, help="first label"),
        Opt("b", str, required=True, help="second label"),
        Opt("out", str, None, "CSV output path (default: stdout)"),
    ],
    "narrate": _COMMON + [
        Opt("emb", str, required=True, help="temporal embedding file"),
        Opt("m", int, 3, "pairs listed per timestamp"),
        Opt("out", str, required=True, help="prompt text output path"),
    ],
    "pca": _COMMON + [
        Opt("emb", str, required=True, help="embedding file"),
        Opt("t", int, None, "project one timestamp only"),
        Opt("out", str, required=True, help="CSV output path"),
    ],
}


def _load_config_file(path: str) -> dict[str, str]:
    cfg: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key = value")
            key, _, value = stripped.partition("=")
            cfg[key.strip().replace("-", "_")] = value.strip()
    return cfg


def _resolve(args: argparse.Namespace, spec: list[Opt]) -> dict[str, Any]:
    """Merge flag values, config-file values, and defaults, in that order."""
    file_cfg: dict[str, str] = {}
    if getattr(args, "config", None):
        file_cfg = _load_config_file(args.config)
    resolved: dict[str, Any] = {}
    for opt in spec:
        value = getattr(args, opt.dest)
        if value is None and opt.dest in file_cfg:
            value = opt.parse(file_cfg[opt.dest])
        if value is None:
            value = opt.default
        if value is None and opt.required:
            raise ValueError(f"missing required option --{opt.name}")
        resolved[opt.dest] = value
    return resolved


def _atomic_write(path: str, writer: Callable[[str], None]) -> None:
    """Run writer against a temp path, then rename over the target."""
    tmp = f"{path}.tmp{os.getpid()}"
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def _atomic_text(path: str, text: str) -> None:
    def writer(tmp: str) -> None:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
    _atomic_write(path, writer)


def _write_manifest(out_path: str, command: str, cfg: dict[str, Any],
                    outputs: list[str]) -> None:
    doc = {"package": PACKAGE, "command": command,
           "config": {k: v for k, v in sorted(cfg.items())},
           "outputs": outputs}
    _atomic_text(out_path + ".manifest.json", json.dumps(doc, indent=2) + "\n")


def _csv_text(header: tuple[str, ...], rows: list[tuple]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _fmt(v: float) -> str:
    return repr(float(v))


def _load_corpus(cfg: dict[str, Any]) -> corpus_mod.Corpus:
    if not cfg.get("annotations"):
        raise ValueError("this command needs --annotations")
    return corpus_mod.ingest(cfg["annotations"], cfg["timestamps"])


def _label_id(labels: list[str], name: str) -> int:
    try:
        return labels.index(name)
    except ValueError:
        raise KeyError(f"label {name!r} not in the embedding") from None


def _cmd_gen(cfg: dict[str, Any]) -> list[str]:
    scenario = cfg["scenario"]
    if scenario == "grid5x5":
        records, truth = synth.gen_grid5x5(cfg["frames"], cfg["seed"])
    elif scenario == "seq4":
        records, truth = synth.gen_seq4(cfg["frames"], cfg["seed"])
    elif scenario == "school_event":
        records, truth = synth.gen_school_event(cfg["frames"], cfg["timestamps"],
                                                cfg["seed"])
    elif scenario == "two_scene":
        records, truth = synth.gen_two_scene(cfg["frames"], cfg["timestamps"],
                                             cfg["seed"])
    else:
        raise ValueError(f"unknown scenario {scenario!r}")
    truth_path = cfg["truth"] or os.path.join(
        os.path.dirname(os.path.abspath(cfg["out"])), "ground_truth.json")
    _atomic_write(cfg["out"], lambda tmp: synth.write_annotations(records, tmp))
    _atomic_write(truth_path, lambda tmp: synth.write_ground_truth(truth, tmp))
    return [cfg["out"], truth_path]


def _cmd_pairs(cfg: dict[str, Any]) -> list[str]:
    cps = _load_corpus(cfg)
    mechanisms = tuple(m.strip() for m in cfg["mechanisms"].split(",") if m.strip())
    ctx_cfg = context.ContextConfig(
        mechanisms=mechanisms, w_f=cfg["w_f"], w_t=cfg["w_t"],
        negatives_per_positive=cfg["negatives"],
        frame_diffusion=not cfg["no_frame_diffusion"])
    scorer = DiscrepancyScorer(cfg["scorer"], d_theta=cfg["d_theta"],
                               sigma_d=cfg["sigma_d"])
    pairs = context.generate_pairs(
        cps, ctx_cfg, scorer, sigma_t=cfg["sigma_t"],
        temporal=not cfg["static"], rng_seed=cfg["seed"])
    _atomic_write(cfg["out"], lambda tmp: context.write_pairs(pairs, tmp))
    return [cfg["out"]]


def _cmd_train(cfg: dict[str, Any]) -> list[str]:
    cps = _load_corpus(cfg)
    objective = cfg["objective"].lower()
    if objective in embed.TEMPORAL_OBJECTIVES and cps.n_timestamps < 2:
        raise ValueError(
            f"objective {objective} is temporal; the corpus needs >= 2 timestamps")
    pairs = context.read_pairs(cfg["pairs"])
    train_cfg = embed.TrainConfig(
        objective=objective, learning_rate=cfg["lr"], epochs=cfg["epochs"],
        batch_size=cfg["batch_size"], seed=cfg["seed"], dim=cfg["dim"],
        sigma_t=cfg["sigma_t"], sigma_f=cfg["sigma_f"], epsilon=cfg["epsilon"],
        optimizer=cfg["optimizer"])
    emb = embed.train(pairs, train_cfg, cps)
    _atomic_write(cfg["out"],
                  lambda tmp: embed.save_embedding(emb, tmp, objective, train_cfg))
    return [cfg["out"]]


def _metric_hit_at_k(cfg: dict[str, Any]) -> str:
    cps = _load_corpus(cfg)
    rows = []
    for path in cfg["emb"].split(","):
        path = path.strip()
        emb = embed.load_embedding(path)
        if not isinstance(emb, embed.TemporalEmbedding):
            raise ValueError(f"{path}: hit_at_k needs a temporal embedding")
        name = emb.objective or os.path.basename(path)
        for k in cfg["k"]:
            rows.append((name, k, _fmt(evaluate.hit_at_k(emb, cps, k))))
    return _csv_text(("objective", "k", "value"), rows)


def _truth_classes(cfg: dict[str, Any], labels: list[str]) -> list:
    if not cfg.get("truth"):
        raise ValueError("this metric needs --truth")
    with open(cfg["truth"], encoding="utf-8") as fh:
        doc = json.load(fh)
    classes = doc.get("classes")
    if not isinstance(classes, dict):
        raise ValueError(f"{cfg['truth']}: no classes table")
    return [classes[name] for name in labels]


def _metric_cluster(cfg: dict[str, Any]) -> str:
    emb = embed.load_embedding(cfg["emb"])
    assign, silhouette = evaluate.kmeans_silhouette(emb, cfg["clusters"], cfg["seed"])
    report: dict[str, Any] = {
        "metric": "cluster", "k": cfg["clusters"], "seed": cfg["seed"],
        "silhouette": silhouette,
        "assignment": {name: int(c) for name, c in zip(emb.labels, assign)},
    }
    if cfg.get("truth"):
        classes = _truth_classes(cfg, emb.labels)
        report["rand_index"] = evaluate.rand_index(assign, classes)
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _metric_consistency(cfg: dict[str, Any]) -> str:
    emb = embed.load_embedding(cfg["emb"])
    classes = _truth_classes(cfg, emb.labels)
    k = cfg["k"][0] if cfg["k"] else 10
    value = evaluate.clustering_consistency(emb, classes, k)
    report = {"metric": "consistency", "k": k, "consistency": value}
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def _cmd_eval(cfg: dict[str, Any]) -> list[str]:
    metric = cfg["metric"]
    if metric == "hit_at_k":
        text = _metric_hit_at_k(cfg)
    elif metric == "cluster":
        text = _metric_cluster(cfg)
    elif metric == "consistency":
        text = _metric_consistency(cfg)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    _atomic_text(cfg["out"], text)
    return [cfg["out"]]


def _cmd_nn(cfg: dict[str, Any]) -> list[str]:
    emb = embed.load_embedding(cfg["emb"])
    query = _label_id(emb.labels, cfg["label"])
    nn = evaluate.nearest_neighbors(emb, query, cfg["t"], cfg["k"])
    rows = [(rank + 1, emb.labels[lab], _fmt(sim))
            for rank, (lab, sim) in enumerate(nn.neighbors)]
    text = _csv_text(("rank", "label", "similarity"), rows)
    if cfg["out"]:
        _atomic_text(cfg["out"], text)
        return [cfg["out"]]
    sys.stdout.write(text)
    return []


def _cmd_series(cfg: dict[str, Any]) -> list[str]:
    emb = embed.load_embedding(cfg["emb"])
    if not isinstance(emb, embed.TemporalEmbedding):
        raise ValueError("similarity series needs a temporal embedding")
    a = _label_id(emb.labels, cfg["a"])
    b = _label_id(emb.labels, cfg["b"])
    series = evaluate.similarity_series(emb, a, b)
    pair = f"{cfg['a']}|{cfg['b']}"
    rows = [(pair, t, _fmt(v)) for t, v in enumerate(series)]
    text = _csv_text(("pair", "t", "similarity"), rows)
    if cfg["out"]:
        _atomic_text(cfg["out"], text)
        return [cfg["out"]]
    sys.stdout.write(text)
    return []


def _cmd_narrate(cfg: dict[str, Any]) -> list[str]:
    emb = embed.load_embedding(cfg["emb"])
    if not isinstance(emb, embed.TemporalEmbedding):
        raise ValueError("the narrative prompt needs a temporal embedding")
    _atomic_text(cfg["out"], evaluate.narrative_prompt(emb, cfg["m"]))
    return [cfg["out"]]


def _cmd_pca(cfg: dict[str, Any]) -> list[str]:
    emb = embed.load_embedding(cfg["emb"])
    coords = evaluate.pca_2d(emb, cfg["t"])
    rows = []
    if isinstance(emb, embed.TemporalEmbedding):
        if cfg["t"] is None:
            for i, name in enumerate(emb.labels):
                for t in range(emb.n_timestamps):
                    x, y = coords[i * emb.n_timestamps + t]
                    rows.append((name, t, _fmt(x), _fmt(y)))
        else:
            for i, name in enumerate(emb.labels):
                rows.append((name, cfg["t"], _fmt(coords[i, 0]), _fmt(coords[i, 1])))
    else:
        for i, name in enumerate(emb.labels):
            rows.append((name, -1, _fmt(coords[i, 0]), _fmt(coords[i, 1])))
    _atomic_text(cfg["out"], _csv_text(("label", "t", "x", "y"), rows))
    return [cfg["out"]]


_RUNNERS = {
    "gen": _cmd_gen, "pairs": _cmd_pairs, "train": _cmd_train, "eval": _cmd_eval,
    "nn": _cmd_nn, "series": _cmd_series, "narrate": _cmd_narrate, "pca": _cmd_pca,
}

_DESCRIPTIONS = {
    "gen": "generate a synthetic scenario (annotations + ground truth)",
    "pairs": "extract training pairs from annotations",
    "train": "fit an embedding table to a pair file",
    "eval": "compute metrics over trained embeddings",
    "nn": "nearest neighbors of one label",
    "series": "per-timestamp cosine similarity of a label pair",
    "narrate": "emit the top-pairs narrative prompt",
    "pca": "project embeddings to 2D coordinates",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="scenevec",
        description="context-aware object embeddings from frame annotations")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, spec in _COMMANDS.items():
        p = sub.add_parser(name, help=_DESCRIPTIONS[name])
        for opt in spec:
            if opt.flag:
                p.add_argument(f"--{opt.name}", action="store_const", const=True,
                               default=None, help=opt.help)
            else:
                p.add_argument(f"--{opt.name}", type=opt.parse, default=None,
                               help=opt.help, metavar="V")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _resolve(args, _COMMANDS[args.command])
        outputs = _RUNNERS[args.command](cfg)
        for out in outputs:
            _write_manifest(out, args.command, cfg, outputs)
    except Exception as exc:  # noqa: BLE001 - single CLI error boundary
        sys.stderr.write(f"error: {type(exc).__name__}: {exc}\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
