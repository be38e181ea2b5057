"""End-to-end runs: ingest, sample, extract, reduce, train, evaluate, score.

A run is described by a JSON :class:`RunConfig`.  Every stage persists its
outputs in the run directory together with a key derived from its inputs;
re-running a config skips any stage whose key and output hashes still
match.
"""
from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import features as feats
from .evaluate import auc_score
from .graph_store import SnapshotWindow, ingest, snapshot
from .model import ForestConfig, LogisticConfig, SearchSpec, fit_forest, fit_logistic, load_model, random_search, save_model
from .model.forest import model_bytes
from .reduce import FeatureGroups, PcaGroupModel, apply_reducer, export_components, fit_reducer, pearson_matrix, univariate_screen
from .sampling import HOLDOUT, TRAIN, PairSample, SamplingConfig, holdout_split, iter_candidate_blocks, read_samples, sample_window, subsample_balanced, write_samples
from .synthetic import gen_synthetic

logger = logging.getLogger(__name__)

STAGES = ("ingest", "sample", "extract", "reduce", "train", "evaluate")


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage, cause):
        self.stage = stage
        super().__init__(f"stage {stage!r} failed: {type(cause).__name__}: {cause}")


def stage_seed(seed, name):
    """Stable 63-bit seed for stage ``name`` derived from the global seed."""
    digest = hashlib.sha256(f"{int(seed)}/{name}".encode()).digest()
    return int.from_bytes(digest[:8], "little") >> 1


def _sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _canon(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)


def _key(*parts):
    return hashlib.sha256(_canon(parts).encode()).hexdigest()


# --- configuration ---------------------------------------------------------


@dataclass
class WindowSpec:
    feature_years: tuple
    label_year: str
    name: str = ""

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict) or "feature_years" not in d or "label_year" not in d:
            raise ConfigError("a window needs 'feature_years' and 'label_year'")
        years = tuple(str(y) for y in d["feature_years"])
        name = d.get("name") or f"{'-'.join(years)}->{d['label_year']}"
        return cls(years, str(d["label_year"]), name)

    def resolve(self, years):
        for y in self.feature_years + (self.label_year,):
            if y not in years:
                raise ConfigError(f"window {self.name!r} references year {y!r} missing from the year map")
        if len(self.feature_years) != 3 or len(set(self.feature_years)) != 3:
            raise ConfigError(f"window {self.name!r} needs 3 distinct feature years")
        cutoffs = sorted((years[y] for y in self.feature_years), reverse=True)
        if len(set(cutoffs)) != 3:
            raise ConfigError(f"window {self.name!r}: feature years map to repeated cutoffs")
        label = years[self.label_year]
        if label <= cutoffs[0]:
            raise ConfigError(f"window {self.name!r}: label year must follow the newest feature year")
        return cutoffs, label

    def to_dict(self):
        return {"name": self.name, "feature_years": list(self.feature_years), "label_year": self.label_year}


@dataclass
class RunConfig:
    edges: str
    years: dict
    train_window: WindowSpec
    eval_window: WindowSpec | None = None
    edge_format: str = "csv"
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    holdout_fraction: float = 0.1
    train_per_class: int | None = None
    groups: dict | str = "standard"
    family: str = "forest"
    forest: ForestConfig = field(default_factory=ForestConfig)
    logistic: LogisticConfig = field(default_factory=LogisticConfig)
    search: SearchSpec | None = None
    baseline: str | None = "logistic"
    drift: dict | None = None
    output_dir: str = "run"
    seed: int = 0
    threads: int = 1
    format: str = "binary"
    base_dir: str = "."

    @classmethod
    def from_dict(cls, d, base_dir="."):
        d = dict(d)
        try:
            years = {str(k): int(v) for k, v in d.pop("years").items()}
            train = WindowSpec.from_dict(d.pop("train_window"))
            edges = str(d.pop("edges"))
        except KeyError as exc:
            raise ConfigError(f"missing required config field {exc}") from None
        ev = d.pop("eval_window", None)
        model = d.pop("model", {}) or {}
        sampling = d.pop("sampling", {}) or {}
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config field(s): {sorted(unknown)}")
        try:
            cfg = cls(
                edges=edges,
                years=years,
                train_window=train,
                eval_window=WindowSpec.from_dict(ev) if ev else None,
                sampling=SamplingConfig(**sampling),
                family=model.get("family", "forest"),
                forest=ForestConfig(**model.get("forest", {})),
                logistic=LogisticConfig(**model.get("logistic", {})),
                search=SearchSpec.from_dict(model["search"]) if model.get("search") else None,
                base_dir=str(base_dir),
                **d,
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh), base_dir=path.parent)

    def validate(self):
        self.train_window.resolve(self.years)
        if self.eval_window is not None:
            self.eval_window.resolve(self.years)
        if self.drift:
            for w in self.drift.get("train_windows", []) + self.drift.get("eval_windows", []):
                WindowSpec.from_dict(w).resolve(self.years)
        if self.family not in ("forest", "logistic"):
            raise ConfigError(f"unknown model family {self.family!r}")
        if self.baseline not in (None, "logistic"):
            raise ConfigError("baseline must be 'logistic' or null")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in [0, 1)")
        if self.format not in ("binary", "csv"):
            raise ConfigError("format must be 'binary' or 'csv'")
        if self.edge_format not in ("csv", "tsv", "binary"):
            raise ConfigError("edge_format must be csv, tsv or binary")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if isinstance(self.groups, str) and self.groups != "standard":
            raise ConfigError(f"unrecognized groups setting {self.groups!r}")
        return self

    def to_dict(self):
        return {
            "edges": self.edges,
            "edge_format": self.edge_format,
            "years": self.years,
            "train_window": self.train_window.to_dict(),
            "eval_window": None if self.eval_window is None else self.eval_window.to_dict(),
            "sampling": vars(self.sampling),
            "holdout_fraction": self.holdout_fraction,
            "train_per_class": self.train_per_class,
            "groups": self.groups,
            "model": {
                "family": self.family,
                "forest": self.forest.to_dict(),
                "logistic": self.logistic.to_dict(),
                "search": None if self.search is None else self.search.to_dict(),
            },
            "baseline": self.baseline,
            "drift": self.drift,
            "output_dir": self.output_dir,
            "seed": self.seed,
            "threads": self.threads,
            "format": self.format,
        }

    def digest(self):
        # threads never changes results, so it is left out of the hash
        d = self.to_dict()
        d.pop("threads")
        d.pop("output_dir")
        return _key(d)

    @property
    def edge_path(self):
        p = Path(self.edges)
        return p if p.is_absolute() else Path(self.base_dir) / p

    @property
    def out_path(self):
        p = Path(self.output_dir)
        return p if p.is_absolute() else Path(self.base_dir) / p


@dataclass
class RunManifest:
    config_hash: str
    stage_timings: dict
    row_counts: dict
    metrics: dict
    artifacts: dict  # file name -> sha256
    reused_stages: list = field(default_factory=list)

    def to_dict(self):
        return {
            "config_hash": self.config_hash,
            "stage_timings": self.stage_timings,
            "row_counts": self.row_counts,
            "metrics": self.metrics,
            "artifacts": self.artifacts,
            "reused_stages": self.reused_stages,
        }


# --- building blocks shared by run, drift and score -------------------------


def _window(edges, cutoffs, label_cutoff):
    return SnapshotWindow(tuple(snapshot(edges, c) for c in cutoffs), int(label_cutoff))


def build_sample(edges, window: SnapshotWindow, sampling: SamplingConfig, seed, holdout_fraction,
                 train_per_class=None):
    """Balanced labeled sample of ``window`` with train/holdout tags.

    The label snapshot is built here and only here.
    """
    label_snap = snapshot(edges, window.label_cutoff)
    cfg = replace(sampling, seed=stage_seed(seed, "sample/negatives"))
    sample, stats = sample_window(window.newest, label_snap, cfg)
    train, hold = holdout_split(sample, holdout_fraction, stage_seed(seed, "sample/holdout"))
    if train_per_class is not None:
        train = subsample_balanced(train, int(train_per_class), stage_seed(seed, "sample/subsample"))
    stats = {**stats, "sampled": len(sample), "train": len(train), "holdout": len(hold)}
    return PairSample.concat([train, hold]), stats


def _groups(cfg: RunConfig, m):
    if cfg.groups == "standard":
        return FeatureGroups.standard()
    if isinstance(cfg.groups, dict) and "derive_threshold" in cfg.groups:
        return FeatureGroups.from_correlation(pearson_matrix(m), float(cfg.groups["derive_threshold"]))
    if isinstance(cfg.groups, dict) and "groups" in cfg.groups:
        return FeatureGroups.from_dict(cfg.groups)
    raise ConfigError(f"unrecognized groups setting {cfg.groups!r}")


def _fit_classifier(cfg: RunConfig, X, y, reducer_json=None):
    report = None
    if cfg.family == "forest":
        fcfg = replace(cfg.forest, seed=stage_seed(cfg.seed, "train/forest"))
        if cfg.search is not None:
            fcfg, report = random_search(X, y, cfg.search, "forest", base=fcfg, threads=cfg.threads)
        model = fit_forest(X, y, fcfg, threads=cfg.threads, reducer_json=reducer_json)
    else:
        lcfg = cfg.logistic
        if cfg.search is not None:
            lcfg, report = random_search(X, y, cfg.search, "logistic", base=lcfg, threads=cfg.threads)
        model = fit_logistic(X, y, lcfg)
    return model, report


# --- stages ----------------------------------------------------------------


class _Stages:
    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out = cfg.out_path
        self.out.mkdir(parents=True, exist_ok=True)
        self.state_path = self.out / "stages.json"
        self.state = json.loads(self.state_path.read_text()) if self.state_path.exists() else {}
        self.timings, self.rows, self.reused = {}, {}, []

    def cached(self, stage, key):
        entry = self.state.get(stage)
        if not entry or entry["key"] != key:
            return False
        for name, digest in entry["outputs"].items():
            p = self.out / name
            if not p.exists() or _sha256_file(p) != digest:
                return False
        return True

    def record(self, stage, key, outputs):
        self.state[stage] = {"key": key, "outputs": {n: _sha256_file(self.out / n) for n in outputs}}
        self.state_path.write_text(json.dumps(self.state, indent=1, sort_keys=True) + "\n")

    def outputs(self, stage):
        return list(self.state[stage]["outputs"])


def _matrix_name(cfg, stem):
    return f"{stem}.{'lffm' if cfg.format == 'binary' else 'csv'}"


def run(cfg: RunConfig, until="evaluate") -> RunManifest:
    """Execute the stages up to ``until`` and write ``manifest.json``."""
    cfg.validate()
    if until not in STAGES:
        raise ConfigError(f"unknown stage {until!r}")
    last = STAGES.index(until)
    st = _Stages(cfg)
    ctx = {}
    metrics = {}
    for i, stage in enumerate(STAGES[: last + 1]):
        t0 = time.perf_counter()
        try:
            _STAGE_FUNCS[stage](cfg, st, ctx)
        except (ConfigError, StageError):
            raise
        except Exception as exc:
            raise StageError(stage, exc) from exc
        st.timings[stage] = round(time.perf_counter() - t0, 6)
    if "metrics" in ctx:
        metrics = ctx["metrics"]
    artifacts = {}
    for stage in STAGES[: last + 1]:
        for name in st.outputs(stage):
            artifacts[name] = _sha256_file(st.out / name)
    manifest = RunManifest(cfg.digest(), st.timings, st.rows, metrics, artifacts, st.reused)
    (st.out / "manifest.json").write_text(json.dumps(manifest.to_dict(), indent=1, sort_keys=True) + "\n")
    return manifest


def _stage_ingest(cfg, st, ctx):
    key = _key("ingest", _sha256_file(cfg.edge_path), cfg.edge_format)
    edges = ingest(cfg.edge_path, cfg.edge_format)
    ctx["edges"] = edges
    ctx["ingest_key"] = key
    st.rows["edges"] = len(edges)
    if st.cached("ingest", key):
        st.reused.append("ingest")
        return
    (st.out / "ingest.json").write_text(json.dumps(edges.summary(), indent=1, sort_keys=True) + "\n")
    st.record("ingest", key, ["ingest.json"])


def _train_window(cfg, ctx):
    if "window" not in ctx:
        cutoffs, label = cfg.train_window.resolve(cfg.years)
        ctx["window"] = _window(ctx["edges"], cutoffs, label)
    return ctx["window"]


def _stage_sample(cfg, st, ctx):
    cutoffs, label = cfg.train_window.resolve(cfg.years)
    key = _key("sample", ctx["ingest_key"], cutoffs, label, vars(cfg.sampling), cfg.seed,
               cfg.holdout_fraction, cfg.train_per_class)
    ctx["sample_key"] = key
    if st.cached("sample", key):
        st.reused.append("sample")
        ctx["sample"] = read_samples(st.out / "samples.csv")
        ctx["sample_stats"] = json.loads((st.out / "sample_stats.json").read_text())
    else:
        w = _train_window(cfg, ctx)
        sample, stats = build_sample(ctx["edges"], w, cfg.sampling, cfg.seed, cfg.holdout_fraction,
                                     cfg.train_per_class)
        write_samples(sample, st.out / "samples.csv")
        (st.out / "sample_stats.json").write_text(json.dumps(stats, indent=1, sort_keys=True) + "\n")
        st.record("sample", key, ["samples.csv", "sample_stats.json"])
        ctx["sample"], ctx["sample_stats"] = sample, stats
    st.rows.update({f"sample_{k}": v for k, v in ctx["sample_stats"].items()})


def _stage_extract(cfg, st, ctx):
    key = _key("extract", ctx["sample_key"], cfg.format)
    ctx["extract_key"] = key
    name = _matrix_name(cfg, "features")
    if st.cached("extract", key):
        st.reused.append("extract")
        ctx["features"] = feats.read_matrix(st.out / name)
    else:
        s = ctx["sample"]
        m = feats.extract_window(_train_window(cfg, ctx), s.pairs, s.label, threads=cfg.threads)
        feats.write_matrix(m, st.out / name, cfg.format)
        st.record("extract", key, [name])
        ctx["features"] = m
    st.rows["feature_rows"] = len(ctx["features"])


def _split_masks(ctx):
    split = ctx["sample"].split
    return split == TRAIN, split == HOLDOUT


def _stage_reduce(cfg, st, ctx):
    key = _key("reduce", ctx["extract_key"], cfg.groups)
    ctx["reduce_key"] = key
    train_mask, _ = _split_masks(ctx)
    m = ctx["features"]
    if st.cached("reduce", key):
        st.reused.append("reduce")
        reducer = PcaGroupModel.load(st.out / "reducer.json")
    else:
        train_m = m.take(np.flatnonzero(train_mask))
        reducer = fit_reducer(train_m, _groups(cfg, train_m))
        reducer.save(st.out / "reducer.json")
        screen = univariate_screen(train_m)
        (st.out / "screen.json").write_text(json.dumps(screen, indent=1) + "\n")
        (st.out / "components.json").write_text(
            json.dumps(export_components(reducer), indent=1, sort_keys=True) + "\n"
        )
        st.record("reduce", key, ["reducer.json", "screen.json", "components.json"])
    ctx["reducer"] = reducer
    ctx["reduced"] = apply_reducer(m, reducer)


def _stage_train(cfg, st, ctx):
    key = _key("train", ctx["reduce_key"], cfg.family, cfg.forest.to_dict(), cfg.logistic.to_dict(),
               None if cfg.search is None else cfg.search.to_dict(), cfg.seed)
    ctx["train_key"] = key
    train_mask, _ = _split_masks(ctx)
    X = ctx["reduced"].rows[train_mask]
    y = ctx["reduced"].labels[train_mask]
    reducer_json = (st.out / "reducer.json").read_text()
    outputs = ["model.lfrf"] if cfg.family == "forest" else ["model.json"]
    if cfg.search is not None:
        outputs.append("search.json")
    if st.cached("train", key):
        st.reused.append("train")
        if cfg.family == "forest":
            ctx["model"] = load_model(st.out / "model.lfrf")
        else:
            d = json.loads((st.out / "model.json").read_text())
            from .model.logistic import LogisticModel

            ctx["model"] = LogisticModel(np.array(d["coef"]), d["intercept"], LogisticConfig(**d["config"]))
    else:
        model, report = _fit_classifier(cfg, X, y, reducer_json)
        if cfg.family == "forest":
            save_model(model, st.out / "model.lfrf")
        else:
            (st.out / "model.json").write_text(json.dumps({
                "coef": model.coef.tolist(), "intercept": model.intercept, "config": model.config.to_dict(),
            }, indent=1) + "\n")
        if report is not None:
            (st.out / "search.json").write_text(json.dumps(report, indent=1, default=str) + "\n")
        st.record("train", key, outputs)
        ctx["model"] = model
    st.rows["train_rows"] = int(train_mask.sum())


def _stage_evaluate(cfg, st, ctx):
    key = _key("evaluate", ctx["train_key"], cfg.baseline,
               None if cfg.eval_window is None else cfg.eval_window.to_dict())
    if st.cached("evaluate", key):
        st.reused.append("evaluate")
        ctx["metrics"] = json.loads((st.out / "metrics.json").read_text())
        return
    train_mask, hold_mask = _split_masks(ctx)
    R = ctx["reduced"]
    metrics = {"family": cfg.family, "train_window": cfg.train_window.name}
    model = ctx["model"]
    if hold_mask.any():
        metrics["holdout_auc"] = auc_score(model.predict_proba(R.rows[hold_mask], threads=cfg.threads),
                                           R.labels[hold_mask])
        metrics["holdout_rows"] = int(hold_mask.sum())
    metrics["train_auc"] = auc_score(model.predict_proba(R.rows[train_mask], threads=cfg.threads),
                                     R.labels[train_mask])
    if cfg.baseline == "logistic" and cfg.family != "logistic" and hold_mask.any():
        base = fit_logistic(R.rows[train_mask], R.labels[train_mask], cfg.logistic)
        metrics["baseline_logistic_holdout_auc"] = auc_score(base.predict_proba(R.rows[hold_mask]),
                                                             R.labels[hold_mask])
    if cfg.eval_window is not None:
        trained = {"name": cfg.train_window.name, "reducer": ctx["reducer"], "model": model,
                   "holdout": None}
        res = evaluate_window(ctx["edges"], cfg.eval_window.to_dict(), trained, cfg)
        metrics["eval_window"] = cfg.eval_window.name
        metrics["eval_auc"] = res["auc"]
        metrics["eval_rows"] = res["rows"]
    (st.out / "metrics.json").write_text(json.dumps(metrics, indent=1, sort_keys=True) + "\n")
    st.record("evaluate", key, ["metrics.json"])
    ctx["metrics"] = metrics


_STAGE_FUNCS = {
    "ingest": _stage_ingest,
    "sample": _stage_sample,
    "extract": _stage_extract,
    "reduce": _stage_reduce,
    "train": _stage_train,
    "evaluate": _stage_evaluate,
}


# --- drift support ---------------------------------------------------------


def train_window(edges, window, cfg: RunConfig):
    """Fit reducer and classifier on one window's train split (in memory)."""
    spec = WindowSpec.from_dict(window)
    cutoffs, label = spec.resolve(cfg.years)
    w = _window(edges, cutoffs, label)
    sample, _ = build_sample(edges, w, cfg.sampling, cfg.seed, cfg.holdout_fraction, cfg.train_per_class)
    m = feats.extract_window(w, sample.pairs, sample.label, threads=cfg.threads)
    tr = np.flatnonzero(sample.split == TRAIN)
    train_m = m.take(tr)
    reducer = fit_reducer(train_m, _groups(cfg, train_m))
    R = apply_reducer(train_m, reducer)
    model, _ = _fit_classifier(cfg, R.rows, R.labels, reducer.to_json())
    holdout = m.take(np.flatnonzero(sample.split == HOLDOUT))
    return {"name": spec.name, "reducer": reducer, "model": model, "holdout": holdout}


def evaluate_window(edges, window, trained, cfg: RunConfig):
    spec = WindowSpec.from_dict(window)
    if spec.name == trained["name"] and trained.get("holdout") is not None:
        m = trained["holdout"]
    else:
        cutoffs, label = spec.resolve(cfg.years)
        w = _window(edges, cutoffs, label)
        sample, _ = build_sample(edges, w, cfg.sampling, stage_seed(cfg.seed, f"eval/{spec.name}"), 0.0)
        m = feats.extract_window(w, sample.pairs, sample.label, threads=cfg.threads)
    R = apply_reducer(m, trained["reducer"])
    scores = trained["model"].predict_proba(R.rows, threads=cfg.threads)
    return {"auc": auc_score(scores, R.labels), "rows": len(R)}


# --- scoring ---------------------------------------------------------------


def score(model_file, edge_file, feature_cutoffs, output_path, min_degree=10, edge_format="csv",
          threads=1, block=1 << 18, two_band=False):
    """Score every candidate pair of a feature window with a saved forest.

    Writes ``u,v,score`` rows sorted by descending score (ties by ``u, v``).
    Returns the number of scored pairs.
    """
    model = load_model(model_file)
    if model.reducer_json is None:
        raise ValueError(f"{model_file}: model has no attached reducer")
    reducer = PcaGroupModel.from_json(model.reducer_json)
    edges = ingest(edge_file, edge_format)
    cutoffs = sorted((int(c) for c in feature_cutoffs), reverse=True)
    # scoring never builds a label snapshot; the label cutoff is nominal
    w = SnapshotWindow(tuple(snapshot(edges, c) for c in cutoffs), cutoffs[0] + 1)
    cfg = SamplingConfig(min_degree=min_degree, two_band=two_band)
    us, vs, ss = [], [], []
    for bu, bv in iter_candidate_blocks(w.newest, cfg, block=block):
        m = feats.extract_window(w, np.column_stack([bu, bv]), threads=threads)
        R = apply_reducer(m, reducer)
        us.append(bu)
        vs.append(bv)
        ss.append(model.predict_proba(R.rows, threads=threads))
    u = np.concatenate(us) if us else np.zeros(0, dtype=np.int64)
    v = np.concatenate(vs) if vs else np.zeros(0, dtype=np.int64)
    s = np.concatenate(ss) if ss else np.zeros(0)
    order = np.lexsort((v, u, -s))
    with open(output_path, "w", encoding="utf-8") as fh:
        fh.write("u,v,score\n")
        for a, b, c in zip(u[order].tolist(), v[order].tolist(), s[order].tolist()):
            fh.write(f"{a},{b},{c!r}\n")
    return len(s)


__all__ = [
    "ConfigError", "RunConfig", "RunManifest", "StageError", "WindowSpec", "build_sample",
    "evaluate_window", "gen_synthetic", "model_bytes", "run", "score", "stage_seed", "train_window",
]
