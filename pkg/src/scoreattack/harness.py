"""Seeded experiment runner, accuracy statistics and CSV/SVG reports."""
from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import statistics
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed

from . import corpus as corpus_mod
from .attack import AttackConfig, Prediction, RefinedScoreAttack, ScoreAttack, accuracy
from .corpus import Corpus, extract_vocabulary, split_corpus, subsample, synthetic_corpus
from .countermeasures import CHEN_P, CHEN_Q, CountermeasureConfig, entry_overhead
from .index import DEFAULT_MEMORY_BUDGET, build_index
from .similarity import epsilon_similarity
from .sse import DISTRIBUTIONS, KNOWN_POLICIES, LabeledQueryLog, sample_queries, select_known_queries

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger(__name__)

DATASETS = ("enron", "apache", "apache_reduced", "synthetic", "cross")
ENRON_SIZE = 30109
DATA_ENV = {"enron": "SCOREATTACK_ENRON", "apache": "SCOREATTACK_APACHE"}

RUN_COLUMNS = [
    "run_id", "seed", "dataset", "m_sim", "m_real", "query_count", "known_count",
    "known_policy", "distribution", "attack", "order", "ref_speed", "max_cluster_size",
    "countermeasure", "n_pad", "p", "q", "accuracy", "epsilon", "vocab_overlap",
    "runtime_ms_total", "runtime_ms_attack",
]
STATS_COLUMNS = ["group", "series", "name", "runs", "mu", "sigma", "min", "max",
                 "q0.25", "q0.75", "q0.8", "q0.85", "q0.95", "q0.99"]
QUANTILES = (0.25, 0.75, 0.8, 0.85, 0.95, 0.99)


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    name: str = "experiment"
    group: str = ""
    series: str = ""
    dataset: str = "enron"
    sim_dataset: str = ""
    real_dataset: str = ""
    enron_path: str = ""
    apache_path: str = ""
    fraction_real: float = 0.6
    n_sim: int = 0  # 0 keeps the whole attacker side
    self_attack: bool = False  # attacker holds exactly the indexed documents
    apache_truncate: int = ENRON_SIZE
    m_sim: int = 1000
    m_real: int = 1000
    query_count: int = 150
    known_count: int = 10
    known_policy: str = "uniform"
    distribution: str = "uniform"
    attack: str = "refined"
    norm: str = "l2"
    ref_speed: int = 10
    order: int = 2
    attacker_model: str = "honest_server"
    max_cluster_size: int = 0  # 0 disables clustering
    countermeasure: str = "none"
    n_pad: int = 500
    p: float = CHEN_P
    q: float = CHEN_Q
    repetitions: int = 20
    base_seed: int = 0
    memory_budget: int = DEFAULT_MEMORY_BUDGET
    synthetic_docs: int = 3000
    synthetic_vocab: int = 600
    synthetic_zipf: float = 1.0
    synthetic_topics: int = 20
    synthetic_doc_length: float = 30.0
    synthetic_seed: int = 0
    note: str = ""

    def attack_config(self) -> AttackConfig:
        return AttackConfig(norm=self.norm, ref_speed=self.ref_speed, order=self.order,
                            attacker_model=self.attacker_model,
                            max_cluster_size=self.max_cluster_size or None)

    def countermeasure_config(self, seed=None) -> CountermeasureConfig:
        return CountermeasureConfig(self.countermeasure, self.n_pad, self.p, self.q, seed)

    def validate(self) -> "ExperimentConfig":
        problems = []
        for name in ("m_sim", "m_real", "query_count", "known_count", "repetitions", "ref_speed"):
            if getattr(self, name) < 1:
                problems.append(f"{name} must be positive (got {getattr(self, name)})")
        if self.dataset not in DATASETS:
            problems.append(f"dataset must be one of {DATASETS} (got {self.dataset!r})")
        if self.dataset == "cross":
            for name in ("sim_dataset", "real_dataset"):
                if getattr(self, name) not in DATASETS[:4]:
                    problems.append(f"cross dataset needs {name} among {DATASETS[:4]}")
        if self.query_count > self.m_real:
            problems.append(f"query_count={self.query_count} exceeds m_real={self.m_real}")
        if self.known_count > self.query_count:
            problems.append(f"known_count={self.known_count} exceeds query_count={self.query_count}")
        if self.known_policy not in KNOWN_POLICIES:
            problems.append(f"known_policy must be one of {KNOWN_POLICIES}")
        if self.distribution not in DISTRIBUTIONS:
            problems.append(f"distribution must be one of {DISTRIBUTIONS}")
        if self.attack not in ("base", "refined"):
            problems.append("attack must be 'base' or 'refined'")
        if not 0 < self.fraction_real < 1:
            problems.append("fraction_real must lie in (0, 1)")
        try:
            self.attack_config()
            self.countermeasure_config()
        except ValueError as exc:
            problems.append(str(exc))
        if problems:
            raise ConfigError(f"invalid experiment '{self.name}': " + "; ".join(problems))
        return self

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        fields = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - set(fields))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        kwargs = {}
        for key, value in data.items():
            kind = type(fields[key].default)
            if kind is float and isinstance(value, int) and not isinstance(value, bool):
                value = float(value)
            if type(value) is not kind:
                raise ConfigError(f"{key} expects {kind.__name__}, got {value!r}")
            kwargs[key] = value
        return cls(**kwargs)

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        path = Path(path)
        try:
            data = tomllib.loads(path.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"cannot parse config file {path}: {exc}") from exc
        data.setdefault("name", path.stem)
        return cls.from_mapping(data)

    def to_toml(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            lines.append(f"{f.name} = {json.dumps(value)}")
        return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    run_id: str
    seed: int
    accuracy: float
    epsilon: float
    vocab_overlap: float
    query_overlap: float  # share of unknown queries whose keyword the attacker knows
    runtime_ms_total: float
    runtime_ms_attack: float
    cluster_sizes: list[int] = field(default_factory=list)
    entry_overhead: float = 0.0
    predictions_path: str = ""
    predictions: list[Prediction] | None = field(default=None, repr=False)
    log: LabeledQueryLog | None = field(default=None, repr=False)


@dataclass(frozen=True)
class AccuracyStats:
    mu: float
    sigma: float
    min: float
    max: float
    quantiles: dict

    def row(self) -> dict:
        out = {"mu": self.mu, "sigma": self.sigma, "min": self.min, "max": self.max}
        out.update({f"q{p}": v for p, v in self.quantiles.items()})
        return out


def aggregate_stats(values: Sequence[float]) -> AccuracyStats:
    """Mean, sample standard deviation, extrema and nearest-rank quantiles."""
    x = np.asarray([float(v) for v in values], dtype=np.float64)
    if x.size == 0:
        raise ValueError("cannot aggregate an empty result list")
    # statistics works in exact arithmetic, so identical values give sigma == 0
    sigma = statistics.stdev(x.tolist()) if x.size > 1 else 0.0
    quantiles = {p: float(np.quantile(x, p, method="inverted_cdf")) for p in QUANTILES}
    return AccuracyStats(statistics.fmean(x.tolist()), sigma, float(x.min()), float(x.max()),
                         quantiles)


_CORPUS_CACHE: dict[tuple, Corpus] = {}


def _raw_path(name: str, cfg: ExperimentConfig) -> Path:
    explicit = cfg.enron_path if name == "enron" else cfg.apache_path
    path = explicit or os.environ.get(DATA_ENV[name], "")
    if not path:
        raise ConfigError(
            f"dataset '{name}' is not available: set {DATA_ENV[name]} or {name}_path "
            "to a corpus cache file or a raw archive"
        )
    return Path(path)


def load_dataset(name: str, cfg: ExperimentConfig) -> Corpus:
    """Load (and memoise) a preprocessed corpus by dataset name."""
    if name == "synthetic":
        key = ("synthetic", cfg.synthetic_docs, cfg.synthetic_vocab, cfg.synthetic_zipf,
               cfg.synthetic_topics, cfg.synthetic_doc_length, cfg.synthetic_seed)
        if key not in _CORPUS_CACHE:
            _CORPUS_CACHE[key] = synthetic_corpus(
                cfg.synthetic_docs, cfg.synthetic_vocab, cfg.synthetic_zipf,
                cfg.synthetic_topics, cfg.synthetic_doc_length, cfg.synthetic_seed)
        return _CORPUS_CACHE[key]
    base = "apache" if name == "apache_reduced" else name
    path = _raw_path(base, cfg)
    key = (base, str(path))
    if key not in _CORPUS_CACHE:
        _CORPUS_CACHE[key] = read_corpus(path, base)
    return _CORPUS_CACHE[key]


def read_corpus(path, kind: str) -> Corpus:
    """A corpus cache file, or a raw Enron maildir / directory of Apache mbox files."""
    path = Path(path)
    if path.is_file():
        return corpus_mod.load_corpus(path)
    if kind == "enron":
        raw = corpus_mod.parse_enron(path)
    else:
        if not path.is_dir():
            raise corpus_mod.IngestionError(f"no mbox archives found at {path}")
        raw = corpus_mod.parse_apache(sorted(p for p in path.iterdir() if p.is_file()))
    return corpus_mod.preprocess(raw, name=kind)


def _child_seeds(seed: int, count: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(count)]


def _document_sets(cfg: ExperimentConfig, seeds: list[int]) -> tuple[Corpus, Corpus]:
    if cfg.dataset == "cross":
        _, d_sim = split_corpus(_prepared(cfg.sim_dataset, cfg, seeds[5]), cfg.fraction_real, seeds[0])
        d_real, _ = split_corpus(_prepared(cfg.real_dataset, cfg, seeds[5]), cfg.fraction_real, seeds[0])
    else:
        d_real, d_sim = split_corpus(_prepared(cfg.dataset, cfg, seeds[5]), cfg.fraction_real, seeds[0])
    if cfg.self_attack:
        d_sim = d_real
    if cfg.n_sim:
        d_sim = subsample(d_sim, cfg.n_sim, seeds[6])
    return d_sim, d_real


def _prepared(name: str, cfg: ExperimentConfig, seed: int) -> Corpus:
    full = load_dataset(name, cfg)
    if name == "apache_reduced" and len(full) > cfg.apache_truncate:
        return subsample(full, cfg.apache_truncate, seed)
    return full


def run_once(cfg: ExperimentConfig, seed: int, run_id: str = "",
             keep_predictions: bool = False) -> RunResult:
    """One simulation: split, extract, index, protect, query, attack, score."""
    t0 = time.perf_counter()
    seeds = _child_seeds(seed, 7)
    d_sim, d_real = _document_sets(cfg, seeds)
    vocab_sim = extract_vocabulary(d_sim, cfg.m_sim)
    vocab_real = extract_vocabulary(d_real, cfg.m_real)
    index_sim = build_index(d_sim, vocab_sim)
    index_real = build_index(d_real, vocab_real)
    served = cfg.countermeasure_config(seeds[1]).apply(index_real)
    log = sample_queries(vocab_real, served, cfg.distribution, cfg.query_count, seeds[2])
    log = select_known_queries(log, cfg.known_count, cfg.known_policy, seeds[3],
                               candidate_keywords=vocab_sim)

    t_attack = time.perf_counter()
    acfg = cfg.attack_config()
    params = dict(norm=acfg.norm, order=acfg.order, attacker_model=acfg.attacker_model,
                  max_cluster_size=acfg.max_cluster_size, memory_budget=cfg.memory_budget)
    if cfg.attack == "refined":
        attacker = RefinedScoreAttack(ref_speed=acfg.ref_speed, **params)
    else:
        attacker = ScoreAttack(**params)
    predictions = attacker.fit(index_sim).predict(log.redacted())
    attack_ms = (time.perf_counter() - t_attack) * 1000

    acc = accuracy(predictions, log)
    report = epsilon_similarity(d_sim, d_real, vocab_real, vocab_sim)
    unknown = [td for td in log.queries if td not in log.known_trapdoors]
    query_overlap = (sum(1 for td in unknown if log.truth[td] in vocab_sim) / len(unknown)
                     if unknown else 1.0)
    if acc > query_overlap + 1e-12:
        raise AssertionError(
            f"accuracy {acc} exceeds the share {query_overlap} of recoverable queries")
    overhead = entry_overhead(index_real, served) if cfg.countermeasure != "none" else 0.0
    return RunResult(
        run_id=run_id, seed=seed, accuracy=acc, epsilon=report.epsilon,
        vocab_overlap=report.vocab_overlap, query_overlap=query_overlap,
        runtime_ms_total=(time.perf_counter() - t0) * 1000, runtime_ms_attack=attack_ms,
        cluster_sizes=[len(p.keywords) for p in predictions],
        entry_overhead=overhead,
        predictions=predictions if keep_predictions else None,
        log=log if keep_predictions else None,
    )


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> tuple[list[RunResult], AccuracyStats]:
    """``cfg.repetitions`` independent runs with seeds ``base_seed + i``."""
    cfg.validate()
    if cfg.dataset == "cross":
        names = {cfg.sim_dataset, cfg.real_dataset}
    else:
        names = {cfg.dataset}
    for name in names:
        load_dataset(name, cfg)  # fail before any run starts
    jobs = [(cfg.base_seed + i, f"{cfg.name}-{i:03d}") for i in range(cfg.repetitions)]
    if workers > 1:
        results = Parallel(n_jobs=workers)(delayed(run_once)(cfg, s, rid) for s, rid in jobs)
    else:
        results = [run_once(cfg, s, rid) for s, rid in jobs]
    return results, aggregate_stats([r.accuracy for r in results])


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_row(cfg: ExperimentConfig, result: RunResult, timing: bool = True) -> dict:
    values = {
        "run_id": result.run_id, "seed": result.seed,
        "dataset": (f"cross({cfg.sim_dataset},{cfg.real_dataset})"
                    if cfg.dataset == "cross" else cfg.dataset),
        "m_sim": cfg.m_sim, "m_real": cfg.m_real, "query_count": cfg.query_count,
        "known_count": cfg.known_count, "known_policy": cfg.known_policy,
        "distribution": cfg.distribution, "attack": cfg.attack, "order": cfg.order,
        "ref_speed": cfg.ref_speed if cfg.attack == "refined" else "",
        "max_cluster_size": cfg.max_cluster_size or "",
        "countermeasure": cfg.countermeasure,
        "n_pad": cfg.n_pad if cfg.countermeasure == "padding" else "",
        "p": cfg.p if cfg.countermeasure == "obfuscation" else "",
        "q": cfg.q if cfg.countermeasure == "obfuscation" else "",
        "accuracy": result.accuracy, "epsilon": result.epsilon,
        "vocab_overlap": result.vocab_overlap,
        "runtime_ms_total": round(result.runtime_ms_total, 3) if timing else "",
        "runtime_ms_attack": round(result.runtime_ms_attack, 3) if timing else "",
    }
    return {k: _fmt(v) for k, v in values.items()}


def emit_report(campaign: Sequence[tuple[ExperimentConfig, list[RunResult], AccuracyStats]],
                out_dir, title: str = "accuracy", timing: bool = True) -> dict[str, Path]:
    """Write runs.csv, stats.csv, the resolved configs and a grouped bar chart.

    With ``timing=False`` the runtime columns are left empty so that reruns
    produce byte-identical files.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create report directory {out}: {exc}") from exc
    paths = {"runs": out / "runs.csv", "stats": out / "stats.csv",
             "configs": out / "configs.toml", "chart": out / f"{title}.svg"}
    with paths["runs"].open("w", newline="") as fh:
        writer = csv.DictWriter(fh, RUN_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for cfg, results, _ in campaign:
            for r in results:
                writer.writerow(run_row(cfg, r, timing))
    with paths["stats"].open("w", newline="") as fh:
        writer = csv.DictWriter(fh, STATS_COLUMNS, lineterminator="\n")
        writer.writeheader()
        for cfg, results, stats in campaign:
            row = {"group": cfg.group or cfg.name, "series": cfg.series or cfg.attack,
                   "name": cfg.name, "runs": len(results)}
            row.update({k: _fmt(v) for k, v in stats.row().items()})
            writer.writerow(row)
    clustered = [(cfg, res) for cfg, res, _ in campaign if cfg.max_cluster_size]
    if clustered:
        paths["clusters"] = out / "cluster_sizes.csv"
        with paths["clusters"].open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["name", "max_cluster_size", "mean_size"]
                            + [f"q{p}" for p in QUANTILES] + ["mean_accuracy"])
            for cfg, res in clustered:
                sizes = [s for r in res for s in r.cluster_sizes]
                st = aggregate_stats(sizes)
                writer.writerow([cfg.name, cfg.max_cluster_size, _fmt(st.mu)]
                                + [_fmt(v) for v in st.quantiles.values()]
                                + [_fmt(float(np.mean([r.accuracy for r in res])))])
    paths["configs"].write_text("\n".join(
        f"# --- {cfg.name}\n{cfg.to_toml()}" for cfg, _, _ in campaign))
    _bar_chart(campaign, paths["chart"], title)
    return paths


def _bar_chart(campaign, path: Path, title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    groups, series = [], []
    for cfg, _, _ in campaign:
        g, s = cfg.group or cfg.name, cfg.series or cfg.attack
        if g not in groups:
            groups.append(g)
        if s not in series:
            series.append(s)
    width = 0.8 / len(series)
    fig, ax = plt.subplots(figsize=(max(4.0, 1.4 * len(groups) + 2), 3.5))
    for si, s in enumerate(series):
        xs, mus, sigmas = [], [], []
        for cfg, _, stats in campaign:
            if (cfg.series or cfg.attack) == s:
                xs.append(groups.index(cfg.group or cfg.name) + (si - (len(series) - 1) / 2) * width)
                mus.append(stats.mu)
                sigmas.append(stats.sigma)
        ax.bar(xs, mus, width=width, yerr=sigmas, capsize=3, label=s)
    ax.set_xticks(range(len(groups)))
    ax.set_xticklabels(groups)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("accuracy")
    ax.set_title(title)
    if len(series) > 1:
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
