"""End-to-end experiments: fold-wise fitting, evaluation, aggregation and sweeps.

Everything fitted inside a fold (channel statistics, projection, codebook,
idf statistics, alignment map) sees training segments only. Each fitted
statistic records the fingerprint of the segment ids it was fitted on, so a
report can be audited for leakage after the fact.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import warnings
from collections import Counter
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .align import (
    IdfStats,
    classify_closed_set,
    embed_segment,
    embed_text,
    embed_texts,
    fit_alignment,
    fit_idf,
    normalize_text,
    rank_scores,
    score_matrix,
)
from .augment import AugmentConfig, augment
from .dataset import CLASS_NAMES, Dataset, Segment, load_dataset
from .metrics import accuracy, macro_f1, mrr, ndcg_at_k, recall_at_k
from .seeding import derive_seed, fingerprint
from .spectral import STFTParams, spectral_l1
from .splits import Fold, SplitSpec, make_splits
from .synth import CorpusConfig, generate_corpus
from .tokenizer import (
    VIEWS,
    ChannelStats,
    Codebook,
    ChunkGrid,
    FeatureSpec,
    Projection,
    Tokenizer,
    TokenizerParams,
    assemble_features,
    chunk,
    chunk_geometry,
    decode,
    fit_codebook,
    fit_projection,
    js_divergence,
    quantize_many,
    spectral_features,
    token_histogram,
)

log = logging.getLogger(__name__)

METRICS = ("time_l1", "spectral_l1", "js", "r@1", "r@5", "mrr", "ndcg@5", "accuracy", "macro_f1")
SWEEP_AXES = ("K", "window_s", "views", "augment", "lam")
VIEW_PRESETS = {"time": ("time",), "time+stft": ("time", "stft"), "time+stft+cwt": VIEWS}
SEED_ENV = "NARRATE_SEED"


class HarnessError(RuntimeError):
    pass


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ configuration


@dataclass(frozen=True)
class AlignParams:
    lam: float = 1.0
    text_dim: int = 512
    # append a block pooled over all present positions to the per-position blocks
    pooled: bool = True
    # which annotation serves as the gold description
    gold: str = "narration"
    pool_size: int = 100
    # extra training pairs per segment built from random subsets of its positions
    subset_views: int = 0
    # extra training pairs: every single-position view of each multi-position segment
    single_views: bool = True

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ConfigError("lam must be >= 0")
        if self.text_dim < 1:
            raise ConfigError("text_dim must be >= 1")
        if self.gold not in ("narration", "expert_soft"):
            raise ConfigError("gold must be 'narration' or 'expert_soft'")
        if self.pool_size < 1:
            raise ConfigError("pool_size must be >= 1")
        if self.subset_views < 0:
            raise ConfigError("subset_views must be >= 0")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: str | None = None
    synth: CorpusConfig | None = None
    tokenizer: TokenizerParams = field(default_factory=TokenizerParams)
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    align: AlignParams = field(default_factory=AlignParams)
    splits: tuple[SplitSpec, ...] = (SplitSpec("XS"),)
    seed: int = 0
    repetitions: int = 1
    out_dir: str | None = None

    def __post_init__(self) -> None:
        if (self.dataset is None) == (self.synth is None):
            raise ConfigError("exactly one of 'dataset' and 'synth' must be given")
        if self.dataset is not None and not Path(self.dataset).exists():
            raise ConfigError(f"dataset path does not exist: {self.dataset}")
        if self.tokenizer.K < 2:
            raise ConfigError("K must be >= 2")
        if self.repetitions < 1:
            raise ConfigError("repetitions must be >= 1")
        if not self.splits:
            raise ConfigError("at least one split spec is required")

    @classmethod
    def from_json(cls, rec: dict) -> "ExperimentConfig":
        known = set(cls.__dataclass_fields__)
        unknown = set(rec) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                dataset=rec.get("dataset"),
                synth=CorpusConfig.from_json(rec["synth"]) if rec.get("synth") is not None else None,
                tokenizer=TokenizerParams.from_json(rec.get("tokenizer", {})),
                augment=AugmentConfig.from_json(rec.get("augment", {})),
                align=AlignParams(**rec.get("align", {})),
                splits=tuple(SplitSpec.from_json(s) for s in rec.get("splits", [{"mode": "XS"}])),
                seed=int(rec.get("seed", 0)),
                repetitions=int(rec.get("repetitions", 1)),
                out_dir=rec.get("out_dir"),
            )
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    def to_json(self) -> dict:
        return {
            "dataset": self.dataset,
            "synth": self.synth.to_json() if self.synth is not None else None,
            "tokenizer": self.tokenizer.to_json(),
            "augment": self.augment.to_json(),
            "align": asdict(self.align),
            "splits": [s.to_json() for s in self.splits],
            "seed": self.seed,
            "repetitions": self.repetitions,
            "out_dir": self.out_dir,
        }

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        """Read a JSON config; ``NARRATE_SEED`` in the environment overrides ``seed``."""
        p = Path(path)
        if not p.is_file():
            raise FileNotFoundError(f"config not found: {p}")
        rec = json.loads(p.read_text(encoding="utf-8"))
        if rec.get("dataset") is not None and not Path(rec["dataset"]).is_absolute():
            rec["dataset"] = str((p.parent / rec["dataset"]).resolve())
        return with_env_seed(cls.from_json(rec))


def with_env_seed(cfg: ExperimentConfig) -> ExperimentConfig:
    env = os.environ.get(SEED_ENV)
    if env is None or env == "":
        return cfg
    try:
        return replace(cfg, seed=int(env))
    except ValueError:
        raise ConfigError(f"{SEED_ENV} must be an integer, got {env!r}") from None


def repetition_seed(global_seed: int, rep: int) -> int:
    return derive_seed(global_seed, "repetition", rep)


# ----------------------------------------------------------------- cached inputs


@dataclass
class PairTable:
    """Chunks of every (segment, position) pair in a dataset, stacked."""

    chunks: np.ndarray  # N x L x C
    masks: np.ndarray
    rows: dict[tuple[str, str], np.ndarray]
    grids: dict[tuple[str, str], ChunkGrid]
    values: dict[tuple[str, str], np.ndarray]  # raw T x C slice (NaN where missing)

    def stack_rows(self, pairs: Sequence[tuple[str, str]]) -> np.ndarray:
        if not pairs:
            return np.zeros(0, dtype=np.int64)
        return np.concatenate([self.rows[p] for p in pairs])


@dataclass
class LoadedData:
    dataset: Dataset
    key: str
    index: dict[str, Segment]


class Workspace:
    """Memoizes K-independent work (corpora, chunking, spectral views, projections)."""

    def __init__(self) -> None:
        self._data: dict[str, LoadedData] = {}
        self._pairs: dict[tuple, PairTable] = {}
        self._spectral: dict[tuple, np.ndarray] = {}
        self._fold: dict[tuple, tuple[ChannelStats, Projection, np.ndarray]] = {}

    def data(self, cfg: ExperimentConfig) -> LoadedData:
        if cfg.synth is not None:
            key = "synth:" + json.dumps(cfg.synth.to_json(), sort_keys=True)
        else:
            key = "path:" + str(Path(cfg.dataset).resolve())
        if key not in self._data:
            d = generate_corpus(cfg.synth)[0] if cfg.synth is not None else load_dataset(cfg.dataset)
            self._data[key] = LoadedData(d, key, d.segment_index())
        return self._data[key]

    def pairs(self, data: LoadedData, P: TokenizerParams) -> PairTable:
        key = (data.key, P.window_s, P.overlap)
        if key not in self._pairs:
            self._pairs[key] = _build_pairs(data.dataset, P)
        return self._pairs[key]

    def spectral(self, data: LoadedData, P: TokenizerParams, spec: FeatureSpec) -> np.ndarray | None:
        if spec.views == ("time",):
            return None
        key = (data.key, P.window_s, P.overlap, spec.views, spec.stft, spec.cwt)
        if key not in self._spectral:
            t = self.pairs(data, P)
            self._spectral[key] = _blocked(lambda s: spectral_features(t.chunks[s], t.masks[s], spec), len(t.chunks))
        return self._spectral[key]

    def fold_features(
        self, data: LoadedData, P: TokenizerParams, spec: FeatureSpec, fit_rows: np.ndarray
    ) -> tuple[ChannelStats, Projection, np.ndarray]:
        """Stats and projection fitted on ``fit_rows``; projected features of every chunk."""
        key = (
            data.key, P.window_s, P.overlap, spec.views, spec.stft, spec.cwt, P.d,
            P.projection_rows, hashlib.sha256(fit_rows.tobytes()).hexdigest(),
        )
        if key not in self._fold:
            t = self.pairs(data, P)
            spectral = self.spectral(data, P, spec)
            sp = None if spectral is None else spectral[fit_rows]
            stats = ChannelStats.fit(t.chunks[fit_rows], t.masks[fit_rows])
            raw = assemble_features(t.chunks[fit_rows], t.masks[fit_rows], stats, spec, sp)
            proj = fit_projection(raw, P.d, P.projection_rows)
            del raw
            H = _blocked(
                lambda s: proj.project(
                    assemble_features(t.chunks[s], t.masks[s], stats, spec,
                                      None if spectral is None else spectral[s])
                ),
                len(t.chunks),
            )
            self._fold[key] = (stats, proj, H)
        return self._fold[key]


def _blocked(fn, n: int, block: int = 1024) -> np.ndarray:
    return np.concatenate([fn(slice(i, min(i + block, n))) for i in range(0, max(n, 1), block)])


def _build_pairs(d: Dataset, P: TokenizerParams) -> PairTable:
    chunk_parts, mask_parts = [], []
    rows: dict[tuple[str, str], np.ndarray] = {}
    grids: dict[tuple[str, str], ChunkGrid] = {}
    values: dict[tuple[str, str], np.ndarray] = {}
    n = 0
    for sess in d.sessions:
        for seg in sess.segments:
            for pos in sorted(seg.positions):
                st = sess.streams[pos]
                grid, c, m = chunk(st, (seg.start_s, seg.end_s), P.window_s, P.overlap)
                key = (seg.segment_id, pos)
                rows[key] = np.arange(n, n + grid.n_chunks)
                grids[key] = grid
                values[key] = st.channels[grid.offset : grid.offset + grid.n_samples]
                n += grid.n_chunks
                chunk_parts.append(c)
                mask_parts.append(m)
    L, _ = chunk_geometry(P.window_s, P.overlap, _sample_rate(d))
    C = chunk_parts[0].shape[2] if chunk_parts else 9
    chunks = np.concatenate(chunk_parts) if n else np.zeros((0, L, C))
    masks = np.concatenate(mask_parts) if n else np.zeros((0, L, C), dtype=bool)
    return PairTable(chunks, masks, rows, grids, values)


def _sample_rate(d: Dataset) -> float:
    rates = {st.sample_rate_hz for s in d.sessions for st in s.streams.values()}
    if len(rates) != 1:
        raise HarnessError(f"streams must share one sample rate, found {sorted(rates)}")
    return rates.pop()


# ------------------------------------------------------------------- fold fitting


@dataclass
class FittedFold:
    tokenizer: Tokenizer
    idf: IdfStats
    amap: Any
    train_ids: tuple[str, ...]
    tokens: np.ndarray  # token id of every chunk in the pair table
    fingerprints: dict[str, str]


def _pairs_for(ids: Sequence[str], index: dict[str, Segment], view, table: PairTable) -> list[tuple[str, str]]:
    out = []
    for sid in ids:
        for p in sorted(view(index[sid])):
            if len(table.rows[(sid, p)]):
                out.append((sid, p))
    return out


def fit_fold(
    ws: Workspace,
    data: LoadedData,
    cfg: ExperimentConfig,
    fold: Fold,
    seed: int,
) -> FittedFold:
    """Fit tokenizer, idf statistics and alignment map on the fold's training side."""
    P = cfg.tokenizer
    table = ws.pairs(data, P)
    fs = _sample_rate(data.dataset)
    L, _ = chunk_geometry(P.window_s, P.overlap, fs)
    spec = FeatureSpec.default(L, fs, P.views, P.wavelet, P.n_scales, P.stft_window)

    train_pairs = _pairs_for(fold.train_ids, data.index, fold.train_view, table)
    if not train_pairs:
        raise HarnessError("no training segment yields a chunk")
    train_ids = tuple(sorted({sid for sid, _ in train_pairs}))
    fp = fingerprint(train_ids)

    rows = table.stack_rows(train_pairs)
    keep = table.masks[rows].mean(axis=(1, 2)) <= P.max_missing
    fit_rows = rows[keep]
    stats, proj, H = ws.fold_features(data, P, spec, fit_rows)
    cb = fit_codebook(
        H[fit_rows], P.K, P.max_iters, derive_seed(seed, "codebook"),
        table.chunks[fit_rows], table.masks[fit_rows],
    )
    meta = {"n_fit_chunks": int(keep.sum()), "n_excluded_missing": int((~keep).sum())}
    tok = Tokenizer(P, fs, spec, stats, proj, cb, fp, meta)
    tokens = quantize_many(H, cb)

    seqs = {pair: [int(t) for t in tokens[table.rows[pair]]] for pair in train_pairs}
    idf = fit_idf(list(seqs.values()), P.K, sorted(data.dataset.positions), cfg.align.pooled, fp)

    by_seg: dict[str, dict[str, list[int]]] = {}
    for (sid, p), s in seqs.items():
        by_seg.setdefault(sid, {})[p] = s
    U, V = [], []
    for sid in train_ids:
        seg = data.index[sid]
        text = seg.text(cfg.align.gold)
        if not text:
            continue
        v = embed_text(text, cfg.align.text_dim)
        views = by_seg[sid]
        U.append(embed_segment(views, seg.duration_s, idf))
        V.append(v)
        for c in range(cfg.augment.copies if cfg.augment.enabled else 0):
            aug = {
                p: augment(s, cfg.augment, P.K, derive_seed(seed, "augment", sid, p, c))
                for p, s in views.items()
            }
            if any(aug.values()):
                U.append(embed_segment(aug, seg.duration_s, idf))
                V.append(v)
        if cfg.align.single_views and len(views) > 1:
            for p in sorted(views):
                U.append(embed_segment({p: views[p]}, seg.duration_s, idf))
                V.append(v)
        if cfg.align.subset_views and len(views) > 1:
            rng = np.random.default_rng(derive_seed(seed, "subsets", sid))
            names = sorted(views)
            for _ in range(cfg.align.subset_views):
                k = int(rng.integers(1, len(names)))
                sub = sorted(rng.choice(names, size=k, replace=False).tolist())
                U.append(embed_segment({p: views[p] for p in sub}, seg.duration_s, idf))
                V.append(v)
    if not U:
        raise HarnessError("no annotated training segment")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        amap = fit_alignment(np.array(U), np.array(V), cfg.align.lam, fp)
    fps = {"tokenizer": fp, "idf": idf.fingerprint, "alignment": amap.fingerprint}
    return FittedFold(tok, idf, amap, train_ids, tokens, fps)


# ---------------------------------------------------------------- fold evaluation


def _candidate_pool(
    golds: list[str], train_texts: list[str], size: int, seed: int
) -> list[str]:
    pool = list(dict.fromkeys(golds))
    extra = sorted(set(train_texts) - set(pool))
    need = size - len(pool)
    if need > 0 and extra:
        rng = np.random.default_rng(seed)
        pick = rng.choice(len(extra), size=min(need, len(extra)), replace=False)
        pool += [extra[i] for i in sorted(pick)]
    elif need > 0:
        log.warning("candidate pool holds only %d texts (< %d)", len(pool), size)
    return pool


def _text_classes(segs: Sequence[Segment], source: str) -> dict[str, str]:
    votes: dict[str, Counter] = {}
    for s in segs:
        t = s.text(source)
        if t and s.hard_class:
            votes.setdefault(normalize_text(t), Counter())[s.hard_class] += 1
    return {t: sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))[0][0] for t, c in votes.items()}


def evaluate_fold(
    ws: Workspace,
    data: LoadedData,
    cfg: ExperimentConfig,
    fold: Fold,
    fitted: FittedFold,
    seed: int,
) -> dict:
    P = cfg.tokenizer
    table = ws.pairs(data, P)
    tok, cb = fitted.tokenizer, fitted.tokenizer.codebook
    train_pairs = _pairs_for(fitted.train_ids, data.index, fold.train_view, table)
    test_pairs = _pairs_for(fold.test_ids, data.index, fold.test_view, table)
    if not test_pairs:
        raise HarnessError("no test segment yields a chunk")

    # representation metrics, pooled over test (segment, position) pairs
    abs_sum, n_obs, spec_vals, test_streams = 0.0, 0, [], {}
    stft_p = STFTParams.for_chunk(tok.spec.chunk_len, P.stft_window)
    for pair in test_pairs:
        toks = fitted.tokens[table.rows[pair]]
        test_streams[f"{pair[0]}/{pair[1]}"] = [int(t) for t in toks]
        grid = table.grids[pair]
        x = table.values[pair]
        x_hat = decode(toks, cb, grid)
        cov = grid.coverage()
        err = np.abs(x[cov] - x_hat[cov])
        ok = ~np.isnan(err)
        abs_sum += float(err[ok].sum())
        n_obs += int(ok.sum())
        span = int(grid.starts[-1]) + grid.chunk_len
        xs = np.where(np.isnan(x[:span]), x_hat[:span], x[:span])
        spec_vals.append(spectral_l1(xs, x_hat[:span], stft_p))
    train_tok = fitted.tokens[table.stack_rows(train_pairs)]
    test_tok = fitted.tokens[table.stack_rows(test_pairs)]
    js = js_divergence(token_histogram(train_tok, cb.K), token_histogram(test_tok, cb.K))

    # retrieval and closed-set classification
    src = cfg.align.gold
    by_seg: dict[str, dict[str, list[int]]] = {}
    for sid, p in test_pairs:
        by_seg.setdefault(sid, {})[p] = test_streams[f"{sid}/{p}"]
    queries = [sid for sid in fold.test_ids if sid in by_seg and data.index[sid].text(src)]
    n_skipped = len(fold.test_ids) - len(queries)
    if not queries:
        raise HarnessError("no annotated test segment yields a chunk")
    golds = [normalize_text(data.index[s].text(src)) for s in queries]
    train_texts = [
        normalize_text(data.index[s].text(src)) for s in fitted.train_ids if data.index[s].text(src)
    ]
    pool = _candidate_pool(golds, train_texts, cfg.align.pool_size, derive_seed(seed, "pool"))
    cls_of = _text_classes([data.index[s] for s in fitted.train_ids + tuple(queries)], src)
    pool_emb = embed_texts(pool, cfg.align.text_dim)
    class_emb = embed_texts(CLASS_NAMES, cfg.align.text_dim)

    presence: Counter = Counter()
    X = []
    for sid in queries:
        views = by_seg[sid]
        presence["+".join(sorted(views))] += 1
        X.append(embed_segment(views, data.index[sid].duration_s, fitted.idf))
    X = np.array(X)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        S = score_matrix(X, pool_emb, fitted.amap)
        rankings, relevant, grades, preds = [], [], [], []
        for i, sid in enumerate(queries):
            order = rank_scores(S[i])
            rankings.append([int(j) for j in order])
            gi = pool.index(golds[i])
            relevant.append({gi})
            hc = data.index[sid].hard_class
            g = {j: (2 if j == gi else 1 if hc and cls_of.get(t) == hc else 0) for j, t in enumerate(pool)}
            grades.append(g)
            preds.append(classify_closed_set(X[i], CLASS_NAMES, fitted.amap, class_emb))
        gold_cls = [data.index[s].hard_class or "other" for s in queries]
        metrics = {
            "time_l1": abs_sum / n_obs if n_obs else float("nan"),
            "spectral_l1": float(np.mean(spec_vals)),
            "js": js,
            "r@1": recall_at_k(rankings, relevant, 1),
            "r@5": recall_at_k(rankings, relevant, 5),
            "mrr": mrr(rankings, relevant),
            "ndcg@5": ndcg_at_k(rankings, grades, 5),
            "accuracy": accuracy(preds, gold_cls),
            "macro_f1": macro_f1(preds, gold_cls, CLASS_NAMES),
        }
    stream_blob = json.dumps(test_streams, sort_keys=True).encode()
    return {
        "metrics": metrics,
        "n_queries": len(queries),
        "n_skipped": n_skipped,
        "pool_size": len(pool),
        "test_presence": dict(sorted(presence.items())),
        "test_tokens_sha256": hashlib.sha256(stream_blob).hexdigest(),
        "test_streams": test_streams,
    }


# --------------------------------------------------------------------- experiment


def aggregate(values: Sequence[float]) -> tuple[float, float]:
    """Mean and population standard deviation (denominator N)."""
    v = np.asarray(list(values), dtype=float)
    if v.size == 0:
        raise ValueError("cannot aggregate an empty list")
    mean = float(v.mean())
    return mean, float(np.sqrt(np.mean((v - mean) ** 2)))


def run_experiment(
    cfg: ExperimentConfig, ws: Workspace | None = None, keep_streams: bool = False
) -> dict:
    """Run every split and repetition; return the report as a JSON-ready dict.

    Test token streams are kept in fold records only with ``keep_streams``.
    """
    ws = ws or Workspace()
    data = ws.data(cfg)
    folds_by_split = []
    for spec in cfg.splits:
        try:
            folds_by_split.append((spec, make_splits(data.dataset, spec)))
        except ValueError as exc:
            raise ConfigError(f"split {spec.label}: {exc}") from exc
    records = []
    for rep in range(cfg.repetitions):
        rseed = repetition_seed(cfg.seed, rep)
        for spec, folds in folds_by_split:
            for fold in folds:
                fseed = derive_seed(rseed, spec.label, fold.index)
                try:
                    fitted = fit_fold(ws, data, cfg, fold, fseed)
                    ev = evaluate_fold(ws, data, cfg, fold, fitted, fseed)
                except (HarnessError, ValueError) as exc:
                    raise HarnessError(
                        f"{spec.label} fold {fold.index} (held-out {fold.held_out_subject}), "
                        f"repetition {rep}: {exc}"
                    ) from exc
                streams = ev.pop("test_streams")
                rec = {
                    "repetition": rep,
                    "repetition_seed": rseed,
                    "split": spec.label,
                    "fold": fold.index,
                    "held_out_subject": fold.held_out_subject,
                    "train_ids": list(fitted.train_ids),
                    "test_ids": list(fold.test_ids),
                    "fingerprints": fitted.fingerprints,
                    "codebook": {
                        "iterations": fitted.tokenizer.codebook.iterations,
                        "reseeds": fitted.tokenizer.codebook.reseeds,
                        "final_distortion": fitted.tokenizer.codebook.final_distortion,
                        "n_fit_chunks": fitted.tokenizer.meta["n_fit_chunks"],
                    },
                    "alignment": {"min_norm": fitted.amap.min_norm, "residual": fitted.amap.residual},
                    **ev,
                }
                if keep_streams:
                    rec["test_streams"] = streams
                records.append(rec)
    return build_report(cfg, data, records)


def build_report(cfg: ExperimentConfig, data: LoadedData, records: list[dict]) -> dict:
    agg: dict[str, dict] = {}
    per_rep: dict[str, dict] = {}
    for label in dict.fromkeys(r["split"] for r in records):
        rs = [r for r in records if r["split"] == label]
        agg[label] = {}
        per_rep[label] = {}
        for m in METRICS:
            mean, std = aggregate([r["metrics"][m] for r in rs])
            agg[label][m] = {"mean": mean, "std": std, "n": len(rs)}
            per_rep[label][m] = [
                aggregate([r["metrics"][m] for r in rs if r["repetition"] == k])[0]
                for k in range(cfg.repetitions)
            ]
    snapshot = cfg.to_json()
    return {
        "format": "narrate-report",
        "version": 1,
        "std_denominator": "N",
        "metrics": list(METRICS),
        "config": snapshot,
        "provenance": {
            "package_version": __version__,
            "config_sha256": hashlib.sha256(json.dumps(snapshot, sort_keys=True).encode()).hexdigest(),
            "dataset_fingerprint": fingerprint(data.index),
        },
        "aggregate": agg,
        "repetition_means": per_rep,
        "folds": records,
    }


# ------------------------------------------------------------------------ output


def render_text(report: dict) -> str:
    """Plain-text table, one row per split with mean ± std per metric."""
    cols = report["metrics"]
    head = f"{'split':<34}" + "".join(f"{m:>18}" for m in cols)
    lines = [head, "-" * len(head)]
    for label, ms in report["aggregate"].items():
        cells = "".join(f"{ms[m]['mean']:>10.4f} ± {ms[m]['std']:<5.3f}" for m in cols)
        lines.append(f"{label:<34}{cells}")
    n = {label: ms[cols[0]]["n"] for label, ms in report["aggregate"].items()}
    lines.append("")
    lines.append("std uses denominator N over fold records; fold records per split: "
                 + ", ".join(f"{k}={v}" for k, v in n.items()))
    return "\n".join(lines) + "\n"


def dumps_report(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True) + "\n"


def write_report(report: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(dumps_report(report), encoding="utf-8")
    (out / "report.txt").write_text(render_text(report), encoding="utf-8")
    return out / "report.json"


# ------------------------------------------------------------------------- sweeps


def parse_axis_values(axis: str, values: Sequence[str] | str) -> list:
    if isinstance(values, str):
        values = [v for v in values.split(",") if v.strip()]
    if not values:
        raise ConfigError("empty value list")
    if axis not in SWEEP_AXES:
        raise ConfigError(f"unknown sweep axis {axis!r}; expected one of {SWEEP_AXES}")
    out = []
    for v in values:
        v = str(v).strip()
        try:
            if axis == "K":
                out.append(int(v))
            elif axis in ("window_s", "lam"):
                out.append(float(v))
            elif axis == "views":
                if v not in VIEW_PRESETS:
                    raise ConfigError(f"views value must be one of {sorted(VIEW_PRESETS)}")
                out.append(v)
            else:
                if v not in ("off", "on"):
                    raise ConfigError("augment values are 'off' and 'on'")
                out.append(v)
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad value {v!r} for axis {axis}") from None
    return out


def with_axis(cfg: ExperimentConfig, axis: str, value) -> ExperimentConfig:
    if axis == "K":
        return replace(cfg, tokenizer=replace(cfg.tokenizer, K=int(value)))
    if axis == "window_s":
        return replace(cfg, tokenizer=replace(cfg.tokenizer, window_s=float(value)))
    if axis == "views":
        return replace(cfg, tokenizer=replace(cfg.tokenizer, views=VIEW_PRESETS[value]))
    if axis == "augment":
        return replace(cfg, augment=replace(cfg.augment, enabled=value == "on"))
    if axis == "lam":
        return replace(cfg, align=replace(cfg.align, lam=float(value)))
    raise ConfigError(f"unknown sweep axis {axis!r}")


def trend_summary(axis: str, values: list, reports: list[dict], split: str | None = None) -> dict:
    label = split or next(iter(reports[0]["aggregate"]))
    out: dict[str, Any] = {"axis": axis, "values": values, "split": label, "metrics": {}}
    for m in METRICS:
        means = [r["aggregate"][label][m]["mean"] for r in reports]
        stds = [r["aggregate"][label][m]["std"] for r in reports]
        out["metrics"][m] = {
            "mean": means,
            "std": stds,
            "argmin": values[int(np.argmin(means))],
            "argmax": values[int(np.argmax(means))],
        }
    return out


def sweep(
    cfg: ExperimentConfig, axis: str, values: Sequence, ws: Workspace | None = None
) -> tuple[list[dict], dict]:
    """One report per axis value plus an argmin/argmax trend summary."""
    if not values:
        raise ConfigError("empty value list")
    values = parse_axis_values(axis, [str(v) for v in values])
    ws = ws or Workspace()
    reports = [run_experiment(with_axis(cfg, axis, v), ws) for v in values]
    return reports, trend_summary(axis, values, reports)


def write_sweep(reports: list[dict], trend: dict, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for v, rep in zip(trend["values"], reports):
        write_report(rep, out / f"{trend['axis']}={v}")
    path = out / "trend.json"
    path.write_text(json.dumps(trend, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
