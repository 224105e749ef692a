"""Synthetic compositional-motion corpus with known ground truth.

Each segment is a sequence of micro-action primitives. A primitive is a 1-D
waveform (burst, impulse train, ramp, damped oscillation or rest) mixed into
the 9 channels by a per-position weight vector; positions share a common
direction per primitive so that they are correlated. Subjects differ by an
amplitude scale and a time warp (durations stretch, frequencies shrink).

Descriptions come from a fixed grammar, ``"<phrase> then <phrase> ..."``,
where each primitive has one canonical phrase and a few synonyms.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import (
    CLASS_NAMES,
    N_CHANNELS,
    Dataset,
    Segment,
    SensorStream,
    Session,
    write_dataset,
)
from .seeding import derive_seed

GENERATOR_KINDS = ("sinusoid_burst", "impulse_train", "ramp", "damped_oscillation", "rest")

# Canonical placement order used when a corpus has fewer than 15 positions.
SYNTH_POSITION_ORDER = (
    "wrist_r",
    "thigh_l",
    "head",
    "wrist_l",
    "chest",
    "thigh_r",
    "pelvis",
    "upper_arm_r",
    "upper_arm_l",
    "shin_r",
    "shin_l",
    "foot_r",
    "foot_l",
    "upper_back",
    "lower_back",
)

# (family, generator kind, frequency Hz, amplitude, (min_s, max_s), phrases).
# The first phrase is canonical; the rest form the synonym table.
ACTION_TABLE = (
    ("walk", "sinusoid_burst", 1.8, 1.0, (2.0, 4.0), ("walk forward", "take steps ahead", "stroll along")),
    ("jump", "impulse_train", 1.3, 2.2, (1.5, 3.0), ("jump repeatedly", "hop up and down", "do small jumps")),
    ("bend", "ramp", 0.0, 1.2, (1.5, 3.0), ("bend down", "lean over forward", "stoop toward the floor")),
    ("squat", "damped_oscillation", 0.9, 1.8, (2.0, 3.5), ("squat low", "crouch down", "drop into a squat")),
    ("sit", "rest", 0.0, 0.0, (2.0, 4.0), ("sit still", "remain seated", "rest quietly")),
    ("run", "sinusoid_burst", 3.2, 1.6, (2.0, 4.0), ("run in place", "jog on the spot", "sprint briefly")),
    ("push", "impulse_train", 0.7, 1.4, (2.0, 3.5), ("push the cart", "shove something away", "press forward hard")),
    ("row", "damped_oscillation", 2.4, 1.3, (2.0, 3.5), ("row the handle", "pull rowing strokes", "do a rowing motion")),
    ("dance", "sinusoid_burst", 2.5, 1.1, (2.0, 4.0), ("dance around", "sway to music", "move rhythmically")),
    ("lift", "ramp", 0.0, -1.5, (1.5, 3.0), ("lift the box", "raise a load up", "hoist an object")),
    ("stretch", "damped_oscillation", 0.5, 1.0, (2.5, 4.0), ("stretch the arms", "reach overhead slowly", "extend the limbs")),
    ("drink", "impulse_train", 0.4, 0.8, (2.0, 4.0), ("drink from a cup", "sip a beverage", "take a drink")),
)
MAX_PRIMITIVES = len(ACTION_TABLE)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Primitive:
    primitive_id: str
    family: str
    generator_kind: str
    frequency_hz: float
    amplitude: float
    duration_range: tuple[float, float]
    mixing: dict[str, tuple[float, ...]]
    phrases: tuple[str, ...]

    def __post_init__(self) -> None:
        lo, hi = self.duration_range
        if not 0 < lo <= hi:
            raise ConfigError(f"{self.primitive_id}: bad duration range {self.duration_range}")
        if self.generator_kind not in GENERATOR_KINDS:
            raise ConfigError(f"{self.primitive_id}: unknown generator kind {self.generator_kind}")
        ws = np.array(list(self.mixing.values()), dtype=float)
        if ws.size and not np.all(np.isfinite(ws)):
            raise ConfigError(f"{self.primitive_id}: non-finite mixing weights")
        if self.generator_kind != "rest" and ws.size and not np.any(ws != 0):
            raise ConfigError(f"{self.primitive_id}: all mixing weights are zero")

    @property
    def canonical_phrase(self) -> str:
        return self.phrases[0]


@dataclass(frozen=True)
class SubjectStyle:
    amplitude_scale: float = 1.0
    time_warp: float = 1.0
    noise_std: float = 0.0
    # per-channel timing offset in seconds (inter-joint coordination differs by person)
    channel_lag_s: tuple[float, ...] = ()


@dataclass(frozen=True)
class CorpusConfig:
    n_subjects: int = 8
    n_positions: int = 5
    n_primitives: int = 8
    segments_per_subject: int = 16
    sample_rate_hz: float = 30.0
    missing_rate: float = 0.07
    amplitude_scale_range: tuple[float, float] = (0.75, 1.3)
    time_warp_range: tuple[float, float] = (0.85, 1.15)
    max_channel_lag_s: float = 0.3
    noise_std: float = 0.05
    max_primitives_per_segment: int = 3
    gap_range_s: tuple[float, float] = (0.5, 1.5)
    position_spread: float = 0.6
    synonym_rate: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("n_subjects", "n_positions", "n_primitives", "segments_per_subject",
                     "max_primitives_per_segment"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.n_positions > len(SYNTH_POSITION_ORDER):
            raise ConfigError(f"n_positions must be <= {len(SYNTH_POSITION_ORDER)}")
        if self.n_primitives > MAX_PRIMITIVES:
            raise ConfigError(f"n_primitives must be <= {MAX_PRIMITIVES}")
        if not 0 <= self.missing_rate < 0.5:
            raise ConfigError("missing_rate must lie in [0, 0.5)")
        if not self.sample_rate_hz > 0:
            raise ConfigError("sample_rate_hz must be positive")
        lo, hi = self.amplitude_scale_range
        if not 0 < lo <= hi:
            raise ConfigError("bad amplitude_scale_range")
        lo, hi = self.time_warp_range
        if not 0 < lo <= hi:
            raise ConfigError("bad time_warp_range")
        if self.noise_std < 0:
            raise ConfigError("noise_std must be >= 0")
        if self.max_channel_lag_s < 0:
            raise ConfigError("max_channel_lag_s must be >= 0")

    @classmethod
    def from_json(cls, rec: dict) -> "CorpusConfig":
        unknown = set(rec) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown corpus config fields: {sorted(unknown)}")
        rec = dict(rec)
        for k in ("amplitude_scale_range", "time_warp_range", "gap_range_s"):
            if k in rec:
                rec[k] = tuple(rec[k])
        return cls(**rec)

    def to_json(self) -> dict:
        return asdict(self)

    @property
    def positions(self) -> tuple[str, ...]:
        return SYNTH_POSITION_ORDER[: self.n_positions]


@dataclass(frozen=True)
class GroundTruthRecord:
    segment_id: str
    primitive_ids: tuple[str, ...]
    boundaries_s: tuple[float, ...]  # len(primitive_ids) + 1, absolute session time
    description: str
    hard_class: str

    def to_json(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "primitive_ids": list(self.primitive_ids),
            "boundaries_s": list(self.boundaries_s),
            "description": self.description,
            "hard_class": self.hard_class,
        }


@dataclass(frozen=True)
class GroundTruth:
    records: tuple[GroundTruthRecord, ...]
    primitives: tuple[Primitive, ...] = field(default=())

    def by_segment(self) -> dict[str, GroundTruthRecord]:
        return {r.segment_id: r for r in self.records}

    def write(self, path: Path) -> None:
        lines = [json.dumps(r.to_json()) for r in self.records]
        Path(path).write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")


# --------------------------------------------------------------------- primitives


def make_primitives(cfg: CorpusConfig) -> tuple[Primitive, ...]:
    """Primitive library; mixing weights share one direction across positions."""
    rng = np.random.default_rng(derive_seed(cfg.seed, "primitives"))
    # per-position gain: some placements move more than others
    gains = {p: float(rng.uniform(0.6, 1.4)) for p in cfg.positions}
    prims = []
    for i in range(cfg.n_primitives):
        family, kind, freq, amp, dur, phrases = ACTION_TABLE[i]
        base = rng.normal(size=N_CHANNELS)
        base /= np.linalg.norm(base)
        mixing = {}
        for p in cfg.positions:
            w = base + cfg.position_spread * rng.normal(size=N_CHANNELS) / np.sqrt(N_CHANNELS)
            w = gains[p] * w / np.linalg.norm(w)
            mixing[p] = tuple(float(x) for x in w)
        prims.append(Primitive(f"p{i:02d}", family, kind, freq, amp, dur, mixing, phrases))
    return tuple(prims)


def _waveform(p: Primitive, t: np.ndarray, dur: float, warp: float, rng: np.random.Generator) -> np.ndarray:
    """Unit-amplitude waveform evaluated elementwise at times ``t`` (seconds)."""
    f = p.frequency_hz / warp
    kind = p.generator_kind
    if kind == "rest":
        return np.zeros(t.shape)
    if kind == "sinusoid_burst":
        phase = rng.uniform(0, 2 * np.pi)
        ramp = np.minimum(1.0, np.minimum(t, dur - t) / min(0.25, dur / 4) + 1e-12)
        return np.sin(2 * np.pi * f * t + phase) * np.clip(ramp, 0.0, 1.0)
    if kind == "impulse_train":
        period = 1.0 / f
        shift = rng.uniform(0, period)
        width = 0.06 * warp
        phase_t = np.mod(t - shift, period)
        dist = np.minimum(phase_t, period - phase_t)
        return np.exp(-0.5 * (dist / width) ** 2)
    if kind == "ramp":
        u = t / dur
        return np.sin(np.pi * u) ** 2 * (2 * u - 1)
    if kind == "damped_oscillation":
        phase = rng.uniform(0, 2 * np.pi)
        tau = max(dur / 3.0, 1e-3)
        return np.exp(-t / tau) * np.sin(2 * np.pi * f * t + phase)
    raise ConfigError(f"unknown generator kind {kind}")


def render_primitive(
    p: Primitive,
    duration_s: float,
    style: SubjectStyle,
    position_id: str,
    seed: int,
    sample_rate_hz: float = 30.0,
) -> np.ndarray:
    """Render ``p`` at one position as a T x C matrix, T = round(duration * fs).

    The admissible duration range is the primitive's range stretched by the
    subject's time warp (one sample period of slack).
    """
    lo, hi = p.duration_range
    w = style.time_warp
    slack = 1.0 / sample_rate_hz
    if not (lo * w - slack <= duration_s <= hi * w + slack):
        raise ValueError(
            f"{p.primitive_id}: duration {duration_s:.3f}s outside warped range "
            f"[{lo * w:.3f}, {hi * w:.3f}]"
        )
    if position_id not in p.mixing:
        raise ValueError(f"{p.primitive_id}: no mixing weights for position {position_id}")
    n = int(round(duration_s * sample_rate_hz))
    rng = np.random.default_rng(seed)
    t = np.arange(n) / sample_rate_hz
    lag = np.asarray(style.channel_lag_s, dtype=float)
    if lag.size and np.any(lag != 0):
        wave = _waveform(p, t[:, None] - lag[None, :], n / sample_rate_hz, w, rng)
    else:
        wave = _waveform(p, t, n / sample_rate_hz, w, rng)[:, None]
    out = p.amplitude * style.amplitude_scale * wave * np.asarray(p.mixing[position_id])[None, :]
    if style.noise_std > 0:
        out = out + style.noise_std * rng.normal(size=out.shape)
    return out


# -------------------------------------------------------------------- descriptions


def describe(primitives: Sequence[Primitive], rng: np.random.Generator | None = None,
             synonym_rate: float = 0.0) -> str:
    """Join primitive phrases with ' then '; synonyms substituted at ``synonym_rate``."""
    phrases = []
    for p in primitives:
        if rng is not None and synonym_rate > 0 and rng.random() < synonym_rate:
            phrases.append(p.phrases[1 + int(rng.integers(len(p.phrases) - 1))])
        else:
            phrases.append(p.canonical_phrase)
    return " then ".join(phrases)


def parse_description(text: str, primitives: Sequence[Primitive]) -> tuple[str, ...]:
    """Inverse of ``describe``: primitive ids named by ``text`` (any synonym)."""
    lookup = {ph: p.primitive_id for p in primitives for ph in p.phrases}
    ids = []
    for part in text.split(" then "):
        if part not in lookup:
            raise ValueError(f"unrecognized phrase {part!r}")
        ids.append(lookup[part])
    return tuple(ids)


# ---------------------------------------------------------------------- generation


def subject_style(cfg: CorpusConfig, index: int) -> SubjectStyle:
    rng = np.random.default_rng(derive_seed(cfg.seed, "subject", index))
    return SubjectStyle(
        amplitude_scale=float(rng.uniform(*cfg.amplitude_scale_range)),
        time_warp=float(rng.uniform(*cfg.time_warp_range)),
        noise_std=cfg.noise_std,
        channel_lag_s=tuple(float(x) for x in rng.uniform(0.0, cfg.max_channel_lag_s, N_CHANNELS))
        if cfg.max_channel_lag_s > 0 else (),
    )


def _generate_session(cfg: CorpusConfig, prims: tuple[Primitive, ...], index: int):
    fs = cfg.sample_rate_hz
    rng = np.random.default_rng(derive_seed(cfg.seed, "session", index))
    style = subject_style(cfg, index)
    subject_id = f"subj{index:02d}"
    session_id = f"sess{index:02d}"
    positions = cfg.positions

    # lay out segments on the sample grid
    plan = []  # (start_sample, [(prim, n_samples)], gap_before)
    cursor = int(round(rng.uniform(*cfg.gap_range_s) * fs))
    for _ in range(cfg.segments_per_subject):
        n_prims = int(rng.integers(1, cfg.max_primitives_per_segment + 1))
        seq: list[Primitive] = []
        for _ in range(n_prims):
            choices = [p for p in prims if not seq or p.primitive_id != seq[-1].primitive_id]
            seq.append(choices[int(rng.integers(len(choices)))])
        parts = []
        for p in seq:
            lo, hi = p.duration_range
            n = int(round(rng.uniform(lo, hi) * style.time_warp * fs))
            parts.append((p, n))
        plan.append((cursor, parts))
        cursor += sum(n for _, n in parts)
        cursor += int(round(rng.uniform(*cfg.gap_range_s) * fs))
    total = cursor
    signals = {pos: np.zeros((total, N_CHANNELS)) for pos in positions}

    segments = []
    records = []
    for k, (start, parts) in enumerate(plan):
        seg_id = f"{session_id}_seg{k:03d}"
        s = start
        bounds = [start / fs]
        for j, (p, n) in enumerate(parts):
            for pos in positions:
                seed = derive_seed(cfg.seed, "render", index, k, j, pos)
                signals[pos][s : s + n] = render_primitive(p, n / fs, style, pos, seed, fs)
            s += n
            bounds.append(s / fs)
        seq = [p for p, _ in parts]
        # hard class: family of the longest primitive (earliest on ties)
        longest = max(range(len(parts)), key=lambda j: (parts[j][1], -j))
        hard = seq[longest].family
        canonical = describe(seq)
        narration = describe(seq, rng, cfg.synonym_rate)
        segments.append(
            Segment(
                segment_id=seg_id,
                session_id=session_id,
                subject_id=subject_id,
                start_s=start / fs,
                end_s=s / fs,
                positions=frozenset(positions),
                narration=narration,
                expert_soft=canonical,
                hard_class=hard,
                annotation_source="narration",
            )
        )
        records.append(
            GroundTruthRecord(seg_id, tuple(p.primitive_id for p in seq), tuple(bounds), canonical, hard)
        )

    # background noise between segments, then missingness
    noise_rng = np.random.default_rng(derive_seed(cfg.seed, "background", index))
    busy = np.zeros(total, dtype=bool)
    for start, parts in plan:
        busy[start : start + sum(n for _, n in parts)] = True
    streams = {}
    ts = np.arange(total) / fs
    for pos in positions:
        x = signals[pos]
        if cfg.noise_std > 0:
            x[~busy] += cfg.noise_std * noise_rng.normal(size=((~busy).sum(), N_CHANNELS))
        miss_rng = np.random.default_rng(derive_seed(cfg.seed, "missing", index, pos))
        rows = miss_rng.random(total) < cfg.missing_rate
        mask = np.repeat(rows[:, None], N_CHANNELS, axis=1)
        x[mask] = np.nan
        streams[pos] = SensorStream(pos, fs, ts, x, mask)
    return Session(session_id, subject_id, streams, tuple(segments)), records


def generate_corpus(cfg: CorpusConfig) -> tuple[Dataset, GroundTruth]:
    prims = make_primitives(cfg)
    sessions = []
    records: list[GroundTruthRecord] = []
    for i in range(cfg.n_subjects):
        sess, recs = _generate_session(cfg, prims, i)
        sessions.append(sess)
        records.extend(recs)
    return Dataset(tuple(sessions)), GroundTruth(tuple(records), prims)


def write_corpus(d: Dataset, gt: GroundTruth, root: str | Path, cfg: CorpusConfig | None = None) -> Path:
    root = Path(root)
    mpath = write_dataset(d, root)
    gt.write(root / "ground_truth.jsonl")
    if cfg is not None:
        (root / "corpus_config.json").write_text(json.dumps(cfg.to_json(), indent=2) + "\n", "utf-8")
    return mpath


assert all(fam in CLASS_NAMES for fam, *_ in ACTION_TABLE)
