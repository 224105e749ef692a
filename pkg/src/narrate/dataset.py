"""Data model for multi-position, missingness-aware annotated IMU recordings.

On-disk layout (one directory per dataset)::

    manifest.json                 sessions, subjects, positions, rates, paths
    <session>/<position>.csv      t,ax,ay,az,lax,lay,laz,gx,gy,gz,mask
    <session>/segments.jsonl      one Segment per line

Missing samples are written as empty fields with ``mask=1`` and are held in
memory as NaN together with an explicit boolean mask. Nothing is imputed.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

CHANNELS = ("ax", "ay", "az", "lax", "lay", "laz", "gx", "gy", "gz")
N_CHANNELS = len(CHANNELS)
CSV_HEADER = ("t",) + CHANNELS + ("mask",)

POSITIONS = (
    "head",
    "chest",
    "upper_back",
    "lower_back",
    "pelvis",
    "upper_arm_l",
    "upper_arm_r",
    "wrist_l",
    "wrist_r",
    "thigh_l",
    "thigh_r",
    "shin_l",
    "shin_r",
    "foot_l",
    "foot_r",
)

ANNOTATION_SOURCES = ("expert", "narration", "vlm")

MANIFEST_NAME = "manifest.json"
FORMAT_TAG = "narrate-dataset"
FORMAT_VERSION = 1


def _load_taxonomy() -> tuple[str, ...]:
    text = resources.files("narrate").joinpath("data/taxonomy_v1.txt").read_text("utf-8")
    names = [ln.strip() for ln in text.splitlines()]
    return tuple(n for n in names if n and not n.startswith("#"))


CLASS_NAMES: tuple[str, ...] = _load_taxonomy()
assert len(CLASS_NAMES) == 23 and CLASS_NAMES[-1] == "other"


class DatasetError(ValueError):
    """Base class for malformed dataset content."""


class ManifestError(DatasetError):
    pass


class ShapeMismatchError(DatasetError):
    pass


class UnknownPositionError(DatasetError):
    pass


class TimestampError(DatasetError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SensorStream:
    """One body position's 9-channel signal.

    ``channels`` is T x C with NaN wherever ``mask`` is true; ``mask`` has the
    same T x C shape.
    """

    position_id: str
    sample_rate_hz: float
    timestamps: np.ndarray
    channels: np.ndarray
    mask: np.ndarray

    def __post_init__(self) -> None:
        if self.position_id not in POSITIONS:
            raise UnknownPositionError(f"unknown position id {self.position_id!r}")
        if not self.sample_rate_hz > 0:
            raise DatasetError(f"sample rate must be positive, got {self.sample_rate_hz}")
        ts = np.asarray(self.timestamps, dtype=np.float64)
        ch = np.asarray(self.channels, dtype=np.float64)
        mk = np.asarray(self.mask, dtype=bool)
        if ch.ndim != 2 or ch.shape[1] != N_CHANNELS:
            raise ShapeMismatchError(f"channels must be T x {N_CHANNELS}, got {ch.shape}")
        if mk.shape != ch.shape:
            raise ShapeMismatchError(f"mask shape {mk.shape} differs from channel shape {ch.shape}")
        if ts.shape != (ch.shape[0],):
            raise ShapeMismatchError(f"{ts.shape[0]} timestamps for {ch.shape[0]} samples")
        if ch.shape[0] < 1:
            raise ShapeMismatchError("stream has no samples")
        if np.any(np.diff(ts) <= 0):
            raise TimestampError(f"{self.position_id}: timestamps not strictly increasing")
        if np.any(np.isnan(ch) != mk):
            raise ShapeMismatchError(f"{self.position_id}: NaN pattern disagrees with mask")
        if not np.all(np.isfinite(ch[~mk])):
            raise DatasetError(f"{self.position_id}: non-finite unmasked samples")
        object.__setattr__(self, "timestamps", _frozen(ts.copy()))
        object.__setattr__(self, "channels", _frozen(ch.copy()))
        object.__setattr__(self, "mask", _frozen(mk.copy()))

    def __len__(self) -> int:
        return self.channels.shape[0]

    @property
    def t_start(self) -> float:
        return float(self.timestamps[0])

    @property
    def t_end(self) -> float:
        """Exclusive end: one sample period after the last timestamp."""
        return float(self.timestamps[-1]) + 1.0 / self.sample_rate_hz

    def index_range(self, start_s: float, end_s: float) -> tuple[int, int]:
        """Half-open sample index range covering ``[start_s, end_s)``.

        Boundaries snap to the nearest sample within half a sample period so
        that timestamps rounded on disk select the same samples.
        """
        half = 0.5 / self.sample_rate_hz
        i0 = int(np.searchsorted(self.timestamps, start_s - half, side="left"))
        i1 = int(np.searchsorted(self.timestamps, end_s - half, side="left"))
        return i0, max(i0, i1)

    def missing_rate(self) -> float:
        return float(self.mask.any(axis=1).mean())


@dataclass(frozen=True)
class Segment:
    """An annotated interval. Not validated on construction; see ``validate``."""

    segment_id: str
    session_id: str
    subject_id: str
    start_s: float
    end_s: float
    positions: frozenset[str]
    narration: str | None = None
    expert_soft: str | None = None
    hard_class: str | None = None
    annotation_source: str = "narration"

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def text(self, source: str = "narration") -> str | None:
        """Annotation text for ``source`` ('narration' or 'expert_soft')."""
        return self.narration if source == "narration" else self.expert_soft

    def to_json(self) -> dict:
        return {
            "segment_id": self.segment_id,
            "session_id": self.session_id,
            "subject_id": self.subject_id,
            "start_s": self.start_s,
            "end_s": self.end_s,
            "positions": sorted(self.positions),
            "narration": self.narration,
            "expert_soft": self.expert_soft,
            "hard_class": self.hard_class,
            "annotation_source": self.annotation_source,
        }

    @classmethod
    def from_json(cls, rec: Mapping) -> "Segment":
        try:
            return cls(
                segment_id=str(rec["segment_id"]),
                session_id=str(rec["session_id"]),
                subject_id=str(rec["subject_id"]),
                start_s=float(rec["start_s"]),
                end_s=float(rec["end_s"]),
                positions=frozenset(rec["positions"]),
                narration=rec.get("narration"),
                expert_soft=rec.get("expert_soft"),
                hard_class=rec.get("hard_class"),
                annotation_source=rec.get("annotation_source", "narration"),
            )
        except KeyError as exc:
            raise DatasetError(f"segment record missing field {exc.args[0]!r}") from None


@dataclass(frozen=True)
class Session:
    session_id: str
    subject_id: str
    streams: Mapping[str, SensorStream]
    segments: tuple[Segment, ...]

    @property
    def positions(self) -> frozenset[str]:
        return frozenset(self.streams)


@dataclass(frozen=True)
class Dataset:
    sessions: tuple[Session, ...] = ()
    warnings: tuple[str, ...] = ()

    @property
    def subjects(self) -> list[str]:
        return sorted({s.subject_id for s in self.sessions})

    @property
    def positions(self) -> frozenset[str]:
        out: set[str] = set()
        for s in self.sessions:
            out |= s.positions
        return frozenset(out)

    def segments(self) -> list[Segment]:
        return [seg for s in self.sessions for seg in s.segments]

    def segment_index(self) -> dict[str, Segment]:
        return {seg.segment_id: seg for seg in self.segments()}

    def session(self, session_id: str) -> Session:
        for s in self.sessions:
            if s.session_id == session_id:
                return s
        raise KeyError(session_id)


@dataclass
class ValidationReport:
    n_sessions: int = 0
    n_segments: int = 0
    n_positions: int = 0
    violations: list[str] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {
            "n_sessions": self.n_sessions,
            "n_segments": self.n_segments,
            "n_positions": self.n_positions,
            "violations": list(self.violations),
            "warnings": list(self.warnings),
        }


def validate(d: Dataset) -> ValidationReport:
    """Check every dataset-level invariant and report violations by id."""
    rep = ValidationReport(
        n_sessions=len(d.sessions),
        n_segments=sum(len(s.segments) for s in d.sessions),
        n_positions=len(d.positions),
        warnings=list(d.warnings),
    )
    v = rep.violations
    seen_sessions: set[str] = set()
    seen_segments: set[str] = set()
    for sess in d.sessions:
        if sess.session_id in seen_sessions:
            v.append(f"session {sess.session_id}: duplicate session id")
        seen_sessions.add(sess.session_id)
        if not sess.streams:
            v.append(f"session {sess.session_id}: no streams")
        for pos, st in sess.streams.items():
            if pos != st.position_id:
                v.append(f"session {sess.session_id}: stream keyed {pos} holds {st.position_id}")
        for seg in sess.segments:
            sid = seg.segment_id
            if sid in seen_segments:
                v.append(f"segment {sid}: duplicate segment id")
            seen_segments.add(sid)
            if seg.session_id != sess.session_id:
                v.append(f"segment {sid}: session_id {seg.session_id} != {sess.session_id}")
            if seg.subject_id != sess.subject_id:
                v.append(f"segment {sid}: subject_id {seg.subject_id} != {sess.subject_id}")
            if not seg.end_s > seg.start_s:
                v.append(f"segment {sid}: interval end {seg.end_s} <= start {seg.start_s}")
            if not seg.positions:
                v.append(f"segment {sid}: empty position set")
            for pos in sorted(seg.positions):
                st = sess.streams.get(pos)
                if st is None:
                    v.append(f"segment {sid}: position {pos} absent from session {sess.session_id}")
                    continue
                tol = 0.5 / st.sample_rate_hz
                if seg.start_s < st.t_start - tol or seg.end_s > st.t_end + tol:
                    v.append(f"segment {sid}: interval outside {pos} stream bounds")
            if seg.narration is None and seg.expert_soft is None and seg.hard_class is None:
                v.append(f"segment {sid}: no annotation present")
            if seg.hard_class is not None and seg.hard_class not in CLASS_NAMES:
                v.append(f"segment {sid}: hard_class {seg.hard_class!r} not in taxonomy")
            if seg.annotation_source not in ANNOTATION_SOURCES:
                v.append(f"segment {sid}: annotation_source {seg.annotation_source!r} invalid")
    return rep


# --------------------------------------------------------------------------- I/O


def _fmt(v: float) -> str:
    return format(v, ".6g")


def write_stream_csv(stream: SensorStream, path: Path) -> None:
    buf = io.StringIO()
    buf.write(",".join(CSV_HEADER) + "\n")
    ts, ch, mk = stream.timestamps, stream.channels, stream.mask
    row_missing = mk.any(axis=1)
    for i in range(len(ts)):
        if row_missing[i]:
            vals = ["" if mk[i, c] else _fmt(ch[i, c]) for c in range(N_CHANNELS)]
        else:
            vals = [_fmt(x) for x in ch[i].tolist()]
        buf.write(_fmt(ts[i]) + "," + ",".join(vals) + ("," + ("1" if row_missing[i] else "0")) + "\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


def read_stream_csv(
    path: Path, position_id: str, sample_rate_hz: float
) -> tuple[SensorStream, list[str]]:
    """Parse one stream table; returns the stream and any dedup warnings."""
    warnings: list[str] = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != CSV_HEADER:
            raise ShapeMismatchError(f"{path}: bad header {header}")
        ts: list[float] = []
        rows: list[list[float]] = []
        masks: list[list[bool]] = []
        nan = float("nan")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(CSV_HEADER):
                raise ShapeMismatchError(
                    f"{path}:{lineno}: expected {len(CSV_HEADER)} fields, got {len(row)}"
                )
            try:
                t = float(row[0])
                vals = [nan if f == "" else float(f) for f in row[1:-1]]
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: {exc}") from None
            m = [f == "" for f in row[1:-1]]
            flag = row[-1]
            if flag not in ("0", "1") or (flag == "1") != any(m):
                raise ShapeMismatchError(f"{path}:{lineno}: mask column disagrees with channel fields")
            if ts and t <= ts[-1]:
                if t == ts[-1]:
                    warnings.append(f"{path}:{lineno}: duplicate timestamp {row[0]} dropped")
                    continue
                raise TimestampError(f"{path}:{lineno}: timestamp {t} decreases")
            ts.append(t)
            rows.append(vals)
            masks.append(m)
    if not ts:
        raise ShapeMismatchError(f"{path}: no samples")
    stream = SensorStream(
        position_id=position_id,
        sample_rate_hz=sample_rate_hz,
        timestamps=np.array(ts),
        channels=np.array(rows, dtype=np.float64),
        mask=np.array(masks, dtype=bool),
    )
    return stream, warnings


def _read_segments(path: Path) -> list[Segment]:
    out = []
    for lineno, line in enumerate(path.read_text("utf-8").splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise DatasetError(f"{path}:{lineno}: {exc}") from None
        out.append(Segment.from_json(rec))
    return out


def write_segments(segments: Iterable[Segment], path: Path) -> None:
    lines = [json.dumps(seg.to_json(), ensure_ascii=False) for seg in segments]
    path.write_text("".join(ln + "\n" for ln in lines), encoding="utf-8")


def load_dataset(root_path: str | Path) -> Dataset:
    """Load and validate a dataset directory (manifest + per-session files)."""
    root = Path(root_path)
    mpath = root / MANIFEST_NAME
    if not mpath.is_file():
        raise ManifestError(f"{mpath}: manifest not found")
    try:
        manifest = json.loads(mpath.read_text("utf-8"))
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{mpath}: {exc}") from None
    if not isinstance(manifest, dict) or not isinstance(manifest.get("sessions"), list):
        raise ManifestError(f"{mpath}: expected an object with a 'sessions' list")
    sessions = []
    warnings: list[str] = []
    for entry in manifest["sessions"]:
        try:
            session_id = str(entry["session_id"])
            subject_id = str(entry["subject_id"])
            stream_entries = entry["streams"]
            seg_rel = entry["segments"]
        except (KeyError, TypeError) as exc:
            raise ManifestError(f"{mpath}: malformed session entry ({exc})") from None
        streams: dict[str, SensorStream] = {}
        for se in stream_entries:
            try:
                pos = str(se["position_id"])
                fs = float(se["sample_rate_hz"])
                rel = se["path"]
            except (KeyError, TypeError, ValueError) as exc:
                raise ManifestError(f"{mpath}: malformed stream entry ({exc})") from None
            if pos not in POSITIONS:
                raise UnknownPositionError(f"{mpath}: session {session_id}: unknown position id {pos!r}")
            if pos in streams:
                raise ManifestError(f"{mpath}: session {session_id}: duplicate position {pos}")
            stream, w = read_stream_csv(root / rel, pos, fs)
            streams[pos] = stream
            warnings.extend(w)
        segments = tuple(_read_segments(root / seg_rel))
        sessions.append(Session(session_id, subject_id, streams, segments))
    return Dataset(sessions=tuple(sessions), warnings=tuple(warnings))


def write_dataset(d: Dataset, root_path: str | Path) -> Path:
    """Write ``d`` in the on-disk format; returns the manifest path."""
    root = Path(root_path)
    root.mkdir(parents=True, exist_ok=True)
    entries = []
    for sess in d.sessions:
        sdir = root / sess.session_id
        sdir.mkdir(exist_ok=True)
        stream_entries = []
        for pos in sorted(sess.streams, key=POSITIONS.index):
            st = sess.streams[pos]
            rel = f"{sess.session_id}/{pos}.csv"
            write_stream_csv(st, root / rel)
            stream_entries.append(
                {"position_id": pos, "sample_rate_hz": st.sample_rate_hz, "path": rel}
            )
        seg_rel = f"{sess.session_id}/segments.jsonl"
        write_segments(sess.segments, root / seg_rel)
        entries.append(
            {
                "session_id": sess.session_id,
                "subject_id": sess.subject_id,
                "streams": stream_entries,
                "segments": seg_rel,
            }
        )
    manifest = {"format": FORMAT_TAG, "version": FORMAT_VERSION, "sessions": entries}
    mpath = root / MANIFEST_NAME
    mpath.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return mpath


def segment_slice(
    d_or_session: Dataset | Session, seg: Segment, position: str
) -> tuple[np.ndarray, np.ndarray]:
    """Channels and mask of ``seg`` at ``position`` (views, not copies)."""
    sess = d_or_session if isinstance(d_or_session, Session) else d_or_session.session(seg.session_id)
    st = sess.streams[position]
    i0, i1 = st.index_range(seg.start_s, seg.end_s)
    return st.channels[i0:i1], st.mask[i0:i1]


def positions_vector(positions: Sequence[str] | frozenset[str]) -> np.ndarray:
    """Length-15 presence indicator over the canonical position order."""
    v = np.zeros(len(POSITIONS))
    for p in positions:
        v[POSITIONS.index(p)] = 1.0
    return v
