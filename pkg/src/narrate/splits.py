"""Cross-subject (XS), cross-subject-and-position (XSP) and missing-sensor (MS) folds."""

from __future__ import annotations

from dataclasses import dataclass, field

from .dataset import Dataset, Segment

MODES = ("XS", "XSP", "MS")


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class SplitSpec:
    mode: str = "XS"
    held_out_subject: str | None = None
    held_out_positions: frozenset[str] = frozenset()
    inference_positions: frozenset[str] = frozenset()
    # MS only: also restrict training to the inference positions (subset-trained reference)
    train_on_inference_positions: bool = False

    @classmethod
    def from_json(cls, rec: dict) -> "SplitSpec":
        return cls(
            mode=rec.get("mode", "XS"),
            held_out_subject=rec.get("held_out_subject"),
            held_out_positions=frozenset(rec.get("held_out_positions", ())),
            inference_positions=frozenset(rec.get("inference_positions", ())),
            train_on_inference_positions=bool(rec.get("train_on_inference_positions", False)),
        )

    def to_json(self) -> dict:
        return {
            "mode": self.mode,
            "held_out_subject": self.held_out_subject,
            "held_out_positions": sorted(self.held_out_positions),
            "inference_positions": sorted(self.inference_positions),
            "train_on_inference_positions": self.train_on_inference_positions,
        }

    @property
    def label(self) -> str:
        if self.mode == "XSP":
            return "XSP[" + "+".join(sorted(self.held_out_positions)) + "]"
        if self.mode == "MS":
            tag = "subset" if self.train_on_inference_positions else "all"
            return f"MS[{'+'.join(sorted(self.inference_positions))};train={tag}]"
        return "XS"


@dataclass(frozen=True)
class Fold:
    """One train/test partition.

    A segment contributes only the positions in ``train_positions`` (resp.
    ``test_positions``); segments left with no usable position are dropped.
    """

    index: int
    mode: str
    held_out_subject: str
    train_ids: tuple[str, ...]
    test_ids: tuple[str, ...]
    train_positions: frozenset[str]
    test_positions: frozenset[str]
    held_out_positions: frozenset[str] = field(default_factory=frozenset)

    def train_view(self, seg: Segment) -> frozenset[str]:
        return seg.positions & self.train_positions

    def test_view(self, seg: Segment) -> frozenset[str]:
        return seg.positions & self.test_positions


def make_splits(d: Dataset, spec: SplitSpec) -> list[Fold]:
    """Leave-one-subject-out folds under the protocol named by ``spec.mode``."""
    if spec.mode not in MODES:
        raise SplitError(f"unknown split mode {spec.mode!r}")
    subjects = d.subjects
    if len(subjects) < 2:
        raise SplitError(f"{spec.mode} needs at least 2 subjects, dataset has {len(subjects)}")
    all_positions = d.positions
    if spec.mode == "XSP":
        if not spec.held_out_positions:
            raise SplitError("XSP requires held_out_positions")
        missing = spec.held_out_positions - all_positions
        if missing:
            raise SplitError(f"held-out positions absent from dataset: {sorted(missing)}")
        train_pos = all_positions - spec.held_out_positions
        test_pos = frozenset(spec.held_out_positions)
        if not train_pos:
            raise SplitError("XSP holds out every position")
    elif spec.mode == "MS":
        if not spec.inference_positions:
            raise SplitError("MS requires non-empty inference_positions")
        missing = spec.inference_positions - all_positions
        if missing:
            raise SplitError(f"inference positions absent from dataset: {sorted(missing)}")
        test_pos = frozenset(spec.inference_positions)
        train_pos = test_pos if spec.train_on_inference_positions else all_positions
    else:
        train_pos = test_pos = all_positions

    if spec.held_out_subject is not None:
        if spec.held_out_subject not in subjects:
            raise SplitError(f"held-out subject {spec.held_out_subject!r} not in dataset")
        held = [spec.held_out_subject]
    else:
        held = subjects

    segs = d.segments()
    folds = []
    for i, subj in enumerate(held):
        train = tuple(
            s.segment_id for s in segs if s.subject_id != subj and s.positions & train_pos
        )
        test = tuple(s.segment_id for s in segs if s.subject_id == subj and s.positions & test_pos)
        folds.append(
            Fold(
                index=i,
                mode=spec.mode,
                held_out_subject=subj,
                train_ids=train,
                test_ids=test,
                train_positions=train_pos,
                test_positions=test_pos,
                held_out_positions=frozenset(spec.held_out_positions) if spec.mode == "XSP" else frozenset(),
            )
        )
    return folds
