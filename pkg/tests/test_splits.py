from __future__ import annotations

import pytest

from narrate.splits import SplitError, SplitSpec, make_splits
from narrate.synth import CorpusConfig, generate_corpus


def test_xs_one_fold_per_subject(small_corpus):
    _, d, _ = small_corpus
    folds = make_splits(d, SplitSpec("XS"))
    assert [f.held_out_subject for f in folds] == d.subjects
    idx = d.segment_index()
    for f in folds:
        train_subj = {idx[s].subject_id for s in f.train_ids}
        test_subj = {idx[s].subject_id for s in f.test_ids}
        assert test_subj == {f.held_out_subject}
        assert not train_subj & test_subj
    covered = {idx[s].subject_id for f in folds for s in f.test_ids}
    assert covered == set(d.subjects)


def test_xsp_training_never_sees_held_out_position(small_corpus):
    _, d, _ = small_corpus
    folds = make_splits(d, SplitSpec("XSP", held_out_positions=frozenset({"wrist_r"})))
    idx = d.segment_index()
    for f in folds:
        assert "wrist_r" not in f.train_positions
        for s in f.train_ids:
            assert "wrist_r" not in f.train_view(idx[s])
            assert idx[s].subject_id != f.held_out_subject
        for s in f.test_ids:
            assert f.test_view(idx[s]) == frozenset({"wrist_r"})


def test_ms_restricts_test_view_only(small_corpus):
    _, d, _ = small_corpus
    w = frozenset({"wrist_r"})
    idx = d.segment_index()
    for f in make_splits(d, SplitSpec("MS", inference_positions=w)):
        assert f.train_positions == d.positions
        assert all(f.test_view(idx[s]) == w for s in f.test_ids)
    for f in make_splits(d, SplitSpec("MS", inference_positions=w, train_on_inference_positions=True)):
        assert f.train_positions == w


def test_split_errors(small_corpus):
    _, d, _ = small_corpus
    with pytest.raises(SplitError):
        make_splits(d, SplitSpec("MS"))
    with pytest.raises(SplitError):
        make_splits(d, SplitSpec("MS", inference_positions=frozenset({"foot_l"})))
    with pytest.raises(SplitError):
        make_splits(d, SplitSpec("XSP", held_out_positions=frozenset({"shin_r"})))
    with pytest.raises(SplitError):
        make_splits(d, SplitSpec("LOL"))
    one, _ = generate_corpus(CorpusConfig(n_subjects=1, segments_per_subject=3))
    with pytest.raises(SplitError):
        make_splits(one, SplitSpec("XS"))


def test_held_out_subject_selects_single_fold(small_corpus):
    _, d, _ = small_corpus
    folds = make_splits(d, SplitSpec("XS", held_out_subject="subj02"))
    assert len(folds) == 1 and folds[0].held_out_subject == "subj02"


def test_split_spec_json_round_trip():
    s = SplitSpec("MS", inference_positions=frozenset({"wrist_r", "head"}), train_on_inference_positions=True)
    assert SplitSpec.from_json(s.to_json()) == s
    assert s.label == "MS[head+wrist_r;train=subset]"
