import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ghjm.dataset import JointDataset
from ghjm.errors import ValidationError


def small():
    s = pd.DataFrame({"subject_id": ["a", "b", "c"], "status": ["exact", "right", "interval"],
                      "time": [2.0, 3.0, np.nan], "t_left": [np.nan, np.nan, 1.0],
                      "t_right": [np.nan, np.nan, 4.0], "sex": [0.0, 1.0, 1.0]})
    lg = pd.DataFrame({"subject_id": ["a", "a", "b", "c"], "time": [0.0, 1.5, 0.0, 3.9],
                       "outcome": [1.0, 2.0, 0.5, -1.0]})
    return s, lg


def test_valid_dataset():
    d = JointDataset(*small())
    assert d.n_subjects == 3
    assert d.covariate_columns == ["sex"]
    assert list(d.obs_by_subject()) == ["a", "b", "c"]


@pytest.mark.parametrize("mutate, message", [
    (lambda s, lg: s.drop(columns="status"), "status"),
    (lambda s, lg: s.assign(status=["exact", "right", "censored"]), "unknown status"),
    (lambda s, lg: s.assign(subject_id=["a", "a", "c"]), "duplicate"),
    (lambda s, lg: s.assign(time=[0.0, 3.0, np.nan]), "times must be > 0"),
    (lambda s, lg: s.assign(time=[np.nan, 3.0, np.nan]), "times must be > 0"),
    (lambda s, lg: s.assign(t_left=[np.nan, np.nan, 4.0]), "t_left < t_right"),
])
def test_invalid_survival_table(mutate, message):
    s, lg = small()
    with pytest.raises(ValidationError, match=message):
        JointDataset(mutate(s, lg), lg)


@pytest.mark.parametrize("mutate, message", [
    (lambda lg: lg.drop(columns="outcome"), "outcome"),
    (lambda lg: lg.assign(subject_id=["a", "a", "b", "z"]), "unknown subjects"),
    (lambda lg: lg.assign(time=[0.0, -1.0, 0.0, 1.0]), ">= 0"),
    (lambda lg: lg.assign(outcome=[1.0, np.inf, 0.0, 1.0]), "non-finite"),
    (lambda lg: lg.assign(time=[0.0, 2.5, 0.0, 1.0]), "exceed"),
    (lambda lg: lg.assign(time=[0.0, 1.0, 0.0, 4.5]), "exceed"),
])
def test_invalid_longitudinal_table(mutate, message):
    s, lg = small()
    with pytest.raises(ValidationError, match=message):
        JointDataset(s, mutate(lg))


def test_csv_round_trip_is_lossless(tmp_path):
    d = JointDataset(*small())
    d.to_csv(tmp_path)
    back = JointDataset.from_dir(tmp_path)
    pd.testing.assert_frame_equal(back.subjects, d.subjects, check_dtype=False)
    pd.testing.assert_frame_equal(back.longitudinal, d.longitudinal, check_dtype=False)
    assert back.content_hash() == d.content_hash()


@given(values=st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=4, max_size=4))
def test_round_trip_preserves_every_bit(values, tmp_path_factory):
    s, lg = small()
    lg["outcome"] = values
    d = JointDataset(s, lg)
    out = tmp_path_factory.mktemp("rt")
    d.to_csv(out)
    back = JointDataset.from_dir(out)
    assert np.array_equal(back.longitudinal["outcome"].to_numpy(), np.asarray(values))


def test_hash_is_sensitive_to_content():
    s, lg = small()
    h = JointDataset(s, lg).content_hash()
    assert JointDataset(s, lg).content_hash() == h
    lg2 = lg.copy()
    lg2.loc[0, "outcome"] = np.nextafter(1.0, 2.0)
    assert JointDataset(s, lg2).content_hash() != h


def test_subset_keeps_order_and_observations():
    d = JointDataset(*small())
    sub = d.subset(["c", "a"])
    assert list(sub.subjects["subject_id"]) == ["c", "a"]
    assert sorted(sub.longitudinal["subject_id"]) == ["a", "a", "c"]


def test_numeric_ids_are_strings(tmp_path):
    s, lg = small()
    s["subject_id"] = ["001", "002", "003"]
    lg["subject_id"] = ["001", "001", "002", "003"]
    JointDataset(s, lg).to_csv(tmp_path)
    back = JointDataset.from_dir(tmp_path)
    assert list(back.subjects["subject_id"]) == ["001", "002", "003"]


def test_unreadable_files(tmp_path):
    with pytest.raises(ValidationError, match="could not read"):
        JointDataset.from_dir(tmp_path)
