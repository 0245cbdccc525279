from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uiqa.errors import DataError
from uiqa.manifest import DatasetManifest, ManifestEntry
from uiqa.subjective import (
    Rating,
    RatingTable,
    compute_mos,
    eud,
    iqr,
    ncc,
    outlier_coefficient,
    rater_agreement,
    read_mos,
    read_ratings,
    screen_subjects,
    write_mos,
    write_ratings,
)
from uiqa.synthetic import simulate_ratings


def table_from(per_image: dict[str, list[int]]) -> RatingTable:
    recs = []
    for image_id, scores in per_image.items():
        for k, s in enumerate(scores):
            recs.append(Rating(f"s{k:02d}", image_id, image_id, s))
    return RatingTable(recs)


def test_mos_of_three_ratings():
    rec = compute_mos(table_from({"a": [4, 5, 5]}))["a"]
    assert rec.raw_mean == pytest.approx(4.6667, abs=1e-4)
    assert rec.mos == pytest.approx(91.667, abs=1e-3)
    assert rec.n_raters == 3


def test_mos_constant_ratings():
    rec = compute_mos(table_from({"a": [3] * 21}))["a"]
    assert rec.mos == 50.0 and rec.variance == 0.0 and rec.iqr == 0.0


def test_mos_sample_variance():
    rec = compute_mos(table_from({"a": [1, 5]}))["a"]
    assert rec.raw_mean == 3.0 and rec.variance == 8.0


def test_mos_single_rater_has_zero_variance():
    rec = compute_mos(table_from({"a": [2]}))["a"]
    assert rec.variance == 0.0 and rec.n_raters == 1


def test_mos_endpoints():
    mos = compute_mos(table_from({"lo": [1, 1, 1], "hi": [5, 5, 5]}))
    assert mos["lo"].mos == 0.0 and mos["hi"].mos == 100.0


def test_oc_worked_example():
    mos = compute_mos(table_from({"a": [1, 1, 5, 5], "b": [3, 3, 3, 3], "c": [2, 3, 3, 3]}))
    assert mos["a"].iqr == 4.0 and mos["b"].iqr == 0.0 and mos["c"].iqr == 0.25
    assert outlier_coefficient(mos) == 1 / 3


def test_oc_five_percent():
    per_image = {f"i{k:03d}": ([1, 1, 5, 5] if k < 5 else [3, 3, 4, 4]) for k in range(100)}
    assert outlier_coefficient(compute_mos(table_from(per_image))) == 0.05


def test_oc_identical_ratings():
    assert outlier_coefficient(compute_mos(table_from({"a": [2] * 5, "b": [4] * 5}))) == 0.0


def test_oc_boundary_is_strict():
    # IQR exactly 1 is not an outlier
    assert iqr([2, 2, 3, 3, 3]) == 1.0
    assert outlier_coefficient(compute_mos(table_from({"a": [2, 2, 3, 3, 3]}))) == 0.0


def test_ncc_eud_examples():
    u = np.array([1.0, 1, 1, 1])
    v = np.array([5.0, 5, 5, 5])
    assert ncc(u, v) == pytest.approx(1.0) and eud(u, v) == 1.0
    w = np.array([1.0, 3, 2, 5])
    assert ncc(w, w) == pytest.approx(1.0) and eud(w, w) == 0.0


vectors = st.lists(st.integers(1, 5), min_size=2, max_size=30)


@settings(max_examples=200)
@given(vectors, st.floats(0.1, 10.0))
def test_ncc_scale_invariant(u, c):
    u = np.array(u, float)
    v = np.roll(u, 1)
    assert ncc(c * u, v) == pytest.approx(ncc(u, v), rel=1e-12)


@settings(max_examples=200)
@given(st.lists(st.tuples(st.integers(1, 5), st.integers(1, 5), st.integers(1, 5)),
                min_size=1, max_size=30))
def test_eud_symmetry_and_triangle(rows):
    u, v, w = (np.array(c, float) for c in zip(*rows))
    assert eud(u, v) == eud(v, u)
    assert eud(u, w) <= eud(u, v) + eud(v, w) + 1e-12
    assert 0.0 <= eud(u, v) <= 1.0


@settings(max_examples=100)
@given(st.lists(st.integers(1, 5), min_size=1, max_size=25), st.randoms())
def test_mos_permutation_invariant(scores, rnd):
    shuffled = list(scores)
    rnd.shuffle(shuffled)
    a = compute_mos(table_from({"x": scores}))["x"]
    b = compute_mos(table_from({"x": shuffled}))["x"]
    assert a.raw_mean == pytest.approx(b.raw_mean, abs=1e-12)
    assert a.variance == pytest.approx(b.variance, abs=1e-12)
    assert a.iqr == b.iqr
    assert 0.0 <= a.mos <= 100.0


def verification_table(pairs_by_subject: dict[str, list[tuple[int, int]]]) -> RatingTable:
    recs = []
    for subject, pairs in pairs_by_subject.items():
        for k, (first, _) in enumerate(pairs):
            recs.append(Rating(subject, f"v{k}", f"v{k}", first))
        for k, (_, second) in enumerate(pairs):
            recs.append(Rating(subject, f"v{k}", f"v{k}#rep", second))
    return RatingTable(recs)


def test_screening_worked_example():
    t = verification_table({"s1": [(5, 5), (4, 3), (2, 2), (1, 4), (3, 3)]})
    d = screen_subjects(t)["s1"]
    assert d.fluctuations == 1 and d.n_verification == 5 and d.keep


def test_screening_identical_and_boundary():
    t = verification_table({
        "same": [(3, 3)] * 5,
        "edge": [(1, 3), (5, 3), (2, 4), (4, 2), (3, 5)],
    })
    d = screen_subjects(t)
    assert d["same"].fluctuations == 0 and d["same"].keep
    assert d["edge"].fluctuations == 0 and d["edge"].keep


def test_screening_discards_unstable_subject():
    t = verification_table({"bad": [(1, 5), (5, 1), (1, 4), (3, 3), (2, 2)]})
    d = screen_subjects(t)["bad"]
    assert d.fluctuations == 3 and not d.keep
    assert screen_subjects(t, max_fluctuations=3)["bad"].keep


def test_screening_needs_pairs():
    with pytest.raises(DataError):
        screen_subjects(table_from({"a": [1, 2]}))


def test_verification_repeats_excluded_from_mos():
    t = verification_table({"s1": [(5, 1)], "s2": [(5, 1)]})
    rec = compute_mos(t)["v0"]
    assert rec.raw_mean == 5.0 and rec.n_raters == 2


def test_rating_table_validation():
    with pytest.raises(DataError):
        RatingTable([Rating("s", "a", "a", 6)])
    with pytest.raises(DataError):
        RatingTable([Rating("s", "a", "a", 3), Rating("s", "a", "a", 4)])
    with pytest.raises(DataError):
        compute_mos(table_from({"a": [3]}), images=["a", "missing"])


def _synthetic_manifest(n: int) -> DatasetManifest:
    entries = []
    for k in range(n):
        ref = f"r{k}"
        entries.append(ManifestEntry(ref, f"{ref}.png", f"g{k}"))
        for level in (1, 2, 3, 4):
            entries.append(ManifestEntry(
                f"{ref}_b{level}", f"{ref}_b{level}.png", f"g{k}", False, True,
                {"kind": "motion_blur", "level": level, "params": {}, "seed": 0}, ref))
    return DatasetManifest(entries)


def test_synthetic_raters_agree_qualitatively():
    manifest = _synthetic_manifest(20)
    calm = rater_agreement(simulate_ratings(manifest, 15, seed=1))
    noisy = rater_agreement(simulate_ratings(manifest, 15, seed=1, noise=1.5, bias=0.6))
    # high-agreement regime: NCC near 1, EUD small, few outliers
    assert calm.mean_ncc > 0.9 and calm.mean_eud < 0.25 and calm.oc <= 0.05
    assert noisy.mean_ncc < calm.mean_ncc and noisy.mean_eud > calm.mean_eud
    assert set(calm.fluctuations) == {f"s{k:02d}" for k in range(15)}


def test_agreement_needs_two_subjects():
    with pytest.raises(DataError):
        rater_agreement(table_from({"a": [3], "b": [4]}))


def test_csv_round_trip(tmp_path):
    t = verification_table({"s1": [(5, 4), (2, 2)], "s2": [(4, 4), (1, 3)]})
    write_ratings(t, tmp_path / "r.csv")
    back = read_ratings(tmp_path / "r.csv")
    assert back.records == t.records
    assert back.verification_pairs == t.verification_pairs
    mos = compute_mos(back)
    write_mos(mos, tmp_path / "m.csv")
    again = read_mos(tmp_path / "m.csv")
    assert again == mos
    text = (tmp_path / "m.csv").read_text(encoding="utf-8")
    assert text.startswith("image_id,mos,raw_mean,variance,n_raters,iqr\n")
    assert "\r" not in text


def test_csv_errors_name_the_line(tmp_path):
    p = tmp_path / "r.csv"
    p.write_text("subject_id,image_id,presentation_id,score\ns1,a,a,3\ns1,b,b,x\n")
    with pytest.raises(DataError, match=r"r\.csv:3"):
        read_ratings(p)
    p.write_text("who,what\n")
    with pytest.raises(DataError):
        read_ratings(p)
    m = tmp_path / "m.csv"
    m.write_text("image_id,mos,raw_mean,variance,n_raters,iqr\na,150,3,0,1,0\n")
    with pytest.raises(DataError):
        read_mos(m)


def test_raw_to_mos_bounds():
    from uiqa.subjective import raw_to_mos

    assert raw_to_mos(1.0) == 0.0 and raw_to_mos(5.0) == 100.0
    assert math.isclose(raw_to_mos(3.0), 50.0)
