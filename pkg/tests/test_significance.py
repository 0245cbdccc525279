from __future__ import annotations

import itertools
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from conftest import disjoint_pairs, mos_record, random_mos_table
from uiqa.errors import DataError
from uiqa.evaluation import (
    c0,
    c0_outcomes,
    normal_cdf,
    significance_matrix,
    significant_pairs,
    z_score,
)
from uiqa.metrics import ScoreTable
from uiqa.subjective import MosTable


def _quad_cdf(z: float) -> float:
    val, _ = integrate.quad(lambda t: math.exp(-t * t / 2) / math.sqrt(2 * math.pi), 0.0, z,
                            epsabs=1e-15, epsrel=1e-13)
    return 0.5 + val


def test_normal_cdf_examples():
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(1.6449) == pytest.approx(0.95, abs=1e-4)
    assert normal_cdf(1.6449) == pytest.approx(_quad_cdf(1.6449), abs=1e-12)
    assert normal_cdf(math.inf) == 1.0 and normal_cdf(-math.inf) == 0.0


def test_normal_cdf_against_quadrature():
    for z in (-7.5, -3.2, -1.0, -0.1, 0.7, 2.0, 4.4, 8.0):
        assert normal_cdf(z) == pytest.approx(_quad_cdf(z), abs=1e-12)


def test_normal_cdf_against_mpmath_grid():
    zs = np.linspace(-8, 8, 1601)
    got = normal_cdf(zs)
    want = np.array([float(mpmath.ncdf(mpmath.mpf(float(z)))) for z in zs])
    assert np.max(np.abs(got - want)) <= 1e-15


@settings(max_examples=300)
@given(st.floats(-40, 40))
def test_normal_cdf_symmetry(z):
    assert normal_cdf(z) + normal_cdf(-z) == pytest.approx(1.0, abs=1e-15)


def test_z_score_example():
    z = z_score(80, 40, 4, 20, 4, 20)
    assert z == pytest.approx(40 / math.sqrt(0.4)) and z == pytest.approx(63.2, abs=0.1)
    assert normal_cdf(z) > 0.95
    assert z_score(50, 50, 3, 10, 1, 10) == 0.0
    assert z_score(50, 50, 0, 10, 0, 10) == 0.0
    assert z_score(51, 50, 0, 10, 0, 10) == math.inf


def six_image_table() -> MosTable:
    spec = {"A": (4.5, 0.5), "B": (4.15, 0.5), "C": (3.0, 1.0),
            "D": (2.45, 1.0), "E": (1.5, 0.25), "F": (4.5, 0.5)}
    return MosTable({k: mos_record(k, m, v, 20) for k, (m, v) in spec.items()})


def test_six_image_hand_computation():
    # z per pair with N = 20 raters each (standard error^2 = variance / 20):
    #   A-B 0.35/0.2236 = 1.57 drop   A-F 0 drop   B-F 1.57 drop
    #   C-D 0.55/0.3162 = 1.74 keep   D-E 0.95/0.25 = 3.8 keep   all others > 4
    expected = {("A", "C"), ("A", "D"), ("A", "E"), ("B", "C"), ("B", "D"), ("B", "E"),
                ("C", "D"), ("C", "E"), ("F", "C"), ("D", "E"), ("F", "D"), ("F", "E")}
    ps = significant_pairs(six_image_table())
    got = {(ps.ids[b], ps.ids[w]) for b, w in zip(ps.better, ps.worse)}
    assert got == expected
    assert np.all(ps.p > 0.95)
    assert all(i != j for i, j, _, _ in ps.pairs)


def test_six_image_matches_exhaustive_enumeration():
    table = six_image_table()
    brute = set()
    for i, j in itertools.permutations(table, 2):
        a, b = table[i], table[j]
        se = math.sqrt(a.variance / a.n_raters + b.variance / b.n_raters)
        z = (a.raw_mean - b.raw_mean) / se
        if z > 0 and 0.5 * math.erfc(-z / math.sqrt(2)) > 0.95:
            brute.add((i, j))
    ps = significant_pairs(table)
    assert {(ps.ids[b], ps.ids[w]) for b, w in zip(ps.better, ps.worse)} == brute


def test_identical_mos_dropped():
    t = MosTable({k: mos_record(k, 3.0, 1.0, 20) for k in "ab"})
    assert len(significant_pairs(t)) == 0


def test_z_symmetry_over_random_tables(rng):
    for _ in range(1000):
        t = random_mos_table(rng, 2, int(rng.integers(2, 30)))
        a, b = t["i0"], t["i1"]
        z1 = z_score(a.raw_mean, b.raw_mean, a.variance, a.n_raters, b.variance, b.n_raters)
        z2 = z_score(b.raw_mean, a.raw_mean, b.variance, b.n_raters, a.variance, a.n_raters)
        assert z1 == z2


def _pair_set(t: MosTable) -> set[tuple[str, str]]:
    ps = significant_pairs(t)
    return {(ps.ids[b], ps.ids[w]) for b, w in zip(ps.better, ps.worse)}


def test_variance_monotonicity_over_random_tables(rng):
    for _ in range(1000):
        t = random_mos_table(rng, 5, int(rng.integers(3, 25)))
        inflated = MosTable(t)
        victim = f"i{int(rng.integers(0, 5))}"
        r = t[victim]
        inflated[victim] = mos_record(victim, r.raw_mean, r.variance * rng.uniform(1, 4) + 0.1,
                                      r.n_raters)
        assert _pair_set(inflated) <= _pair_set(t)
        other = next(i for i in t if i != victim)
        o = t[other]
        assert (z_score(r.raw_mean, o.raw_mean, inflated[victim].variance, r.n_raters,
                        o.variance, o.n_raters)
                <= z_score(r.raw_mean, o.raw_mean, r.variance, r.n_raters, o.variance,
                           o.n_raters))


def test_significant_pairs_unknown_image():
    with pytest.raises(DataError):
        significant_pairs(six_image_table(), ["A", "Z"])


def _big_table(rng, n: int) -> MosTable:
    raw = rng.uniform(1, 5, n)
    return MosTable({f"i{k}": mos_record(f"i{k}", float(raw[k]), 0.3, 25) for k in range(n)})


def _mos_scores(t: MosTable, sign: float = 1.0, name: str = "m") -> ScoreTable:
    return ScoreTable(name, {k: sign * r.mos for k, r in t.items()})


def test_c0_endpoints(rng):
    t = _big_table(rng, 60)
    ps = significant_pairs(t)
    assert len(ps) > 1000
    assert c0(_mos_scores(t), ps) == 1.0
    assert c0(_mos_scores(t, -1.0), ps) == 0.0
    flipped = ScoreTable("lower", {k: -r.mos for k, r in t.items()}, higher_is_better=False)
    assert c0(flipped, ps) == 1.0


def test_c0_random_model_is_coin_flip(rng):
    t, pairs = disjoint_pairs(rng, 1000)
    assert len(pairs) == 1000
    noise = ScoreTable("rand", {k: float(rng.normal()) for k in t})
    assert abs(c0(noise, pairs) - 0.5) <= 0.05


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**31), st.sampled_from(["exp", "cube", "affine"]))
def test_sign_c0_invariant_under_increasing_maps(seed, fn):
    rng = np.random.default_rng(seed)
    t = _big_table(rng, 15)
    ps = significant_pairs(t)
    if len(ps) == 0:
        return
    raw = {k: float(rng.normal()) for k in t}
    f = {"exp": np.exp, "cube": lambda v: v**3, "affine": lambda v: 7 * v - 2}[fn]
    mapped = {k: float(f(v)) for k, v in raw.items()}
    assert c0(ScoreTable("a", raw), ps) == c0(ScoreTable("b", mapped), ps)


def test_c0_matches_pair_walker(rng):
    t = _big_table(rng, 25)
    ps = significant_pairs(t)
    scores = {k: float(rng.integers(0, 5)) for k in t}
    hits = 0
    for i, j in itertools.combinations(list(t), 2):
        a, b = t[i], t[j]
        z = abs(a.raw_mean - b.raw_mean) / math.sqrt(a.variance / 25 + b.variance / 25)
        if 0.5 * math.erfc(-z / math.sqrt(2)) <= 0.95:
            continue
        better, worse = (i, j) if a.raw_mean > b.raw_mean else (j, i)
        hits += scores[better] > scores[worse]
    assert c0(ScoreTable("m", scores), ps) == hits / len(ps)


def test_threshold_mode():
    t = MosTable({"hi": mos_record("hi", 5.0, 0.1, 20), "lo": mos_record("lo", 1.0, 0.1, 20),
                  "mid": mos_record("mid", 3.0, 0.1, 20)})
    ps = significant_pairs(t)
    s = ScoreTable("m", {"hi": 10.0, "mid": 5.0, "lo": 0.0})
    out = dict(zip([(ps.ids[b], ps.ids[w]) for b, w in zip(ps.better, ps.worse)],
                   c0_outcomes(s, ps, "threshold", 0.95).tolist()))
    # normalized scores 1, 0.5, 0: only the extreme pair clears theta = 0.95
    assert out == {("hi", "lo"): True, ("hi", "mid"): False, ("mid", "lo"): False}
    assert c0(s, ps, "threshold", theta=0.4) == 1.0
    with pytest.raises(ValueError):
        c0(s, ps, "paper")


def test_c0_errors():
    t = six_image_table()
    ps = significant_pairs(t)
    with pytest.raises(DataError):
        c0(ScoreTable("m", {"A": 1.0}), ps)
    with pytest.raises(DataError):
        c0(_mos_scores(t), significant_pairs(t, ["A", "F"]))


def test_matrix_self_and_antisymmetry(rng):
    perfect = np.ones(1000, bool)
    random = rng.random(1000) < 0.5
    names, m = significance_matrix({"perfect": perfect, "random": random, "twin": perfect})
    assert names == ["perfect", "random", "twin"]
    assert m[0, 0] == 0 and m[0, 2] == 0
    assert m[0, 1] == 1 and m[1, 0] == -1
    for _ in range(200):
        k = int(rng.integers(2, 6))
        outs = {f"m{i}": rng.random(300) < rng.uniform(0.2, 0.8) for i in range(k)}
        _, m = significance_matrix(outs)
        assert np.array_equal(m, -m.T)
        assert set(np.unique(m).tolist()) <= {-1, 0, 1}


def test_matrix_rejects_mismatched_lengths():
    with pytest.raises(DataError):
        significance_matrix({"a": [True, False], "b": [True]})
