"""Metric and protocol tests: relative error properties, BERT-style
scoring against a brute-force oracle, split evaluation, and the
shock/rarefaction feature detector."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from molforge.catalog import N_GRID, get_equation, space_grid
from molforge.errors import (EmptySentence, UnsupportedFamily,
                             ZeroNormTarget)
from molforge.evaluation import (EXTRAP_FAMILIES, EvalReport, OraclePredictor,
                                 ZeroPredictor, bert_style_score,
                                 embedding_embedder, evaluate_extrapolation,
                                 evaluate_split, relative_error,
                                 shock_feature_check)


# ---------------------------------------------------------------------------
# relative_error

def test_relative_error_zero_iff_equal():
    u = np.array([1.0, -2.0, 3.0])
    assert relative_error(u, u) == 0.0
    assert relative_error(u, u + 1e-9) > 0.0


def test_relative_error_homogeneity():
    rng = np.random.default_rng(0)
    u, v = rng.standard_normal(10), rng.standard_normal(10)
    base = relative_error(u, v)
    for lam in (0.5, 3.0, 100.0):
        assert relative_error(lam * u, lam * v) == pytest.approx(base,
                                                                 rel=1e-12)


def test_relative_error_zero_norm():
    with pytest.raises(ZeroNormTarget):
        relative_error(np.zeros(3), np.ones(3))


def test_relative_error_shape_mismatch():
    with pytest.raises(ValueError):
        relative_error(np.zeros(3), np.zeros(4))


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(0.01, 50.0))
def test_relative_error_properties(seed, lam):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(8) + 0.1
    v = rng.standard_normal(8)
    e = relative_error(u, v)
    assert e >= 0.0
    assert relative_error(lam * u, lam * v) == pytest.approx(e, rel=1e-9)


# ---------------------------------------------------------------------------
# bert_style_score

def _random_embedder(rng, d=6):
    # Nonnegative rows, as with real subword embeddings after the softmax
    # era's ReLU stacks: keeps every cosine similarity (and hence P and R)
    # nonnegative, which the harmonic-mean bounds require.
    table = {}

    def embed(tokens):
        rows = []
        for t in tokens:
            if t not in table:
                v = np.abs(rng.standard_normal(d)) + 1e-3
                table[t] = v / np.linalg.norm(v)
            rows.append(table[t])
        return np.stack(rows)
    return embed


def _brute_force(ref, cand, embed):
    e_ref, e_cand = embed(ref), embed(cand)
    r_sum = 0.0
    for i in range(len(ref)):
        r_sum += max(float(e_ref[i] @ e_cand[j]) for j in range(len(cand)))
    p_sum = 0.0
    for j in range(len(cand)):
        p_sum += max(float(e_ref[i] @ e_cand[j]) for i in range(len(ref)))
    r = r_sum / len(ref)
    p = p_sum / len(cand)
    f1 = 0.0 if p + r == 0 else 2 * p * r / (p + r)
    return p, r, f1


def test_bert_score_identity():
    rng = np.random.default_rng(1)
    embed = _random_embedder(rng)
    tokens = ["a", "b", "c"]
    p, r, f1 = bert_style_score(tokens, tokens, embed)
    assert (p, r, f1) == (pytest.approx(1.0), pytest.approx(1.0),
                          pytest.approx(1.0))


def test_bert_score_empty():
    rng = np.random.default_rng(2)
    embed = _random_embedder(rng)
    with pytest.raises(EmptySentence):
        bert_style_score([], ["a"], embed)
    with pytest.raises(EmptySentence):
        bert_style_score(["a"], [], embed)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.integers(1, 6), st.integers(1, 6))
def test_bert_score_against_brute_force(seed, n_ref, n_cand):
    rng = np.random.default_rng(seed)
    embed = _random_embedder(rng)
    ref = [f"r{i}" for i in range(n_ref)]
    cand = [f"c{j}" for j in range(n_cand)]
    got = bert_style_score(ref, cand, embed)
    want = _brute_force(ref, cand, embed)
    for g, w in zip(got, want):
        assert abs(g - w) < 1e-12
    p, r, f1 = got
    if p + r > 0:
        assert min(p, r) - 1e-12 <= f1 <= max(p, r) + 1e-12


def test_embedding_embedder_unit_rows(mixed_vocab):
    rng = np.random.default_rng(3)
    table = rng.standard_normal((mixed_vocab.size, 8))
    embed = embedding_embedder(table, mixed_vocab)
    rows = embed(["the", "equation"])
    np.testing.assert_allclose(np.linalg.norm(rows, axis=1), 1.0)


# ---------------------------------------------------------------------------
# split evaluation

def test_zero_predictor_errors_are_one(mixed_data):
    out, _ = mixed_data
    report = evaluate_split(ZeroPredictor(), str(out), "id", with_text=False)
    for cls, err in report.per_class_error.items():
        assert err == pytest.approx(1.0)
    assert report.total_average == pytest.approx(1.0)


def test_oracle_predictor_errors_are_zero(mixed_data):
    out, _ = mixed_data
    report = evaluate_split(OraclePredictor(), str(out), "id",
                            with_text=False)
    assert report.total_average == pytest.approx(0.0, abs=1e-12)


def test_aggregation_matches_per_sample(mixed_data):
    out, _ = mixed_data
    report = evaluate_split(ZeroPredictor(), str(out), "ood20",
                            with_text=False)
    by_class = {}
    for family, err in report.per_sample:
        by_class.setdefault(get_equation(family).cls.value, []).append(err)
    total = np.mean([np.mean(v) for v in by_class.values()])
    assert abs(total - report.total_average) < 1e-12
    assert report.sample_counts == {c: len(v) for c, v in by_class.items()}


def test_report_csv_layout(mixed_data):
    out, _ = mixed_data
    report = evaluate_split(ZeroPredictor(), str(out), "id", with_text=False)
    text = report.to_csv()
    lines = text.strip().split("\n")
    assert lines[0].startswith("#")
    assert lines[1] == "class,relative_error,text_p,text_r,text_f1,n_samples"
    assert lines[-1].startswith("total,")


def test_extrapolation_rejects_unknown_family(mixed_data):
    out, _ = mixed_data
    with pytest.raises(UnsupportedFamily):
        evaluate_extrapolation(OraclePredictor(), str(out), families=(25,))


def test_extrapolation_families_constant():
    assert EXTRAP_FAMILIES == (13, 19, 24, 29, 30)


# ---------------------------------------------------------------------------
# shock / rarefaction detection

def _shock_field():
    spec = get_equation(26)
    x = space_grid(spec)
    frames = []
    for t in np.linspace(0, 1.0, 32):
        pos = (1.0 + 0.8 * t) % spec.domain_length
        frames.append(np.where((x >= 0.2) & (x < pos), 1.2, 0.4))
    return np.stack(frames)


def _rarefaction_field():
    spec = get_equation(26)
    x = space_grid(spec)
    frames = []
    for t in np.linspace(0, 1.0, 32):
        lo, hi = 0.3, 1.2
        left, right = 1.0 - 0.45 * t, 1.0 + 0.45 * t
        u = np.clip(lo + (hi - lo) * (x - left) / np.maximum(right - left,
                                                             1e-9), lo, hi)
        frames.append(u)
    return np.stack(frames)


def test_shock_detected_and_consistent():
    verdict = shock_feature_check(_shock_field(), "the field develops one shock .")
    assert verdict.shock_detected
    assert verdict.shock_described
    assert verdict.consistent
    assert verdict.shock_positions


def test_smooth_field_no_feature():
    spec = get_equation(13)
    x = space_grid(spec)
    field = np.stack([np.exp(-0.1 * t) * np.sin(np.pi * x)
                      for t in np.linspace(0, 5, 32)])
    verdict = shock_feature_check(field, "smooth diffusion with no shocks .")
    assert not verdict.shock_detected
    assert verdict.consistent


def test_rarefaction_detected():
    verdict = shock_feature_check(_rarefaction_field(),
                                  "an expanding rarefaction fan .")
    assert verdict.rarefaction_detected
    assert verdict.consistent


def test_shock_description_without_shock_is_inconsistent():
    spec = get_equation(13)
    x = space_grid(spec)
    field = np.stack([np.sin(np.pi * x)] * 32)
    verdict = shock_feature_check(field, "the field develops one shock .")
    assert not verdict.consistent


def test_solver_shock_field_passes_detector():
    """End to end: an actual inviscid Burgers shock solve is detected."""
    from molforge.catalog import ParameterSet
    from molforge.numerics import solve_conservation_fv
    spec = get_equation(26)
    x = space_grid(spec)
    u0 = np.where(x < 1.0, 1.2, 0.4)
    # by t = 5 the shock has collided with the periodic rarefaction and
    # decayed, so detect over the first unit of time where it is sharp
    times = np.linspace(0.0, 1.0, 32)
    rec = solve_conservation_fv(
        spec, ParameterSet(values=(("k", 1.0),), relative_range=0.0,
                           seed_path="t"), u0, times)
    verdict = shock_feature_check(rec.values, "one shock forms .")
    assert verdict.shock_detected and verdict.consistent
