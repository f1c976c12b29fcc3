"""Smoke tests for the erprompt Python module."""

import math

import pytest

import erprompt as ep


def make_profile(pid, source, attrs):
    return ep.EntityProfile(pid, source, attrs)


@pytest.fixture
def pair():
    left = make_profile(
        "a1", "amazon",
        [("title", "Apple final cut studio 2 (mac)"),
         ("manufacturer", "Apple"),
         ("description", "integrated post-production suite")])
    right = make_profile(
        "g1", "google",
        [("title", "Apple final cut studio 2 production suite for mac"),
         ("manufacturer", None),
         ("description", "final cut studio 2 production software suite")])
    return ep.CandidatePair(left, right, True)


def test_canonicalize_normalizes_whitespace():
    messy = make_profile("x", "amazon", [("title", "  too   many spaces ")])
    clean = ep.canonicalize(messy)
    assert clean.attributes[0][1] == "too many spaces"
    again = ep.canonicalize(clean)
    assert again.attributes == clean.attributes


def test_pair_key_is_order_sensitive(pair):
    params = ep.DecodingParams("mock")
    key = ep.pair_key("multi-attr", "mock", params, pair)
    assert len(key.digest) == 64
    swapped = ep.CandidatePair(pair.right, pair.left, pair.label)
    assert ep.pair_key("multi-attr", "mock", params, swapped).digest != key.digest
    assert ep.pair_key("multi-json", "mock", params, pair).digest != key.digest


def test_render_all_six_patterns(pair):
    persona = ep.persona_text()
    assert "expert on product classification" in persona
    demos = ep.golden_fixture_demonstrations()
    for variant in (ep.PatternVariant.MultiAttr, ep.PatternVariant.SingleAttr,
                    ep.PatternVariant.MultiJson, ep.PatternVariant.FewShot,
                    ep.PatternVariant.MultiSim, ep.PatternVariant.NoPersona):
        pattern = ep.PromptPattern(
            variant,
            "title" if variant == ep.PatternVariant.SingleAttr else None,
            demos if variant == ep.PatternVariant.FewShot else None)
        prompt = ep.render(pattern, pair)
        assert "Apple final cut studio 2" in prompt.user
        if variant == ep.PatternVariant.NoPersona:
            assert prompt.system is None
        else:
            assert prompt.system == persona
        kind = (ep.ReplyKind.SimilarityScore
                if variant == ep.PatternVariant.MultiSim else ep.ReplyKind.Decision)
        assert prompt.expects == kind


def test_serializers(pair):
    concat = ep.serialize_concat(pair.right)
    assert concat.splitlines()[1] == "manufacturer: N/A"
    as_json = ep.serialize_json(pair.right)
    assert '"manufacturer": null' in as_json


def test_mock_round_trip(pair):
    pattern = ep.PromptPattern(ep.PatternVariant.MultiAttr, None, None)
    prompt = ep.render(pattern, pair)
    result = ep.mock_complete(prompt, True, 0.0, 7)
    judgment = ep.parse_decision(result.text)
    assert judgment.decision == ep.Decision.Match
    assert result.usage.prompt_tokens > 0

    sim_prompt = ep.render(ep.PromptPattern(ep.PatternVariant.MultiSim, None, None), pair)
    sim = ep.parse_similarity(ep.mock_complete(sim_prompt, False, 0.0, 7).text)
    assert sim.similarity is not None
    assert 0.0 <= sim.similarity <= 0.2


def test_parse_freeform_reply():
    judgment = ep.parse_decision(
        "No, these records refer to different chipsets (Z370M vs B250M).")
    assert judgment.decision == ep.Decision.NonMatch
    assert ep.parse_decision("Possibly related.").decision == ep.Decision.Unknown
    assert ep.parse_similarity("SCORE: 7").similarity is None


def test_metrics_and_sweep():
    counts = ep.ConfusionCounts(3, 1, 1, 5)
    m = ep.metrics(counts)
    assert m.precision == pytest.approx(0.75)
    assert m.recall == pytest.approx(0.75)
    assert m.f_measure == pytest.approx(0.75)

    sweep = ep.sweep_threshold([ep.ScoredPair(0.1, False), ep.ScoredPair(0.9, True)])
    assert sweep.theta == pytest.approx(0.5)
    assert sweep.best_f_measure == pytest.approx(1.0)


def test_paired_t_test_against_scipy():
    scipy_stats = pytest.importorskip("scipy.stats")
    rng_a = [1, 0, 1, 1, 0, 1, 0, 1, 1, 1, 0, 1, 1, 0, 0, 1]
    rng_b = [0, 0, 1, 0, 1, 1, 0, 0, 1, 1, 0, 0, 1, 1, 0, 1]
    ours = ep.paired_t_test(rng_a, rng_b)
    reference = scipy_stats.ttest_rel(rng_a, rng_b)
    assert ours.t_statistic == pytest.approx(reference.statistic, abs=1e-12)
    assert ours.p_value == pytest.approx(reference.pvalue, abs=1e-12)


def test_estimate_tokens_and_cost():
    assert ep.estimate_tokens("") == 0
    assert ep.estimate_tokens("12345678") == 2
    assert ep.estimate_tokens("123456789") == 3
    prices = ep.PriceTable(0.0005, 0.0015)
    cost = ep.estimate_cost(ep.TokenUsage(1000, 100), prices)
    assert math.isclose(cost, 0.00065)


def test_wdc_round_trip(tmp_path):
    file = tmp_path / "pairs.ndjson"
    file.write_text(
        '{"left": {"title": "acme x1"}, "right": {"title": "acme x1 pc"}, "label": 1}\n'
        '{"left": {"title": "nova t5"}, "right": {"title": "zenith z9"}, "label": 0}\n')
    pairs = ep.load_wdc(file)
    assert pairs.positives == 1
    assert pairs.negatives == 1
    out = tmp_path / "copy.ndjson"
    ep.write_wdc(pairs, out)
    assert ep.load_wdc(out).positives == 1
