import math

import pytest
from hypothesis import given, settings as hsettings, strategies as st

from foldlab.conditions import (
    CANONICAL_RULING_COUNT,
    DISCARDED_CONDITIONS,
    RANGES,
    Condition,
    ConditionParams,
    Difficulty,
    canonical_params,
    generate_parameters,
)
from foldlab.errors import InvalidArgument, ParseError

DIFFS = (Difficulty.EASY, Difficulty.MEDIUM, Difficulty.HARD)


def payload_intervals(c: Condition, d: Difficulty) -> dict:
    """Expected interval per payload key, resolving branch-valued axes."""
    r = RANGES[c]
    if c is Condition.FOCUS_BLUR:
        return {"kernel_pct": r["kernel_pct"][d]}
    if c is Condition.MOTION_BLUR:
        return {"length_pct": r["length_pct"][d], "angle": (0.0, math.pi)}
    if c is Condition.POSE_CHANGE:
        e = r["euler"][d]
        return {"roll": e, "pitch": e, "yaw": e,
                "translation": r["translation"][d]}
    if c is Condition.DEFORMATION:
        return {"ruling_count": r["ruling_count"][d]}
    if c is Condition.EXTERNAL_OCCLUSION:
        return {"visibility": r["visibility"][d]}
    return {}  # branch-valued (sc, li) handled separately


class TestRanges:
    @pytest.mark.parametrize("c", list(Condition))
    @pytest.mark.parametrize("d", DIFFS)
    def test_samples_within_interval(self, c, d):
        thetas = generate_parameters(c, d, 1000, 123)
        assert len(thetas) == 1000
        for key, (lo, hi) in payload_intervals(c, d).items():
            vals = [t.payload[key] for t in thetas]
            assert min(vals) >= lo and max(vals) <= hi
            if hi - lo > 1e-12:
                mid = (lo + hi) / 2
                assert any(v < mid for v in vals)
                assert any(v >= mid for v in vals)

    @pytest.mark.parametrize("c,key", [(Condition.SCALE, "factor"),
                                       (Condition.LIGHTING, "irradiance")])
    @pytest.mark.parametrize("d", DIFFS)
    def test_branch_axes(self, c, key, d):
        thetas = generate_parameters(c, d, 1000, 321)
        branches = {t.payload["branch"] for t in thetas}
        assert len(branches) == 2  # fair coin hits both
        names = sorted(RANGES[c])
        for t in thetas:
            lo, hi = RANGES[c][t.payload["branch"]][d]
            assert lo <= t.payload[key] <= hi
            assert t.payload["branch"] in names

    def test_hard_deformation_ruling_count(self):
        thetas = generate_parameters(Condition.DEFORMATION, Difficulty.HARD, 50, 5)
        assert all(t.payload["ruling_count"] == 8 for t in thetas)

    def test_zero_count(self):
        assert generate_parameters(Condition.FOCUS_BLUR, Difficulty.EASY, 0, 1) == []

    def test_canonical_rejected(self):
        with pytest.raises(InvalidArgument):
            generate_parameters(Condition.FOCUS_BLUR, Difficulty.CANONICAL, 1, 1)

    def test_determinism(self):
        a = generate_parameters(Condition.MOTION_BLUR, Difficulty.HARD, 20, 777)
        b = generate_parameters(Condition.MOTION_BLUR, Difficulty.HARD, 20, 777)
        assert a == b


class TestCanonical:
    def test_values(self):
        assert canonical_params(Condition.FOCUS_BLUR).payload["kernel_pct"] == 0.0
        assert canonical_params(Condition.EXTERNAL_OCCLUSION).payload["visibility"] == 1.0
        de = canonical_params(Condition.DEFORMATION).payload
        assert de["ruling_count"] == CANONICAL_RULING_COUNT == 2
        assert canonical_params(Condition.SCALE).payload["factor"] == 1.0
        assert canonical_params(Condition.LIGHTING).payload["irradiance"] == 1.0
        po = canonical_params(Condition.POSE_CHANGE).payload
        assert po["roll"] == po["pitch"] == po["yaw"] == po["translation"] == 0.0

    def test_difficulty_tag(self):
        for c in Condition:
            assert canonical_params(c).difficulty is Difficulty.CANONICAL


class TestSerialization:
    @hsettings(max_examples=50, deadline=None)
    @given(
        c=st.sampled_from(list(Condition)),
        d=st.sampled_from(DIFFS),
        seed=st.integers(min_value=0, max_value=2**31),
    )
    def test_roundtrip(self, c, d, seed):
        theta = generate_parameters(c, d, 1, seed)[0]
        assert ConditionParams.from_json(theta.to_json()) == theta

    def test_unknown_tag(self):
        with pytest.raises(ParseError):
            ConditionParams.from_json({"condition": "xx", "difficulty": "easy"})

    def test_missing_fields(self):
        with pytest.raises(ParseError):
            ConditionParams.from_json({"difficulty": "easy"})

    def test_from_tag_errors_list_valid(self):
        with pytest.raises(InvalidArgument, match="fb"):
            Condition.from_tag("zz")
        with pytest.raises(InvalidArgument, match="easy"):
            Difficulty.from_tag("zz")


def test_discarded_axes_documented_not_sampled():
    assert len(DISCARDED_CONDITIONS) >= 5
    tags = {c.value for c in Condition}
    assert tags.isdisjoint(set(DISCARDED_CONDITIONS))
