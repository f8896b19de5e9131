import numpy as np
import pytest

from defersched import DomainError, PiecewisePolicy, Segment, SegmentKind, Source, UnresolvedPolicyError
from defersched.piecewise import build


def _threshold(psi=2.0, cut=0.5):
    return PiecewisePolicy(psi, (
        Segment(0.0, cut, SegmentKind.ZERO),
        Segment(cut, psi, SegmentKind.AFFINE, 0.5, 0.25),
    ))


def test_boundary_point_belongs_to_left_segment():
    policy = _threshold()
    assert policy(0.5) == 0.0
    assert policy(0.5 + 1e-6) == pytest.approx(0.5 + 5e-7, abs=1e-12)
    assert policy(2.0) == pytest.approx(1.25)


def test_jumps_reported_only_at_discontinuities():
    assert _threshold().jumps == [0.5]
    smooth = PiecewisePolicy(2.0, (
        Segment(0.0, 1.0, SegmentKind.AFFINE, 1.0, 0.0),
        Segment(1.0, 2.0, SegmentKind.AFFINE, 0.0, 1.0),
    ))
    assert smooth.jumps == []


def test_values_are_clipped_into_range():
    policy = PiecewisePolicy.affine(2.0, 1.0, 1.5)
    xs = np.linspace(0, 2, 51)
    out = policy.evaluate(xs)
    assert out.min() >= 0 and out.max() <= 2.0
    assert out[-1] == 2.0


def test_saturated_segment_defers_everything():
    policy = build(3.0, [Segment(0, 1, SegmentKind.ZERO), Segment(1, 3, SegmentKind.SATURATED)])
    assert policy(2.0) == 3.0


@pytest.mark.parametrize("segments", [
    (),
    (Segment(0.1, 2.0, SegmentKind.ZERO),),
    (Segment(0.0, 1.0, SegmentKind.ZERO), Segment(1.1, 2.0, SegmentKind.ZERO)),
    (Segment(0.0, 0.0, SegmentKind.ZERO), Segment(0.0, 2.0, SegmentKind.ZERO)),
    (Segment(0.0, 2.0, SegmentKind.AFFINE, -1.0, 1.0),),
])
def test_invalid_partitions_rejected(segments):
    with pytest.raises(DomainError):
        PiecewisePolicy(2.0, segments)


def test_outside_domain_rejected():
    with pytest.raises(DomainError):
        _threshold()(2.5)
    with pytest.raises(DomainError):
        _threshold()(-0.1)


def test_unfilled_numeric_segment_raises_but_zero_part_works():
    policy = build(2.0, [Segment(0, 1, SegmentKind.ZERO),
                         Segment(1, 2, SegmentKind.NUMERIC, source=Source.NUMERIC)])
    assert policy(0.3) == 0.0
    assert not policy.resolved
    with pytest.raises(UnresolvedPolicyError):
        policy(1.5)
    xs = np.linspace(0, 2, 21)
    filled = policy.fill_numeric(xs, xs / 2)
    assert filled.resolved
    assert filled(1.5) == pytest.approx(0.75)
    assert filled(0.5) == 0.0


def test_from_table_interpolates():
    policy = PiecewisePolicy.from_table([0, 1, 2], [0, 1, 1])
    assert policy(0.5) == pytest.approx(0.5)
    assert policy.rows()[0]["kind"] == "numeric"


def test_build_drops_collapsed_segments():
    policy = build(2.0, [Segment(0, 0, SegmentKind.ZERO), Segment(0, 2, SegmentKind.AFFINE, 0.5, 0.1)])
    assert len(policy.segments) == 1
