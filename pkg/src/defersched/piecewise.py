"""Piecewise deferral rules ``x -> u`` on ``[0, psi]``.

A policy is an ordered tuple of contiguous segments. The first segment is
closed on the left, every segment is closed on the right, so a point equal
to a boundary belongs to the segment on its left. That is how the zero
branch wins ties at a threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .model import TOL, DomainError


class SegmentKind(str, Enum):
    ZERO = "zero"
    AFFINE = "affine"
    SATURATED = "saturated"
    NUMERIC = "numeric"


class Source(str, Enum):
    """How much a segment is backed by theory.

    ANALYTIC segments are proven closed forms. PARTIAL segments are closed
    forms whose optimality is only checked numerically. ON_PATH means only the
    value at ``x = 0`` is guaranteed. NUMERIC segments come from a solver table.
    """

    ANALYTIC = "analytic"
    PARTIAL = "partial"
    ON_PATH = "on-path"
    NUMERIC = "numeric"


class UnresolvedPolicyError(LookupError):
    """Evaluation hit a numeric segment that was never filled from a solver."""


@dataclass(frozen=True)
class Segment:
    x_lo: float
    x_hi: float
    kind: SegmentKind
    slope: float = 0.0
    intercept: float = 0.0
    source: Source = Source.ANALYTIC
    # Tabulated values for NUMERIC segments, linearly interpolated.
    table_x: Optional[tuple[float, ...]] = field(default=None, repr=False)
    table_u: Optional[tuple[float, ...]] = field(default=None, repr=False)

    @property
    def resolved(self) -> bool:
        return self.kind is not SegmentKind.NUMERIC or self.table_x is not None


@dataclass(frozen=True)
class PiecewisePolicy:
    psi: float
    segments: tuple[Segment, ...]
    label: str = ""

    def __post_init__(self) -> None:
        segs = self.segments
        if not segs:
            raise DomainError("a policy needs at least one segment")
        if abs(segs[0].x_lo) > TOL or abs(segs[-1].x_hi - self.psi) > TOL:
            raise DomainError("segments must cover [0, psi]")
        for left, right in zip(segs, segs[1:]):
            if abs(left.x_hi - right.x_lo) > TOL:
                raise DomainError(f"segments not contiguous at {left.x_hi} / {right.x_lo}")
        for seg in segs:
            if not seg.x_lo < seg.x_hi:
                raise DomainError(f"empty segment [{seg.x_lo}, {seg.x_hi}]")
            if seg.kind is SegmentKind.AFFINE and seg.slope < 0:
                raise DomainError("affine segments must be nondecreasing")

    # -- construction helpers -------------------------------------------

    @classmethod
    def zero(cls, psi: float, source: Source = Source.ANALYTIC, label: str = "") -> "PiecewisePolicy":
        return cls(psi, (Segment(0.0, psi, SegmentKind.ZERO, source=source),), label)

    @classmethod
    def affine(cls, psi: float, slope: float, intercept: float,
               source: Source = Source.ANALYTIC, label: str = "") -> "PiecewisePolicy":
        return cls(psi, (Segment(0.0, psi, SegmentKind.AFFINE, slope, intercept, source),), label)

    @classmethod
    def from_table(cls, xs: Sequence[float], us: Sequence[float], label: str = "") -> "PiecewisePolicy":
        xs = tuple(float(v) for v in xs)
        us = tuple(float(v) for v in us)
        seg = Segment(xs[0], xs[-1], SegmentKind.NUMERIC, source=Source.NUMERIC, table_x=xs, table_u=us)
        return cls(xs[-1], (seg,), label)

    def fill_numeric(self, xs: Sequence[float], us: Sequence[float]) -> "PiecewisePolicy":
        """Return a copy whose unfilled numeric segments interpolate ``(xs, us)``."""
        xs = np.asarray(xs, dtype=float)
        us = np.asarray(us, dtype=float)
        segs = []
        for seg in self.segments:
            if seg.kind is SegmentKind.NUMERIC and seg.table_x is None:
                inside = (xs >= seg.x_lo - TOL) & (xs <= seg.x_hi + TOL)
                segs.append(replace(seg, table_x=tuple(xs[inside]), table_u=tuple(us[inside])))
            else:
                segs.append(seg)
        return replace(self, segments=tuple(segs))

    # -- evaluation -----------------------------------------------------

    @property
    def resolved(self) -> bool:
        return all(seg.resolved for seg in self.segments)

    def _segment_values(self, seg: Segment, x: np.ndarray) -> np.ndarray:
        if seg.kind is SegmentKind.ZERO:
            return np.zeros_like(x)
        if seg.kind is SegmentKind.SATURATED:
            return np.full_like(x, self.psi)
        if seg.kind is SegmentKind.AFFINE:
            return seg.slope * x + seg.intercept
        if seg.table_x is None:
            raise UnresolvedPolicyError(
                f"policy {self.label or '<unnamed>'} is only determined numerically on "
                f"({seg.x_lo:.6g}, {seg.x_hi:.6g}]; fill it from the value-iteration oracle"
            )
        return np.interp(x, seg.table_x, seg.table_u)

    def evaluate(self, x) -> np.ndarray:
        """Vectorised evaluation; values are clipped into ``[0, psi]``."""
        x = np.asarray(x, dtype=float)
        if np.any(x < -TOL) or np.any(x > self.psi + TOL):
            raise DomainError(f"policy evaluated outside [0, {self.psi}]")
        bounds = np.array([seg.x_hi for seg in self.segments[:-1]]) + TOL
        which = np.searchsorted(bounds, x, side="left")
        out = np.empty_like(x)
        for i, seg in enumerate(self.segments):
            mask = which == i
            if np.any(mask):
                out[mask] = self._segment_values(seg, x[mask])
        return np.clip(out, 0.0, self.psi)

    def __call__(self, x: float) -> float:
        return float(self.evaluate(np.array([x]))[0])

    @property
    def jumps(self) -> list[float]:
        """Boundaries where the rule is discontinuous."""
        out = []
        for left, right in zip(self.segments, self.segments[1:]):
            if not (left.resolved and right.resolved):
                out.append(left.x_hi)
                continue
            x = np.array([left.x_hi])
            lhs = self._segment_values(left, x)[0]
            rhs = self._segment_values(right, x)[0]
            if abs(lhs - rhs) > TOL:
                out.append(left.x_hi)
        return out

    def rows(self) -> list[dict]:
        return [
            {
                "x_lo": seg.x_lo,
                "x_hi": seg.x_hi,
                "kind": seg.kind.value,
                "slope": seg.slope,
                "intercept": seg.intercept,
                "source": seg.source.value,
            }
            for seg in self.segments
        ]


def build(psi: float, pieces: Iterable[Segment], label: str = "") -> PiecewisePolicy:
    """Assemble a policy, dropping segments that collapsed to zero width."""
    segs = [s for s in pieces if s.x_hi - s.x_lo > TOL]
    if segs:
        segs[0] = replace(segs[0], x_lo=0.0)
        segs[-1] = replace(segs[-1], x_hi=psi)
    return PiecewisePolicy(psi, tuple(segs), label)
