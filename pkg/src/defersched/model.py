"""Model parameters and small value types shared by every module."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

# Absolute tolerance (service units) for every threshold comparison.
TOL = 1e-9


class DomainError(ValueError):
    """An argument lies outside the domain an operation is defined on."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    Carries the last residual and, when available, the last iterate so the
    caller can inspect how far off the run ended.
    """

    def __init__(self, message: str, residual: float, iterations: int, last=None, previous=None):
        super().__init__(f"{message} (residual={residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations
        self.last = last
        self.previous = previous


@dataclass(frozen=True)
class ModelParams:
    """Arrival probability ``p``, per-request demand ``psi`` and waiting cost ``d``.

    ``allow_edge`` admits ``p`` in {0, 1}; only the simulator and the sweep
    construct such instances.
    """

    p: float
    psi: float
    d: float
    allow_edge: bool = field(default=False, compare=False)

    def __post_init__(self) -> None:
        for name in ("p", "psi", "d"):
            value = getattr(self, name)
            if not isinstance(value, (int, float)) or not math.isfinite(value):
                raise DomainError(f"{name} must be a finite number, got {value!r}")
        if self.allow_edge:
            if not 0.0 <= self.p <= 1.0:
                raise DomainError(f"p must lie in [0, 1], got {self.p}")
        elif not 0.0 < self.p < 1.0:
            raise DomainError(f"p must lie in (0, 1), got {self.p}")
        if self.psi <= 0:
            raise DomainError(f"psi must be positive, got {self.psi}")
        if self.d <= 0:
            raise DomainError(f"d must be positive, got {self.d}")

    @property
    def is_edge(self) -> bool:
        return self.p in (0.0, 1.0)

    def with_p(self, p: float) -> "ModelParams":
        return ModelParams(p, self.psi, self.d, allow_edge=self.allow_edge)

    def as_dict(self) -> dict:
        return {"p": self.p, "psi": self.psi, "d": self.d}


@dataclass(frozen=True)
class SequencePair:
    """One element ``(a_k, b_k)`` of a coefficient recursion.

    ``index`` is ``None`` for the limit of the sequence.
    """

    index: Optional[int]
    a: float
    b: float


@dataclass(frozen=True)
class GeneralDemandTable:
    """Demand ``psi_i`` arrives with probability ``p_i``; nothing otherwise."""

    entries: tuple[tuple[float, float], ...]

    def __init__(self, entries: Sequence[tuple[float, float]]):
        entries = tuple((float(s), float(q)) for s, q in entries)
        if not entries:
            raise DomainError("demand table must have at least one entry")
        sizes = [s for s, _ in entries]
        if any(s <= 0 for s in sizes):
            raise DomainError("demand sizes must be positive")
        if len(set(sizes)) != len(sizes):
            raise DomainError("demand sizes must be pairwise distinct")
        if any(q <= 0 for _, q in entries):
            raise DomainError("demand probabilities must be positive")
        total = sum(q for _, q in entries)
        if total > 1.0 + 1e-12:
            raise DomainError(f"demand probabilities sum to {total} > 1")
        object.__setattr__(self, "entries", entries)

    @classmethod
    def parse(cls, text: str) -> "GeneralDemandTable":
        """Parse ``"psi1:p1,psi2:p2"``."""
        pairs = []
        for chunk in text.split(","):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                size, prob = chunk.split(":")
                pairs.append((float(size), float(prob)))
            except ValueError as exc:
                raise DomainError(f"bad demand table entry {chunk!r}; expected psi:p") from exc
        return cls(pairs)

    @property
    def total_probability(self) -> float:
        return sum(q for _, q in self.entries)

    @property
    def mean_demand(self) -> float:
        """Demand of the equivalent Bernoulli model, conditional on an arrival."""
        return sum(s * q for s, q in self.entries) / self.total_probability
