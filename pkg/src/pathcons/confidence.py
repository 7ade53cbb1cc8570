"""Majority-vote tallying and the beta confidence gate.

The confidence value for a tally (v_m majority answers out of n) is the
posterior probability that the majority answer's true generation probability
exceeds 1/2, under a uniform prior:

    integral over [1/2, 1] of p^v_m * (1-p)^(n-v_m) dp
    ---------------------------------------------------
    integral over [0, 1]  of p^v_m * (1-p)^(n-v_m) dp

Both integrals are polynomials in p with integer exponents, so they are
evaluated exactly in rational arithmetic and only converted to float at the
end.  That keeps the gate bit-reproducible and lets tests pin tight
tolerances.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import comb
from typing import Iterable, Optional

from .core import VoteTally


class EmptyTallyError(ValueError):
    """Raised when asked to tally an empty answer list."""


@dataclass(frozen=True)
class ConfidenceReport:
    value: float
    v_m: int
    n: int
    threshold: float
    confident: bool


def tally(answers: Iterable[str]) -> VoteTally:
    """Count answers and pick the majority, breaking ties by first-seen order.

    Answerless entries must already be filtered out by the caller.
    """
    counts: dict[str, int] = {}
    for answer in answers:
        counts[answer] = counts.get(answer, 0) + 1
    if not counts:
        raise EmptyTallyError("cannot tally an empty answer list")
    # dict preserves insertion order, so max() on items keeps first-seen wins.
    majority, v_m = max(counts.items(), key=lambda item: item[1])
    return VoteTally(counts=counts, n=sum(counts.values()), majority_answer=majority, v_m=v_m)


@lru_cache(maxsize=4096)
def _beta_confidence_fraction(v_m: int, n: int) -> Fraction:
    a, b = v_m, n - v_m
    half = Fraction(1, 2)
    # integral_{1/2}^{1} p^a (1-p)^b dp, expanded term by term
    upper = Fraction(0)
    for j in range(b + 1):
        exponent = a + j + 1
        coeff = Fraction((-1) ** j * comb(b, j), exponent)
        upper += coeff * (1 - half**exponent)
    # complete beta integral B(a+1, b+1)
    total = Fraction(1, (a + b + 1) * comb(a + b, a))
    return upper / total


def beta_confidence(v_m: int, n: int) -> float:
    """Exact probability mass above 1/2 for the majority share posterior.

    Strictly increasing in v_m at fixed n; beta_confidence(v, n) and
    beta_confidence(n - v, n) sum to 1.
    """
    if n < 1 or not 0 <= v_m <= n:
        raise ValueError(f"invalid tally shape: v_m={v_m}, n={n}")
    return float(_beta_confidence_fraction(v_m, n))


def confidence_gate(vote: Optional[VoteTally], threshold: float) -> ConfidenceReport:
    """Evaluate the gate for a tally (or None, meaning no answers yet).

    The comparison is strict, so threshold 1.0 never passes and reproduces the
    plain self-consistency baseline; threshold 0 passes for any nonempty
    tally.
    """
    if not 0 <= threshold <= 1:
        raise ValueError("threshold must be in [0, 1]")
    if vote is None:
        return ConfidenceReport(value=0.0, v_m=0, n=0, threshold=threshold, confident=False)
    value = beta_confidence(vote.v_m, vote.n)
    return ConfidenceReport(
        value=value,
        v_m=vote.v_m,
        n=vote.n,
        threshold=threshold,
        confident=value > threshold,
    )


def tally_or_none(answers: Iterable[Optional[str]]) -> Optional[VoteTally]:
    """Tally the non-null answers; None when every entry is answerless."""
    answered = [a for a in answers if a is not None]
    if not answered:
        return None
    return tally(answered)
