"""Exact and Monte Carlo evaluation of the one-shot prefix-selection model.

The model: N branches, two possible answers, base correct rate p0.  After the
first N/2 branches a majority vote picks the guiding answer; the remaining
N/2 branches run at p0 + delta_p if the vote was right, p0 - delta_p if it
was wrong.  Everything here is computed from exact binomial tail sums (no
series expansion); the first-order identity p_inc + p_dec = 2 p_vote and the
"safe when p_vote >= 1/2" theorem are exposed as checkable quantities rather
than assumptions.

A vote that ties counts as correct-in-the-majority whenever the tail's lower
limit ceil(N/4) admits the tie term, i.e. when N is divisible by 4; the Monte
Carlo simulation applies the same rule so the two routes agree.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Literal, Sequence, TextIO

Direction = Literal["inc", "dec"]


@dataclass(frozen=True)
class AnalysisParams:
    p0: float
    delta_p: float
    n_branches: int

    def __post_init__(self) -> None:
        # The closed upper boundary admits the degenerate-certainty case,
        # where delta_p is forced to 0 by the constraint below.
        if not 0 < self.p0 <= 1:
            raise ValueError("p0 must be in (0, 1]")
        if not 0 <= self.delta_p <= min(self.p0, 1 - self.p0):
            raise ValueError("delta_p must satisfy 0 <= delta_p <= min(p0, 1-p0)")
        if self.n_branches <= 0 or self.n_branches % 2:
            raise ValueError("n_branches must be even and positive")


@dataclass(frozen=True)
class AnalysisResult:
    p_vote: float
    p_inc: float
    p_dec: float
    p_correct_prime: float
    p_correct: float


@dataclass(frozen=True)
class MonteCarloEstimate:
    estimate: float
    stderr: float
    trials: int


def _majority_tail(p: float, half: int) -> float:
    """P(correct count is in the majority among `half` draws at rate p):
    sum over k from ceil(half/2) to half of C(half,k) p^k (1-p)^(half-k).

    Terms are evaluated with exact binomial coefficients and log-space powers
    so the sum stays accurate for branch counts into the hundreds.
    """
    if p <= 0.0:
        return 0.0
    if p >= 1.0:
        return 1.0
    log_p = math.log(p)
    log_q = math.log1p(-p)
    total = 0.0
    for k in range(math.ceil(half / 2), half + 1):
        total += math.comb(half, k) * math.exp(k * log_p + (half - k) * log_q)
    return min(total, 1.0)


def p_vote(p0: float, n_branches: int) -> float:
    """Probability the correct answer leads the midpoint vote."""
    if n_branches <= 0 or n_branches % 2:
        raise ValueError("n_branches must be even and positive")
    return _majority_tail(p0, n_branches // 2)


def p_shift(p0: float, delta_p: float, n_branches: int, direction: Direction) -> float:
    """Same tail sum at the shifted rate: p0 + delta_p for "inc" (a correct
    prefix was selected), p0 - delta_p for "dec"."""
    if direction == "inc":
        shifted = p0 + delta_p
    elif direction == "dec":
        shifted = p0 - delta_p
    else:
        raise ValueError(f"direction must be 'inc' or 'dec', got {direction!r}")
    if not 0 <= shifted <= 1:
        raise ValueError("shifted probability escapes [0, 1]")
    if n_branches <= 0 or n_branches % 2:
        raise ValueError("n_branches must be even and positive")
    return _majority_tail(shifted, n_branches // 2)


def exact_result(params: AnalysisParams) -> AnalysisResult:
    vote = p_vote(params.p0, params.n_branches)
    inc = p_shift(params.p0, params.delta_p, params.n_branches, "inc")
    dec = p_shift(params.p0, params.delta_p, params.n_branches, "dec")
    prime = vote * inc + (1 - vote) * dec
    return AnalysisResult(p_vote=vote, p_inc=inc, p_dec=dec, p_correct_prime=prime, p_correct=vote)


def p_correct_prime(params: AnalysisParams) -> float:
    """Overall success probability after one prefix-selection round:
    p_vote * p_inc + (1 - p_vote) * p_dec."""
    return exact_result(params).p_correct_prime


def taylor_gap(params: AnalysisParams) -> float:
    """|p_inc + p_dec - 2 p_vote|.

    Zero to first order in delta_p; the residual shrinks quadratically as
    delta_p shrinks, which tests verify by a halving ratio check.
    """
    result = exact_result(params)
    return abs(result.p_inc + result.p_dec - 2 * result.p_vote)


def safety_margin(params: AnalysisParams) -> float:
    """p_correct_prime - p_correct.

    Equals p_vote*(p_inc - p_vote) - (1 - p_vote)*(p_vote - p_dec), which is
    nonnegative to first order exactly when p_vote >= 1/2; below 1/2 the
    margin can go genuinely negative.
    """
    result = exact_result(params)
    return result.p_correct_prime - result.p_correct


def monte_carlo(
    params: AnalysisParams, trials: int, rng: random.Random
) -> MonteCarloEstimate:
    """Simulate the two-stage process and estimate the second-half success
    rate, with its binomial standard error."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    half = params.n_branches // 2
    need = math.ceil(half / 2)
    p_up = params.p0 + params.delta_p
    p_down = params.p0 - params.delta_p
    hits = 0
    for _ in range(trials):
        first = 0
        for _ in range(half):
            if rng.random() < params.p0:
                first += 1
        second_rate = p_up if first >= need else p_down
        second = 0
        for _ in range(half):
            if rng.random() < second_rate:
                second += 1
        if second >= need:
            hits += 1
    estimate = hits / trials
    stderr = math.sqrt(estimate * (1 - estimate) / trials)
    return MonteCarloEstimate(estimate=estimate, stderr=stderr, trials=trials)


SWEEP_COLUMNS = ("p0", "delta_p", "N", "p_vote", "p_inc", "p_dec", "p_correct_prime", "margin")
# Tolerance absorbing the second-order terms the first-order argument drops.
SAFETY_TOLERANCE = 1e-3


@dataclass(frozen=True)
class SweepRow:
    params: AnalysisParams
    result: AnalysisResult
    margin: float
    flagged: bool


def sweep_grid(
    p0_values: Sequence[float],
    delta_p_values: Sequence[float],
    n_values: Sequence[int],
) -> list[SweepRow]:
    """Exact results over the cross product, flagging points where the
    safety theorem's premise holds but the margin still dips below
    -SAFETY_TOLERANCE."""
    rows = []
    for p0 in p0_values:
        for delta_p in delta_p_values:
            for n_branches in n_values:
                params = AnalysisParams(p0=p0, delta_p=delta_p, n_branches=n_branches)
                result = exact_result(params)
                margin = result.p_correct_prime - result.p_correct
                flagged = result.p_vote >= 0.5 and margin < -SAFETY_TOLERANCE
                rows.append(SweepRow(params=params, result=result, margin=margin, flagged=flagged))
    return rows


def write_sweep_table(rows: Sequence[SweepRow], out: TextIO, delimiter: str = ",") -> None:
    out.write(delimiter.join(SWEEP_COLUMNS + ("flagged",)) + "\n")
    for row in rows:
        fields = (
            repr(row.params.p0),
            repr(row.params.delta_p),
            str(row.params.n_branches),
            repr(row.result.p_vote),
            repr(row.result.p_inc),
            repr(row.result.p_dec),
            repr(row.result.p_correct_prime),
            repr(row.margin),
            "true" if row.flagged else "false",
        )
        out.write(delimiter.join(fields) + "\n")
