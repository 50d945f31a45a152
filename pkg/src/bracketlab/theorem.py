"""Machine checks for the counting-condition equivalence.

Sufficiency is checked by exhaustive enumeration: parameters on the indicator
conditions must agree with bracket-difference membership on every sequence up
to a length bound, with the final activation an exact multiple of the
increment. Necessity is checked by bounded falsification: parameters off the
conditions must admit a short counterexample sequence. Parameters within a
small deviation floor of the conditions are excluded from sampling — near the
boundary (say u = 1 - 1e-9) the first disagreement can exceed any practical
length bound, so that regime is a documented non-goal of the bounded search.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .brackets import BracketSeq, LengthCapExceeded, ENUMERATION_CAP, enumerate_all, in_bb, parse, stats
from .lrn import (
    DEFAULT_EPSILON,
    DEFAULT_INDICATOR_TOL,
    IndicatorReport,
    IndicatorsViolated,
    LrnParams,
    accepts_lrn,
    final_activation,
    indicators,
    satisfies_exactly,
)

ZERO = "zero"
NONZERO = "nonzero"

#: the six sequences the conditions are derived from, with the required
#: behaviour of the final activation
TABLE1 = (
    (1, "(", NONZERO),
    (2, ")", NONZERO),
    (3, "()", ZERO),
    (4, "((", NONZERO),
    (5, "(())", ZERO),
    (6, "()()", ZERO),
)

EQUIVALENT_UP_TO_LEN = "equivalent_up_to_len"
FALSIFIED = "indicators_fail_and_counterexample_found"
INCONSISTENT = "inconsistent"

DEFAULT_MAX_LEN = 12
DEFAULT_DEVIATION_FLOOR = 0.01
#: rejection threshold for |a|, |b| while sampling (tiny increments make the
#: one-token behaviour degenerate)
MIN_INCREMENT = 0.05
SAMPLE_SPAN = 2.0


@dataclass(frozen=True)
class CaseResult:
    case_id: int
    sequence: BracketSeq
    required: str
    observed_h: float
    satisfied: bool

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "sequence": self.sequence.text,
            "required": self.required,
            "observed_h": self.observed_h,
            "satisfied": self.satisfied,
        }


@dataclass(frozen=True)
class EquivalenceReport:
    max_len: int
    epsilon: float
    indicator_report: IndicatorReport
    counterexample: BracketSeq | None
    verdict: str

    def to_dict(self) -> dict:
        return {
            "max_len": self.max_len,
            "epsilon": self.epsilon,
            "indicators": self.indicator_report.to_dict(),
            "counterexample": None if self.counterexample is None else self.counterexample.text,
            "verdict": self.verdict,
        }


def table1_cases(params: LrnParams, epsilon: float = DEFAULT_EPSILON) -> list[CaseResult]:
    """Evaluate the six derivation sequences from h0 = 0."""
    results = []
    for case_id, text, required in TABLE1:
        h = final_activation(params, parse(text), 0.0)
        near_zero = abs(h) <= epsilon
        satisfied = near_zero if required == ZERO else not near_zero
        results.append(CaseResult(case_id, parse(text), required, h, satisfied))
    return results


def find_counterexample(
    params: LrnParams,
    max_len: int = DEFAULT_MAX_LEN,
    epsilon: float = DEFAULT_EPSILON,
    cap: int = ENUMERATION_CAP,
) -> BracketSeq | None:
    """Smallest sequence (by length, then lexicographic) where acceptance
    disagrees with balanced-bracket membership; None if none up to max_len."""
    if max_len > cap:
        raise LengthCapExceeded(max_len, cap)
    for length in range(max_len + 1):
        for seq in enumerate_all(length, cap=cap):
            if accepts_lrn(params, seq, epsilon) != in_bb(seq):
                return seq
    return None


def verify_equivalence(
    params: LrnParams,
    max_len: int = DEFAULT_MAX_LEN,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_INDICATOR_TOL,
) -> EquivalenceReport:
    """Cross-tabulate the indicator check against counterexample search.

    Both directions agreeing gives EQUIVALENT_UP_TO_LEN or FALSIFIED; either
    theorem-contradicting combination yields INCONSISTENT, which is a bug or
    an epsilon artifact and carries full diagnostics in the report.
    """
    report = indicators(params, tol)
    counterexample = find_counterexample(params, max_len, epsilon)
    if report.holds and counterexample is None:
        verdict = EQUIVALENT_UP_TO_LEN
    elif not report.holds and counterexample is not None:
        verdict = FALSIFIED
    else:
        verdict = INCONSISTENT
    return EquivalenceReport(max_len, epsilon, report, counterexample, verdict)


def check_closed_form(params: LrnParams, max_len: int = 10, cap: int = ENUMERATION_CAP) -> bool:
    """True iff the forward fold equals diff * a exactly on every sequence up
    to max_len. Requires params exactly on the indicator conditions."""
    if not satisfies_exactly(params):
        raise IndicatorsViolated(
            f"closed-form check needs exact conditions; got a={params.a}, "
            f"b={params.b}, u={params.u}"
        )
    for length in range(max_len + 1):
        for seq in enumerate_all(length, cap=cap):
            if final_activation(params, seq, 0.0) != stats(seq).diff * params.a:
                return False
    return True


def sample_violating_params(
    rng: np.random.Generator,
    deviation_floor: float = DEFAULT_DEVIATION_FLOOR,
    span: float = SAMPLE_SPAN,
    min_increment: float = MIN_INCREMENT,
) -> LrnParams:
    """Uniform draws on [-span, span]^4, rejected while the increments are
    tiny or both indicator deviations sit within the floor."""
    while True:
        w_open, w_close, u, w_b = (float(x) for x in rng.uniform(-span, span, size=4))
        params = LrnParams(w_open=w_open, w_close=w_close, u=u, w_b=w_b)
        if abs(params.a) < min_increment or abs(params.b) < min_increment:
            continue
        ab_dev = abs(params.a / params.b + 1.0)
        u_dev = abs(params.u - 1.0)
        if ab_dev <= deviation_floor and u_dev <= deviation_floor:
            continue
        return params


@dataclass
class SweepResult:
    n_samples: int
    max_len: int
    epsilon: float
    tol: float
    deviation_floor: float
    verdicts: dict[str, int]
    max_counterexample_len: int
    inconsistent: list[dict] = field(default_factory=list)

    @property
    def n_inconsistent(self) -> int:
        return self.verdicts.get(INCONSISTENT, 0)

    def to_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "max_len": self.max_len,
            "epsilon": self.epsilon,
            "tol": self.tol,
            "deviation_floor": self.deviation_floor,
            "verdicts": dict(self.verdicts),
            "max_counterexample_len": self.max_counterexample_len,
            "inconsistent": list(self.inconsistent),
        }


def falsification_sweep(
    n_samples: int = 1000,
    seed: int = 0,
    max_len: int = DEFAULT_MAX_LEN,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = DEFAULT_INDICATOR_TOL,
    deviation_floor: float = DEFAULT_DEVIATION_FLOOR,
) -> SweepResult:
    """Sample off-condition parameters and verify each is falsified in bound."""
    rng = np.random.default_rng(seed)
    verdicts: dict[str, int] = {EQUIVALENT_UP_TO_LEN: 0, FALSIFIED: 0, INCONSISTENT: 0}
    inconsistent = []
    max_cex_len = 0
    for _ in range(n_samples):
        params = sample_violating_params(rng, deviation_floor=deviation_floor)
        report = verify_equivalence(params, max_len=max_len, epsilon=epsilon, tol=tol)
        verdicts[report.verdict] += 1
        if report.counterexample is not None:
            max_cex_len = max(max_cex_len, len(report.counterexample))
        if report.verdict == INCONSISTENT:
            inconsistent.append({"params": params.to_dict(), "report": report.to_dict()})
    return SweepResult(
        n_samples=n_samples,
        max_len=max_len,
        epsilon=epsilon,
        tol=tol,
        deviation_floor=deviation_floor,
        verdicts=verdicts,
        max_counterexample_len=max_cex_len,
        inconsistent=inconsistent,
    )


@dataclass
class AgreementResult:
    min_len: int
    max_len: int
    epsilon: float
    sequences_checked: int
    mismatches: int
    first_mismatch: str | None
    closed_form_exact: bool

    def to_dict(self) -> dict:
        return {
            "min_len": self.min_len,
            "max_len": self.max_len,
            "epsilon": self.epsilon,
            "sequences_checked": self.sequences_checked,
            "mismatches": self.mismatches,
            "first_mismatch": self.first_mismatch,
            "closed_form_exact": self.closed_form_exact,
        }


def exhaustive_agreement(
    params: LrnParams,
    max_len: int = DEFAULT_MAX_LEN,
    epsilon: float = DEFAULT_EPSILON,
    min_len: int = 0,
) -> AgreementResult:
    """Count acceptance/membership mismatches over all sequences of lengths
    min_len..max_len, and check final-h exactness against diff * a."""
    checked = 0
    mismatches = 0
    first: str | None = None
    exact = True
    for length in range(min_len, max_len + 1):
        for seq in enumerate_all(length):
            checked += 1
            h = final_activation(params, seq, 0.0)
            if (abs(h) <= epsilon) != in_bb(seq):
                mismatches += 1
                if first is None:
                    first = seq.text
            if h != stats(seq).diff * params.a:
                exact = False
    return AgreementResult(min_len, max_len, epsilon, checked, mismatches, first, exact)
