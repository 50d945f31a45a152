"""Single-cell linear recurrent network.

Update rule: h_t = W x_t + U h_{t-1} + W_b with one-hot inputs, which reduces
to two effective per-token increments

    a = w_open + w_b   (token '(')
    b = w_close + w_b  (token ')')

so each step is h_t = a + u*h_{t-1} or h_t = b + u*h_{t-1}. The cell counts
exactly (final h equal to a times the bracket difference, zero precisely on
balanced input) iff a/b = -1 and u = 1; `indicators` measures how far a given
parameter set is from those two conditions.

Acceptance applies a zero check to the final activation only, with a small
epsilon so that verification never compares floats for inequality against
an exact 0.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .brackets import BracketSeq, Token

#: |b| below this reports the a/b ratio as undefined instead of +/-inf.
DEGENERATE_B = 1e-12

#: default tolerance for the indicator `holds` flag in verification mode
DEFAULT_INDICATOR_TOL = 1e-6

#: default zero-check epsilon for acceptance
DEFAULT_EPSILON = 1e-9


class IndicatorsViolated(ValueError):
    """Raised by checked closed-form paths when a/b != -1 or u != 1 exactly."""


@dataclass(frozen=True)
class LrnParams:
    w_open: float
    w_close: float
    u: float
    w_b: float

    def __post_init__(self):
        for name in ("w_open", "w_close", "u", "w_b"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite, got {getattr(self, name)}")

    @property
    def a(self) -> float:
        return self.w_open + self.w_b

    @property
    def b(self) -> float:
        return self.w_close + self.w_b

    def to_dict(self) -> dict:
        return {
            "w_open": self.w_open,
            "w_close": self.w_close,
            "u": self.u,
            "w_b": self.w_b,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LrnParams":
        return cls(
            w_open=float(d["w_open"]),
            w_close=float(d["w_close"]),
            u=float(d["u"]),
            w_b=float(d["w_b"]),
        )


def from_increments(a: float, b: float, u: float) -> LrnParams:
    """Params with w_b = 0 so the increments are exactly (a, b)."""
    return LrnParams(w_open=a, w_close=b, u=u, w_b=0.0)


def exact_params(a: float) -> LrnParams:
    """Params satisfying both indicator conditions exactly, with increment a."""
    return from_increments(a, -a, 1.0)


CANONICAL = exact_params(1.0)


@dataclass(frozen=True)
class Trajectory:
    h0: float
    h: tuple[float, ...]

    @property
    def final(self) -> float:
        return self.h[-1] if self.h else self.h0


@dataclass(frozen=True)
class IndicatorReport:
    """Distance of a parameter set from the two counting conditions.

    ab_ratio and ab_deviation are None when |b| < DEGENERATE_B; `holds` is
    False in that case regardless of u.
    """

    ab_ratio: float | None
    u_value: float
    ab_deviation: float | None
    u_deviation: float
    holds: bool
    tol: float

    def to_dict(self) -> dict:
        return {
            "ab_ratio": self.ab_ratio,
            "u_value": self.u_value,
            "ab_deviation": self.ab_deviation,
            "u_deviation": self.u_deviation,
            "holds": self.holds,
            "tol": self.tol,
        }


def forward_step(params: LrnParams, h_prev: float, token: Token) -> float:
    inc = params.a if token is Token.OPEN else params.b
    return inc + params.u * h_prev


def forward(params: LrnParams, seq: BracketSeq, h0: float = 0.0) -> Trajectory:
    """Fold the update rule over the sequence, recording every activation."""
    h = h0
    trace = []
    for token in seq:
        h = forward_step(params, h, token)
        trace.append(h)
    return Trajectory(h0=h0, h=tuple(trace))


def final_activation(params: LrnParams, seq: BracketSeq, h0: float = 0.0) -> float:
    """Final h without materialising the trajectory."""
    h = h0
    a, b, u = params.a, params.b, params.u
    for token in seq:
        h = (a if token is Token.OPEN else b) + u * h
    return h


def indicators(params: LrnParams, tol: float = DEFAULT_INDICATOR_TOL) -> IndicatorReport:
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    u_dev = abs(params.u - 1.0)
    if abs(params.b) < DEGENERATE_B:
        return IndicatorReport(
            ab_ratio=None,
            u_value=params.u,
            ab_deviation=None,
            u_deviation=u_dev,
            holds=False,
            tol=tol,
        )
    ratio = params.a / params.b
    ab_dev = abs(ratio - (-1.0))
    return IndicatorReport(
        ab_ratio=ratio,
        u_value=params.u,
        ab_deviation=ab_dev,
        u_deviation=u_dev,
        holds=ab_dev <= tol and u_dev <= tol,
        tol=tol,
    )


def satisfies_exactly(params: LrnParams) -> bool:
    """Both conditions with zero tolerance: a == -b (b nonzero) and u == 1."""
    return params.b != 0.0 and params.a == -params.b and params.u == 1.0


def accepts_lrn(params: LrnParams, seq: BracketSeq, epsilon: float = DEFAULT_EPSILON) -> bool:
    """Zero check on the final activation from h0 = 0."""
    if epsilon < 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon}")
    return abs(final_activation(params, seq, 0.0)) <= epsilon


def closed_form(params: LrnParams, n_open: int, n_close: int, checked: bool = False) -> float:
    """(n_open - n_close) * a.

    Matches the forward fold whenever both indicator conditions hold exactly
    and the partial sums of a are exactly representable (any integer a, and
    dyadic values like -3.5, qualify; an arbitrary real may drift in the last
    ulp). With checked=True, params off the indicator conditions raise
    IndicatorsViolated instead of returning a meaningless number.
    """
    if checked and not satisfies_exactly(params):
        raise IndicatorsViolated(
            f"closed form needs a/b = -1 and u = 1 exactly; got a={params.a}, "
            f"b={params.b}, u={params.u}"
        )
    return (n_open - n_close) * params.a


def params_to_json(params: LrnParams) -> str:
    # json round-trips Python floats through repr: shortest exact decimal.
    return json.dumps(params.to_dict(), sort_keys=True)


def params_from_json(text: str) -> LrnParams:
    return LrnParams.from_dict(json.loads(text))


def save_params(params: LrnParams, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(params_to_json(params))
        fh.write("\n")


def load_params(path) -> LrnParams:
    with open(path, "r", encoding="ascii") as fh:
        return params_from_json(fh.read())
