"""Bracket sequences: parsing, membership, labels, generation.

The alphabet has exactly two tokens, '(' and ')'. A sequence belongs to the
balanced-bracket language when its opening and closing counts are equal,
regardless of order; Dyck-1 additionally requires every prefix to have at
least as many '(' as ')'.

One-hot convention, fixed here because the recurrent cell's derived
increments depend on it: Open -> (1, 0), Close -> (0, 1). Enumeration is
lexicographic with Open < Close so counterexamples reproduce across runs.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterator

import numpy as np

ENUMERATION_CAP = 20

POS = "pos"
NONPOS = "nonpos"
ZERO = "zero"
NEG = "neg"

BINARY_LABELS = (POS, NONPOS)
TERNARY_LABELS = (POS, ZERO, NEG)


class InvalidCharacter(ValueError):
    """Raised when parsing hits anything other than '(' or ')'."""

    def __init__(self, char: str, position: int):
        super().__init__(
            f"invalid character {char!r} at position {position}; expected '(' or ')'"
        )
        self.char = char
        self.position = position


class LengthCapExceeded(ValueError):
    """Raised when an exhaustive enumeration would exceed the configured cap."""

    def __init__(self, length: int, cap: int):
        super().__init__(f"length {length} exceeds enumeration cap {cap}")
        self.length = length
        self.cap = cap


class Token(enum.Enum):
    OPEN = "("
    CLOSE = ")"

    @property
    def one_hot(self) -> tuple[int, int]:
        return (1, 0) if self is Token.OPEN else (0, 1)


@dataclass(frozen=True)
class BracketSeq:
    """Immutable sequence of bracket tokens."""

    tokens: tuple[Token, ...]

    def __len__(self) -> int:
        return len(self.tokens)

    def __iter__(self) -> Iterator[Token]:
        return iter(self.tokens)

    @property
    def text(self) -> str:
        return "".join(t.value for t in self.tokens)


EMPTY = BracketSeq(())


@dataclass(frozen=True)
class BracketStats:
    n_open: int
    n_close: int

    @property
    def diff(self) -> int:
        return self.n_open - self.n_close


def parse(text: str) -> BracketSeq:
    """Parse '(' / ')' text into a BracketSeq.

    Raises InvalidCharacter (with the 0-based position) for anything else.
    """
    tokens = []
    for i, ch in enumerate(text):
        if ch == "(":
            tokens.append(Token.OPEN)
        elif ch == ")":
            tokens.append(Token.CLOSE)
        else:
            raise InvalidCharacter(ch, i)
    return BracketSeq(tuple(tokens))


def to_text(seq: BracketSeq) -> str:
    return seq.text


def stats(seq: BracketSeq) -> BracketStats:
    n_open = sum(1 for t in seq if t is Token.OPEN)
    return BracketStats(n_open=n_open, n_close=len(seq) - n_open)


def in_bb(seq: BracketSeq) -> bool:
    """Membership in the balanced-bracket language: equal counts, any order."""
    return stats(seq).diff == 0


def is_dyck1(seq: BracketSeq) -> bool:
    """Balanced overall and no prefix dips below zero."""
    depth = 0
    for t in seq:
        depth += 1 if t is Token.OPEN else -1
        if depth < 0:
            return False
    return depth == 0


def enumerate_all(length: int, cap: int = ENUMERATION_CAP) -> Iterator[BracketSeq]:
    """Yield all 2**length sequences in lexicographic order (Open < Close)."""
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    if length > cap:
        raise LengthCapExceeded(length, cap)
    for code in range(1 << length):
        tokens = tuple(
            Token.OPEN if (code >> (length - 1 - pos)) & 1 == 0 else Token.CLOSE
            for pos in range(length)
        )
        yield BracketSeq(tokens)


def sample_random(length: int, rng: np.random.Generator) -> BracketSeq:
    """Each position is Open or Close with probability 1/2 (0 draws Open)."""
    if length < 0:
        raise ValueError(f"length must be non-negative, got {length}")
    draws = rng.integers(0, 2, size=length)
    return BracketSeq(tuple(Token.OPEN if d == 0 else Token.CLOSE for d in draws))


def label_binary(seq: BracketSeq) -> str:
    return POS if stats(seq).diff > 0 else NONPOS


def label_ternary(seq: BracketSeq) -> str:
    d = stats(seq).diff
    if d > 0:
        return POS
    return ZERO if d == 0 else NEG


def write_dataset(path, rows) -> None:
    """Write one sequence per line; a label, when present, is tab-separated."""
    with open(path, "w", encoding="ascii") as fh:
        for row in rows:
            seq, label = row if isinstance(row, tuple) else (row, None)
            if label is None:
                fh.write(f"{seq.text}\n")
            else:
                fh.write(f"{seq.text}\t{label}\n")


def read_dataset(path) -> list[tuple[BracketSeq, str | None]]:
    out = []
    with open(path, "r", encoding="ascii") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            text, _, label = line.partition("\t")
            out.append((parse(text), label or None))
    return out
