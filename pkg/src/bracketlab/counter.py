"""General counter machine with k integer counters, plus the balanced-bracket
instance used as the ground-truth acceptor.

A machine is plain data: update and transition tables keyed by
(token, state, zero-check mask), so machines serialize to JSON and compare by
value. Counters are exact Python integers; nothing in this module rounds.

The acceptance convention used throughout the lab is counter-only: a 1-counter
machine accepts a sequence iff its counter is exactly 0 after the last token.
The state/mask acceptance set is stored for completeness but not consulted.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field

from .brackets import BracketSeq

MACHINE_SCHEMA_VERSION = 1


class UnknownToken(ValueError):
    def __init__(self, token: str, position: int | None = None):
        where = "" if position is None else f" at position {position}"
        super().__init__(f"token {token!r}{where} not in machine alphabet")
        self.token = token
        self.position = position


class UnsupportedArity(ValueError):
    def __init__(self, k: int):
        super().__init__(f"counter-zero acceptance needs k = 1, machine has k = {k}")
        self.k = k


@dataclass(frozen=True)
class Add:
    amount: int


@dataclass(frozen=True)
class SetZero:
    pass


Update = Add | SetZero
SET_ZERO = SetZero()


def apply_update(update: Update, value: int) -> int:
    if isinstance(update, Add):
        return value + update.amount
    return 0


def zero_check(values: tuple[int, ...]) -> tuple[int, ...]:
    """Mask with 0 where a counter is exactly zero, 1 otherwise."""
    return tuple(0 if v == 0 else 1 for v in values)


@dataclass(frozen=True)
class MachineConfig:
    state: str
    counters: tuple[int, ...]


TableKey = tuple[str, str, tuple[int, ...]]


@dataclass(frozen=True)
class CounterMachine:
    """k-counter machine over a finite alphabet.

    `updates` maps (token, state, mask) to one Update per counter and
    `transitions` maps the same key to the next state; both must be total
    over alphabet x states x {0,1}^k.
    """

    alphabet: tuple[str, ...]
    states: tuple[str, ...]
    initial_state: str
    k: int
    updates: dict[TableKey, tuple[Update, ...]]
    transitions: dict[TableKey, str]
    acceptance_mask: frozenset[tuple[str, int]] = field(default_factory=frozenset)

    def __post_init__(self):
        if self.initial_state not in self.states:
            raise ValueError(f"initial state {self.initial_state!r} not in states")
        if self.k < 0:
            raise ValueError("k must be non-negative")
        masks = list(itertools.product((0, 1), repeat=self.k))
        for token in self.alphabet:
            for state in self.states:
                for mask in masks:
                    key = (token, state, mask)
                    if key not in self.updates or key not in self.transitions:
                        raise ValueError(f"update/transition table not total: missing {key}")
                    if len(self.updates[key]) != self.k:
                        raise ValueError(f"row {key} must carry {self.k} counter updates")
                    if self.transitions[key] not in self.states:
                        raise ValueError(f"row {key} transitions to unknown state")

    def initial_config(self) -> MachineConfig:
        return MachineConfig(self.initial_state, (0,) * self.k)


def _symbols(seq) -> list[str]:
    if isinstance(seq, BracketSeq):
        return [t.value for t in seq]
    if isinstance(seq, str):
        return list(seq)
    return list(seq)


def step(machine: CounterMachine, config: MachineConfig, token: str) -> MachineConfig:
    """Apply one transition: mask the counters, then update them and the state."""
    if token not in machine.alphabet:
        raise UnknownToken(token)
    mask = zero_check(config.counters)
    key = (token, config.state, mask)
    new_counters = tuple(
        apply_update(u, c) for u, c in zip(machine.updates[key], config.counters)
    )
    return MachineConfig(machine.transitions[key], new_counters)


def run(machine: CounterMachine, seq) -> MachineConfig:
    """Fold `step` over the sequence from the initial configuration."""
    config = machine.initial_config()
    for i, token in enumerate(_symbols(seq)):
        if token not in machine.alphabet:
            raise UnknownToken(token, i)
        config = step(machine, config, token)
    return config


def accepts(machine: CounterMachine, seq) -> bool:
    """Counter-only acceptance: final counter exactly 0 (1-counter machines)."""
    if machine.k != 1:
        raise UnsupportedArity(machine.k)
    return run(machine, seq).counters[0] == 0


def bb_counter() -> CounterMachine:
    """Single-state 1-counter machine: '(' adds +1, ')' adds -1, mask ignored."""
    updates: dict[TableKey, tuple[Update, ...]] = {}
    transitions: dict[TableKey, str] = {}
    for token, amount in (("(", 1), (")", -1)):
        for mask in ((0,), (1,)):
            updates[(token, "q0", mask)] = (Add(amount),)
            transitions[(token, "q0", mask)] = "q0"
    return CounterMachine(
        alphabet=("(", ")"),
        states=("q0",),
        initial_state="q0",
        k=1,
        updates=updates,
        transitions=transitions,
        acceptance_mask=frozenset({("q0", 0)}),
    )


def _update_to_dict(update: Update) -> dict:
    if isinstance(update, Add):
        return {"op": "add", "amount": update.amount}
    return {"op": "set_zero"}


def _update_from_dict(d: dict) -> Update:
    if d["op"] == "add":
        return Add(int(d["amount"]))
    if d["op"] == "set_zero":
        return SET_ZERO
    raise ValueError(f"unknown counter update op {d.get('op')!r}")


def machine_to_dict(machine: CounterMachine) -> dict:
    rows = []
    for (token, state, mask), updates in sorted(machine.updates.items()):
        rows.append(
            {
                "token": token,
                "state": state,
                "mask": list(mask),
                "updates": [_update_to_dict(u) for u in updates],
                "next_state": machine.transitions[(token, state, mask)],
            }
        )
    return {
        "schema_version": MACHINE_SCHEMA_VERSION,
        "alphabet": list(machine.alphabet),
        "states": list(machine.states),
        "initial_state": machine.initial_state,
        "k": machine.k,
        "acceptance_mask": sorted([s, b] for s, b in machine.acceptance_mask),
        "rows": rows,
    }


def machine_from_dict(d: dict) -> CounterMachine:
    updates: dict[TableKey, tuple[Update, ...]] = {}
    transitions: dict[TableKey, str] = {}
    for row in d["rows"]:
        key = (row["token"], row["state"], tuple(int(b) for b in row["mask"]))
        updates[key] = tuple(_update_from_dict(u) for u in row["updates"])
        transitions[key] = row["next_state"]
    return CounterMachine(
        alphabet=tuple(d["alphabet"]),
        states=tuple(d["states"]),
        initial_state=d["initial_state"],
        k=int(d["k"]),
        updates=updates,
        transitions=transitions,
        acceptance_mask=frozenset((s, int(b)) for s, b in d.get("acceptance_mask", [])),
    )


def save_machine(machine: CounterMachine, path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        json.dump(machine_to_dict(machine), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_machine(path) -> CounterMachine:
    with open(path, "r", encoding="ascii") as fh:
        return machine_from_dict(json.load(fh))
