"""Balanced-bracket counting lab.

Core pieces: bracket-language tools (`brackets`), a general counter machine
(`counter`), the single-cell linear recurrent network and its counting
indicators (`lrn`), brute-force checks of the indicator equivalence
(`theorem`), a BPTT training harness (`training`), suite orchestration and
reports (`experiments`), and a FastAPI front end (`service`) with a thin CLI
(`cli`).
"""

from .brackets import (
    BracketSeq,
    BracketStats,
    Token,
    enumerate_all,
    in_bb,
    is_dyck1,
    label_binary,
    label_ternary,
    parse,
    sample_random,
    stats,
    to_text,
)
from .counter import CounterMachine, MachineConfig, accepts, bb_counter, run, step, zero_check
from .lrn import (
    CANONICAL,
    IndicatorReport,
    LrnParams,
    Trajectory,
    accepts_lrn,
    closed_form,
    exact_params,
    forward,
    forward_step,
    from_increments,
    indicators,
)
from .theorem import (
    EquivalenceReport,
    check_closed_form,
    falsification_sweep,
    find_counterexample,
    table1_cases,
    verify_equivalence,
)
from .training import Model, RunRecord, TrainConfig, evaluate, gradients, train_run

__version__ = "0.1.0"
