"""Knowledge-graph action planning toolkit (C++ core)."""

from ._eam import (
    SCHEMA_VERSION,
    EamError,
    KnowledgeGraph,
    QScorer,
    SynthEnv,
    Task,
    build_kg,
    explore,
    extract,
    greedy_and_optimal,
    is_success,
    mine_groups,
    pinsker_check,
    run_bench,
    self_train,
    simulation_budget,
    uniform_q,
    with_action_groups,
)

__all__ = [
    "SCHEMA_VERSION",
    "EamError",
    "KnowledgeGraph",
    "QScorer",
    "SynthEnv",
    "Task",
    "build_kg",
    "explore",
    "extract",
    "greedy_and_optimal",
    "is_success",
    "mine_groups",
    "pinsker_check",
    "run_bench",
    "self_train",
    "simulation_budget",
    "uniform_q",
    "with_action_groups",
]
