"""Freezing automata networks on bounded-pathwidth graphs: simulation,
regular trace specification checking, FO+ model checking, and the two
hardness-gadget compilers, with brute-force oracles at desk scale."""

from anspec.core import (
    Alphabet,
    AutomataNetwork,
    BudgetExceeded,
    Configuration,
    ContractError,
    FunctionRule,
    InputError,
    NetworkGraph,
    Orbit,
    TableRule,
    simulate_deterministic,
    validate_freezing,
)

__all__ = [
    "Alphabet",
    "AutomataNetwork",
    "BudgetExceeded",
    "Configuration",
    "ContractError",
    "FunctionRule",
    "InputError",
    "NetworkGraph",
    "Orbit",
    "TableRule",
    "simulate_deterministic",
    "validate_freezing",
]

__version__ = "0.1.0"
