"""invmine: invariant discovery for guarded-transition-system refinements.

Simulate a refinement pair, turn the trace into concept tables, form
conjectures by applying production rules under a prioritised agenda, and
use proof-failure analysis to pick the conjectures that discharge the
failing refinement obligations.
"""

from importlib import resources

from .concepts import Concept, column_domain, constant_concepts, core_concepts
from .formation import (
    Conjecture, RuleConfig, Theory, apply_arithmetic, apply_compose,
    apply_disjunct, apply_negate, apply_numrelation, apply_size, apply_split,
    detect_conjectures, form_theory,
)
from .heuristics import (
    CandidateInvariant, DiscoveryReport, PrioritizedConcepts, discover,
    prioritize_from_failures, rank_candidates, rules_from_failures,
    select_anchored, select_discharging, select_most_general,
    select_variable_disjoint,
)
from .model import Machine, check_model, compose_pair, print_model
from .oracle import (
    PO, Verdict, check_discharge, entails, generate_obligations,
)
from .parser import ParseError, parse_expr, parse_model, parse_predicate
from .semantics import EvalError, eval_expr, eval_predicate
from .simulator import (
    StateSnapshot, Trace, enabled_events, read_trace, simulate, write_trace,
)
from .translate import (
    InvariantSyntax, TranslationUnsupported, conjecture_to_invariant, render,
)

__version__ = "0.1.0"


def bundled_model(name: str) -> str:
    """Source text of a bundled example model (e.g. 'purse_statusfn')."""
    return (resources.files(__name__) / "models" / f"{name}.model").read_text(
        encoding="utf-8")
