"""Temporal-logic event search and tool triggering over per-frame proposition
confidences."""

from .agent import AgentEngine, DryRunExecutor, LiveExecutor, load_rules, replay
from .automaton import Dfa, compile_dfa, dfa_accepts, progress
from .errors import TLAgentError
from .formula import Formula
from .logic import BooleanTrace, evaluate_trace, expand_bounds, to_nnf
from .metrics import frame_f1, span_f1, tool_call_accuracy
from .parser import format_formula, parse_formula
from .probability import brute_force_probability, neusv_score, satisfaction_probability
from .search import MatchEvent, Monitor, SearchConfig, find_spans
from .traces import (FrameTrace, ScenarioScript, load_annotation, load_scenario, load_trace,
                     synthesize_trace)

__version__ = "0.1.0"

__all__ = [
    "AgentEngine", "DryRunExecutor", "LiveExecutor", "load_rules", "replay", "Dfa",
    "compile_dfa", "dfa_accepts", "progress", "TLAgentError", "Formula", "BooleanTrace",
    "evaluate_trace", "expand_bounds", "to_nnf", "frame_f1", "span_f1", "tool_call_accuracy",
    "format_formula", "parse_formula", "brute_force_probability", "neusv_score",
    "satisfaction_probability", "MatchEvent", "Monitor", "SearchConfig", "find_spans",
    "FrameTrace", "ScenarioScript", "load_annotation", "load_scenario", "load_trace",
    "synthesize_trace",
]
