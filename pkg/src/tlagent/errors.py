"""Exception hierarchy shared by every stage of the engine."""


class TLAgentError(Exception):
    """Base class for domain errors; ``module`` prefixes CLI diagnostics."""

    module = "tlagent"


class FormulaError(TLAgentError):
    module = "tl-core"


class FormulaSyntaxError(FormulaError):
    """Lexical or syntax error in a formula string.

    ``position`` is a 0-based character offset; ``expected`` is the set of
    token descriptions that would have been accepted there (empty for
    lexical errors).
    """

    def __init__(self, message, text="", position=0, expected=()):
        self.text = text
        self.position = position
        self.expected = frozenset(expected)
        super().__init__(message)


class BoundError(FormulaError):
    pass


class ExpansionLimitError(FormulaError):
    pass


class AutomatonError(TLAgentError):
    module = "automaton"


class StateCapError(AutomatonError):
    pass


class AlphabetCapError(AutomatonError):
    pass


class UniverseMismatchError(TLAgentError):
    module = "prob-verify"


class OracleSizeError(TLAgentError):
    module = "prob-verify"


class TraceFormatError(TLAgentError):
    module = "trace-io"


class SearchError(TLAgentError):
    module = "search"


class RuleError(TLAgentError):
    module = "agent-runtime"


class MetricError(TLAgentError):
    module = "eval"


class PipelineError(TLAgentError):
    module = "pipeline"

    def __init__(self, stage, message):
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


class ConfigError(TLAgentError):
    """Malformed pipeline configuration; reported as a usage error."""

    module = "pipeline"
