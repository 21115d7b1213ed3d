"""Exception hierarchy shared by every pflow module."""


class PflowError(Exception):
    """Base class for all errors raised by pflow."""


class StencilError(PflowError, IndexError):
    """A central stencil was requested at a node without a full neighbourhood."""


class DomainError(PflowError, ValueError):
    """An argument lies outside the domain where a closed form is defined."""


class PreconditionError(PflowError, ValueError):
    """Input data violate the documented precondition of an operation."""


class ConfigError(PflowError, ValueError):
    """Invalid solver or run configuration."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InstabilityError(PflowError, FloatingPointError):
    """The explicit march produced a non-finite value."""

    def __init__(self, node, step):
        super().__init__(f"non-finite value at node {node} in step {step}")
        self.node = node
        self.step = step


class ConvergenceError(PflowError, RuntimeError):
    """An iteration hit its cap before reaching the requested tolerance."""

    def __init__(self, message, residual, history=()):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual
        self.history = list(history)
