"""Exception types shared across the package."""


class MycelsimError(Exception):
    """Base class for package-specific errors."""


class ValidationError(MycelsimError, ValueError):
    """Invalid argument, configuration value, or file content."""


class SimulationError(MycelsimError, RuntimeError):
    """Numerical failure inside the transient network solver."""


class NewtonConvergenceError(SimulationError):
    """Newton iteration did not converge within the configured budget."""

    def __init__(self, step: int, max_iter: int, context: str = ""):
        suffix = f" ({context})" if context else ""
        super().__init__(
            f"Newton iteration failed to converge at step {step} "
            f"after {max_iter} iterations{suffix}"
        )
        self.step = step
        self.max_iter = max_iter


class SingularNodalSystemError(SimulationError):
    """Nodal conductance matrix is singular (disconnected free node)."""

    def __init__(self, step: int, context: str = ""):
        suffix = f" ({context})" if context else ""
        super().__init__(f"singular nodal system at step {step}{suffix}")
        self.step = step
