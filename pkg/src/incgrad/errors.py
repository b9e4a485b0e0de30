"""Exception types shared across the library."""


class ConfigError(ValueError):
    """Invalid problem or run configuration (bad sizes, unsupported combination)."""


class DivergenceError(RuntimeError):
    """An iterate became non-finite or left the trust region during a run."""

    def __init__(self, step, detail=""):
        self.step = step
        msg = f"solver diverged at step {step}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class ProxSolveError(RuntimeError):
    """The inner 1-D proximal solve did not reach its residual tolerance."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"scalar prox solve stopped after {iterations} iterations "
            f"with residual {residual:.3e}"
        )


class OptimumError(RuntimeError):
    """Reference-optimum computation hit its iteration cap."""

    def __init__(self, residual, iterations):
        self.residual = residual
        self.iterations = iterations
        super().__init__(
            f"proximal gradient did not converge within {iterations} iterations; "
            f"final fixed-point residual {residual:.3e}"
        )
