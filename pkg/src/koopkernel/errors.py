"""Exception and warning types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters, shapes or indices supplied by the caller."""


class NumericalError(RuntimeError):
    """A numerical stage failed (divergence, solver failure, degeneracy)."""


class IntegrationDivergenceError(NumericalError):
    def __init__(self, step):
        self.step = step
        super().__init__(f"non-finite state encountered at integration step {step}")


class DegenerateKernelError(NumericalError):
    """Kernel degrees vanish somewhere, usually because the bandwidth is too small."""


class DegenerateDataError(NumericalError):
    """Input data carries no spread (all distances or all variance zero)."""


class RankError(NumericalError):
    """Retained spectral modes include nonpositive eigenvalues."""


class OutOfDomainWarning(UserWarning):
    """Out-of-sample point too far from the training data; fell back to climatology."""


class RankDeficiencyWarning(UserWarning):
    """Fewer numerically nonzero eigenvalues than requested modes."""
