"""Exception types raised by the simulation and tomography pipeline."""


class SpacsError(Exception):
    """Base class for all pipeline errors."""


class AbortedAfterMaxTrials(SpacsError):
    """The trial cap was reached before enough heralded samples were collected."""

    def __init__(self, accepted, total_trials, target):
        self.accepted = accepted
        self.total_trials = total_trials
        self.target = target
        super().__init__(
            f"only {accepted} of {target} heralded samples after {total_trials} trials; "
            "the threshold is probably too high for the trial cap"
        )


class GridTooNarrow(SpacsError):
    """Too many quadrature samples fell outside the histogram range."""


class GridMismatch(SpacsError):
    """Dataset and pattern table were built on different quadrature grids."""


class SweepIncomplete(SpacsError):
    """The phase sweep does not cover the closed interval [0, pi]."""


class TruncationTooLarge(SpacsError):
    """Requested Fock truncation exceeds the numerically stable range."""


class IllConditioned(SpacsError):
    """Least-squares design matrix is too poorly conditioned to invert."""


class StageError(SpacsError):
    """Wraps a failure inside one stage of an experiment run."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage '{stage}' failed: {type(cause).__name__}: {cause}")
