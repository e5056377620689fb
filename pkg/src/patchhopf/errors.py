"""Exception types shared across the package.

Every error carries a short machine-readable ``code`` used by the CLI when
printing ``error: <code>: <detail>``.
"""


class PatchHopfError(Exception):
    code = "error"

    def __init__(self, detail, code=None):
        super().__init__(detail)
        if code is not None:
            self.code = code
        self.detail = detail


class NetworkError(PatchHopfError, ValueError):
    code = "invalid-network"


class NetworkParseError(NetworkError):
    code = "parse"


class ThresholdUndefinedError(PatchHopfError):
    code = "delta-nonnegative"


class NoEquilibriumError(PatchHopfError):
    code = "no-equilibrium"


class ConvergenceError(PatchHopfError):
    code = "no-convergence"


class NoCrossingError(PatchHopfError):
    code = "no-crossing"


class IntegrationError(PatchHopfError):
    code = "integration"


class InsufficientOscillationError(PatchHopfError):
    code = "insufficient-oscillation"
