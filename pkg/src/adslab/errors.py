"""Exception and warning types shared across the package."""


class AdslabError(Exception):
    """Base class for all package errors."""


class BFViolation(AdslabError):
    """Mass below the stability bound: (n-1)^2 + 4*m^2 must be positive."""


class UnsupportedModel(AdslabError):
    """Operation not defined for this background kind."""


class OutOfRange(AdslabError):
    """Coordinate or parameter outside its admissible interval."""


class HypothesisViolation(AdslabError):
    """Boundary symbol fails self-adjointness, locality or order constraints."""


class FitDiverged(AdslabError):
    """Boundary-layer branch fit residual above threshold."""


class ResonantBranch(FitDiverged):
    """2*nu an even integer: the decaying-branch series has a logarithmic term."""


class BracketExhausted(AdslabError):
    """Root search interval too small to bracket the requested eigenvalues."""


class NegativeMode(AdslabError):
    """A mode with omega^2 < 0 exists; ground-state construction unavailable."""

    def __init__(self, l, omega_sq):
        self.l = l
        self.omega_sq = omega_sq
        super().__init__(f"negative mode at l={l}: omega^2 = {omega_sq:.6g}")


class GridTooCoarse(AdslabError):
    """Quadrature self-estimate above requested tolerance."""


class WindowTooNarrow(AdslabError):
    """Cutoff transition cannot be resolved on the time grid."""


class WindowOverlap(AdslabError):
    """Smearing window touches the deformation support."""


class PacketDispersed(AdslabError):
    """Wavepacket lost localization before the boundary reflection."""


class CFLViolation(AdslabError):
    """Time step too large for the spatial grid."""


class ClosureDiverged(AdslabError):
    """Boundary stencil closure fit failed."""


class ConfigError(AdslabError):
    """Malformed or incomplete job configuration."""

    def __init__(self, message, stage=None):
        self.stage = stage
        super().__init__(message if stage is None else f"[{stage}] {message}")


class TruncationWarning(UserWarning):
    """Mode-sum tail estimate exceeds the configured relative tolerance."""
