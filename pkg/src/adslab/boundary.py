"""Boundary condition symbols diagonal on angular harmonics.

The generalized Robin condition couples the two boundary trace coefficients
of each mode as ``B = theta_l * A``.  The coupling is described by a real
symbol ``theta(l)`` of differential order at most 2 in the boundary
Laplacian: Dirichlet (theta = infinity), constant Robin, or the quadratic
``a + b * l(l+n-3)``.  Real coefficients encode self-adjointness; symbols
carry no time dependence, so they are automatically local in time.
"""

from __future__ import annotations

import enum
import math
import numbers
from dataclasses import dataclass

import numpy as np

from .errors import HypothesisViolation
from .geometry import angular_eigenvalue


class SymbolKind(enum.Enum):
    DIRICHLET = "dirichlet"
    ROBIN = "robin"
    SECOND_ORDER = "second_order"


@dataclass(frozen=True)
class BoundarySymbol:
    kind: SymbolKind
    theta: object = None     # Robin coefficient
    a: object = None         # SecondOrder constant part
    b: object = None         # SecondOrder boundary-Laplacian coefficient

    @property
    def order(self):
        return 2 if self.kind is SymbolKind.SECOND_ORDER else 0

    @property
    def is_dirichlet(self):
        return self.kind is SymbolKind.DIRICHLET

    def label(self):
        if self.kind is SymbolKind.DIRICHLET:
            return "dirichlet"
        if self.kind is SymbolKind.ROBIN:
            return f"robin({self.theta:g})"
        return f"second_order({self.a:g},{self.b:g})"


def dirichlet():
    return BoundarySymbol(SymbolKind.DIRICHLET)


def robin(theta):
    return BoundarySymbol(SymbolKind.ROBIN, theta=theta)


def second_order(a, b):
    return BoundarySymbol(SymbolKind.SECOND_ORDER, a=a, b=b)


def theta_of_mode(symbol, n, l):
    """Symbol value theta_l; math.inf exactly for Dirichlet."""
    if symbol.kind is SymbolKind.DIRICHLET:
        return math.inf
    if symbol.kind is SymbolKind.ROBIN:
        return float(symbol.theta)
    lam = angular_eigenvalue(n, l)
    return float(symbol.a) + float(symbol.b) * lam


@dataclass(frozen=True)
class HypothesisReport:
    ok: bool
    self_adjoint: bool
    local_in_time: bool
    order: int
    notes: tuple


def validate_hypothesis(symbol):
    """Check self-adjointness (real coefficients), time locality and order <= 2.

    Static symbols carry no time dependence, so locality in time holds by
    construction; it is reported rather than tested.
    """
    coeffs = [c for c in (symbol.theta, symbol.a, symbol.b) if c is not None]
    for c in coeffs:
        if isinstance(c, numbers.Complex) and not isinstance(c, numbers.Real):
            if abs(complex(c).imag) > 0.0:
                raise HypothesisViolation(
                    f"symbol coefficient {c!r} is not real; Theta must equal "
                    "its adjoint")
        elif not isinstance(c, numbers.Real):
            raise HypothesisViolation(f"symbol coefficient {c!r} is not numeric")
        if not np.isfinite(float(np.real(c))):
            raise HypothesisViolation(f"symbol coefficient {c!r} is not finite")
    if symbol.order > 2:
        raise HypothesisViolation(f"symbol order {symbol.order} exceeds 2")
    notes = ("static symbol: local in time by construction",)
    return HypothesisReport(ok=True, self_adjoint=True, local_in_time=True,
                            order=symbol.order, notes=notes)


def energy_form_symmetry_check(symbol, n, u_coeffs, v_coeffs):
    """Relative asymmetry |<Theta u, v> - <u, Theta v>| of the boundary pairing.

    u_coeffs, v_coeffs: harmonic coefficients of boundary data up to L_max.
    Dirichlet enforces vanishing boundary data, so the pairing is 0 exactly.
    """
    u = np.asarray(u_coeffs, dtype=complex)
    v = np.asarray(v_coeffs, dtype=complex)
    if u.shape != v.shape:
        raise ValueError("u and v must carry the same number of harmonics")
    if symbol.is_dirichlet:
        return 0.0
    th = np.array([theta_of_mode(symbol, n, l) for l in range(u.size)])
    p1 = np.sum(th * u * np.conjugate(v))
    p2 = np.sum(u * np.conjugate(th * v))
    scale = max(abs(p1), abs(p2), np.sum(np.abs(th) * np.abs(u) * np.abs(v)))
    if scale == 0.0:
        return 0.0
    return float(abs(p1 - p2) / scale)
