"""Static anti-de Sitter backgrounds and their radial reduction.

Two concrete backgrounds are supported:

* ``GLOBAL_ADS``: global AdS_n with line element
  ``(-dtau^2 + drho^2 + sin^2(rho) dOmega^2_{n-2}) / cos^2(rho)``,
  ``rho in (0, pi/2)``, conformal boundary at ``rho = pi/2``.
* ``HALF_STRIP_1P1``: a 1+1 dimensional half strip ``rho in (0, pi/2]`` with a
  regular artificial wall at ``rho = 0`` and the same conformal boundary at
  ``rho = pi/2``; used by the time-dependent evolution module.

The boundary function is fixed to ``x = cos(rho)``; the conformally rescaled
metric then satisfies the unit-normalization condition ``ghat^{-1}(dx,dx) = 1``
on the boundary exactly.  Separating the wave operator in angular harmonics
and passing to Schrodinger gauge turns the radial problem into
``-psi'' + V_l(rho) psi = omega^2 psi`` with

    V_l(rho) = (nu^2 - 1/4)/cos^2(rho) + (mu_l^2 - 1/4)/sin^2(rho),
    mu_l = l + (n-3)/2,

whose branch exponents at the boundary are ``1/2 -+ nu`` in powers of ``x``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BFViolation, OutOfRange, UnsupportedModel


class ModelKind(enum.Enum):
    GLOBAL_ADS = "global_ads"
    HALF_STRIP_1P1 = "half_strip_1p1"


@dataclass(frozen=True)
class SpacetimeModel:
    """Static background: dimension, mass and derived branch exponents.

    ``nu = sqrt((n-1)^2 + 4 m^2)/2`` must be positive; ``nu_minus/nu_plus``
    are the decaying/growing boundary powers of the untransformed field,
    ``nu_minus + nu_plus = n - 1`` and ``nu_plus - nu_minus = 2 nu``.
    """

    n: int
    mass_sq: float
    nu: float
    nu_minus: float
    nu_plus: float
    kind: ModelKind = ModelKind.GLOBAL_ADS

    def x_of_rho(self, rho):
        """Boundary function x = cos(rho)."""
        return np.cos(rho)

    def describe(self):
        return (f"{self.kind.value}: n={self.n}, m^2={self.mass_sq:g}, "
                f"nu={self.nu:g} (nu-={self.nu_minus:g}, nu+={self.nu_plus:g})")


def build_model(n, mass_sq=None, kind=ModelKind.GLOBAL_ADS, nu=None):
    """Construct a model from (n, m^2), or directly from (n, nu).

    Raises BFViolation unless (n-1)^2 + 4 m^2 > 0.
    """
    if isinstance(kind, str):
        kind = ModelKind(kind)
    n = int(n)
    if n < 2:
        raise UnsupportedModel(f"spacetime dimension must be >= 2, got {n}")
    if kind is ModelKind.HALF_STRIP_1P1 and n != 2:
        raise UnsupportedModel("half-strip model is 1+1 dimensional (n=2)")
    if nu is not None:
        if mass_sq is not None:
            raise ValueError("pass either mass_sq or nu, not both")
        nu = float(nu)
        mass_sq = nu * nu - 0.25 * (n - 1) ** 2
    disc = (n - 1) ** 2 + 4.0 * float(mass_sq)
    if disc <= 0.0:
        raise BFViolation(
            f"(n-1)^2 + 4 m^2 = {disc:g} <= 0 for n={n}, m^2={mass_sq:g}")
    nu = 0.5 * math.sqrt(disc)
    half = 0.5 * (n - 1)
    return SpacetimeModel(n=n, mass_sq=float(mass_sq), nu=nu,
                          nu_minus=half - nu, nu_plus=half + nu, kind=kind)


@dataclass(frozen=True)
class RadialChart:
    """Radial grid on (rho_min, pi/2 - t_end), endpoints excluded.

    ``match_radius`` bounds the center region where the regular-branch series
    is used to launch the integration; ``boundary_layer`` is the x-thickness
    of the region where solutions are matched to the two boundary branches.
    """

    rho_grid: np.ndarray
    match_radius: float
    boundary_layer: float
    series_terms: int = 6

    def __post_init__(self):
        g = np.asarray(self.rho_grid, dtype=float)
        if g.ndim != 1 or g.size < 16:
            raise ValueError("rho_grid must be a 1-d array with >= 16 points")
        if np.any(np.diff(g) <= 0):
            raise ValueError("rho_grid must be strictly increasing")
        # rho = 0 is admitted only for the half-strip wall; the conformal
        # boundary rho = pi/2 is always excluded.
        if g[0] < 0.0 or g[-1] >= 0.5 * math.pi:
            raise ValueError("rho_grid must exclude the conformal boundary")
        if self.boundary_layer <= 0.0 or self.match_radius <= 0.0:
            raise ValueError("boundary_layer and match_radius must be positive")
        object.__setattr__(self, "rho_grid", g)

    @property
    def h(self):
        return float(self.rho_grid[1] - self.rho_grid[0])

    @property
    def x_grid(self):
        return np.cos(self.rho_grid)

    def fit_window(self):
        """Indices of grid points inside the boundary layer, used for trace fits."""
        idx = np.nonzero(self.x_grid <= self.boundary_layer)[0]
        if idx.size < 8:
            raise ValueError("boundary layer contains fewer than 8 grid points")
        return idx


def default_chart(n_rho=6001, rho_min=0.04, x_end=0.004, boundary_layer=1.0e-2,
                  match_radius=0.05, series_terms=6, include_wall=False):
    """Uniform chart; with include_wall the grid starts at rho = 0 (half strip)."""
    rho_max = 0.5 * math.pi - math.asin(x_end)
    lo = 0.0 if include_wall else rho_min
    grid = np.linspace(lo, rho_max, int(n_rho))
    return RadialChart(rho_grid=grid, match_radius=match_radius,
                       boundary_layer=boundary_layer, series_terms=int(series_terms))


def angular_eigenvalue(n, l):
    """Eigenvalue l(l + n - 3) of the Laplace-Beltrami operator on S^{n-2}."""
    l = int(l)
    if l < 0:
        raise OutOfRange(f"harmonic index must be >= 0, got {l}")
    if l > 0 and n < 3:
        raise UnsupportedModel("nonzero harmonics require n >= 3")
    return float(l * (l + n - 3))


def mu_of_mode(model, l):
    """Center branch exponent parameter mu_l = l + (n-3)/2."""
    if model.kind is ModelKind.HALF_STRIP_1P1:
        if l != 0:
            raise UnsupportedModel("half strip has no angular modes")
        return 0.0
    return float(l) + 0.5 * (model.n - 3)


def effective_potential(model, l):
    """Schrodinger-form radial potential for harmonic l.

    GLOBAL_ADS: V_l = (nu^2-1/4)/cos^2 + (mu_l^2-1/4)/sin^2.  The half strip
    carries only the boundary term (no angular directions; l must be 0).
    Other kinds raise UnsupportedModel.
    """
    if l < 0:
        raise OutOfRange(f"harmonic index must be >= 0, got {l}")
    cb = model.nu ** 2 - 0.25
    if model.kind is ModelKind.GLOBAL_ADS:
        cc = mu_of_mode(model, l) ** 2 - 0.25

        def V(rho):
            rho = np.asarray(rho, dtype=float)
            out = np.zeros_like(rho)
            if cb != 0.0:
                out = out + cb / np.cos(rho) ** 2
            if cc != 0.0:
                out = out + cc / np.sin(rho) ** 2
            return out

        return V
    if model.kind is ModelKind.HALF_STRIP_1P1:
        if l != 0:
            raise UnsupportedModel("half strip has no angular modes")

        def V(rho):
            rho = np.asarray(rho, dtype=float)
            return cb / np.cos(rho) ** 2 if cb != 0.0 else np.zeros_like(rho)

        return V
    raise UnsupportedModel(f"no radial reduction for kind {model.kind}")


def null_bounce_time(model, rho0):
    """Coordinate time for an outgoing radial null ray from rho0 to reach x=0.

    Radial null geodesics of the rescaled metric have d(rho)/d(tau) = +-1, so
    the travel time is pi/2 - rho0.
    """
    rho0 = float(rho0)
    if not 0.0 < rho0 <= 0.5 * math.pi:
        raise OutOfRange(f"rho0 must lie in (0, pi/2], got {rho0:g}")
    return 0.5 * math.pi - rho0


def conformal_boundary_normalization(model, rho, drho=1.0e-6):
    """ghat^{-1}(dx, dx) at radius rho, via finite differences of x(rho).

    For both model kinds ghat^{rho rho} = 1, so the value is (dx/drho)^2;
    it must tend to 1 at the conformal boundary.
    """
    rho = float(rho)
    if not 0.0 < rho <= 0.5 * math.pi:
        raise OutOfRange(f"rho must lie in (0, pi/2], got {rho:g}")
    dxdr = (model.x_of_rho(rho + drho) - model.x_of_rho(rho - drho)) / (2 * drho)
    return float(dxdr * dxdr)


# ---------------------------------------------------------------------------
# Broken null paths: reflections at the boundary (rho = pi/2) and passages
# through the center act on the radial coordinate as the reflection group of
# the segment [0, pi/2]; path lengths between rho and rho' are |rho - s| for s
# in the image set {+-rho' + k*pi}.
# ---------------------------------------------------------------------------

def broken_path_lengths(rho1, rho2, max_wraps=2):
    """Sorted coordinate-time lengths of radial broken null paths rho1 -> rho2."""
    for r in (rho1, rho2):
        if not 0.0 <= r <= 0.5 * math.pi:
            raise OutOfRange(f"radius {r:g} outside [0, pi/2]")
    out = set()
    for k in range(-max_wraps, max_wraps + 1):
        for sgn in (+1.0, -1.0):
            d = abs(rho1 - (sgn * rho2 + k * math.pi))
            out.add(round(d, 15))
    return sorted(out)


def broken_path_intervals(rho_iv1, rho_iv2, max_wraps=2):
    """Length intervals [d_lo, d_hi] reachable between two radial ranges."""
    a1, b1 = map(float, rho_iv1)
    a2, b2 = map(float, rho_iv2)
    ivs = []
    for k in range(-max_wraps, max_wraps + 1):
        for sgn in (+1.0, -1.0):
            # image segment of [a2,b2] under s -> sgn*s + k*pi
            lo = min(sgn * a2, sgn * b2) + k * math.pi
            hi = max(sgn * a2, sgn * b2) + k * math.pi
            # distance range between [a1,b1] and [lo,hi]
            if hi < a1:
                ivs.append((a1 - hi, b1 - lo))
            elif b1 < lo:
                ivs.append((lo - b1, hi - a1))
            else:
                ivs.append((0.0, max(b1 - lo, hi - a1)))
    ivs = [(lo, hi) for lo, hi in ivs if lo <= 0.5 * math.pi * 2 * (max_wraps + 1)]
    ivs.sort()
    merged = []
    for lo, hi in ivs:
        if merged and lo <= merged[-1][1]:
            merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
        else:
            merged.append((lo, hi))
    return merged


@dataclass(frozen=True)
class SupportBox:
    """Rectangular support (t interval x rho interval) of a smeared function."""

    t_lo: float
    t_hi: float
    rho_lo: float
    rho_hi: float


def broken_null_reachable(box1: SupportBox, box2: SupportBox, max_wraps=2):
    """Whether two support boxes are joined by some radial broken null path."""
    dt_lo = max(0.0, max(box1.t_lo - box2.t_hi, box2.t_lo - box1.t_hi))
    dt_hi = max(abs(box1.t_hi - box2.t_lo), abs(box2.t_hi - box1.t_lo))
    for lo, hi in broken_path_intervals((box1.rho_lo, box1.rho_hi),
                                        (box2.rho_lo, box2.rho_hi), max_wraps):
        if hi >= dt_lo and lo <= dt_hi:
            return True
    return False
