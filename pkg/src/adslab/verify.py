"""Property checks for the analytic identities of the boundary value problem.

Everything here works on a static slice in Schrodinger gauge.  Writing
``w = cos^(2-n) sin^(n-2)`` for the mode weight and ``psi = sqrt(w) phi``,
the twisted energy form of two static fields reduces per harmonic to

    D_F(u, v) = int [psi_u' + T psi_u] [psi_v' + T psi_v] d rho
              + lambda_l int psi_u psi_v / sin^2 d rho,
    T(rho)    = (1/2 - nu) sin/cos + (2-n)/2 cos/sin,

with the twisting fixed to the pure power ``F = x^(nu_minus)`` (then
``S_F = F^{-1} P F = -nu_minus^2 x^2`` in closed form; the module recomputes
it by discrete application of the wave operator and checks the ``x^2``
bound).  The identity verified by ``green_identity_residual`` is

    <(-P) u, v> = D_F(u, v) - int (S_F/x^2) psi_u psi_v d rho
                + C_b * sum_l B_{u,l} conj(A_{v,l}),

whose boundary constant ``C_b`` is calibrated once by closing the identity
on a computed eigenmode and equals ``2 nu`` (the trace normalization of the
growing branch).  Signs follow the positive-operator convention of the
kernel module: eigenmodes satisfy ``<(-P) u, u> = omega^2 ||u||^2``, so the
energy functional is positive definite exactly when the spectrum is.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from . import frobenius as fb
from .boundary import theta_of_mode
from .errors import GridTooCoarse, PacketDispersed, WindowTooNarrow
from .geometry import (ModelKind, angular_eigenvalue, effective_potential,
                       null_bounce_time)
from .spectrum import ModeProblem


# ---------------------------------------------------------------------------
# Twisting function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TwistingFunction:
    """Pure-power twisting F = x^(nu_minus) with numerically recomputed S_F."""

    model: object
    chart: object
    F: np.ndarray
    S_F: np.ndarray

    @classmethod
    def default(cls, model, chart):
        rho = chart.rho_grid
        x = np.cos(rho)
        s = np.sin(rho)
        n = model.n
        Fv = x ** model.nu_minus
        # discrete application of the radial wave operator to F
        h = chart.h
        p = x ** (2 - n) * s ** (n - 2)
        dF = np.gradient(Fv, h, edge_order=2)
        flux = np.gradient(p * dF, h, edge_order=2)
        box_F = flux / (x ** (-n) * s ** (n - 2))
        S_F = (box_F - model.mass_sq * Fv) / Fv
        return cls(model=model, chart=chart, F=Fv, S_F=S_F)

    @property
    def s_f_over_x_sq(self):
        """Closed-form limit of S_F / x^2 for the pure-power twisting."""
        return -self.model.nu_minus ** 2

    def ratio_samples(self, bound_tol=0.05):
        """S_F / x^2 samples for quadrature: the numeric recomputation where
        its stencil is trustworthy, the closed-form limit in the endpoint
        envelopes where the stencil noise diverges."""
        rho = self.chart.rho_grid
        x = np.cos(rho)
        ratio = self.S_F / x ** 2
        x_cut = (150.0 * self.chart.h ** 2 / bound_tol) ** (1.0 / 3.0)
        bad = (x < x_cut) | (rho < 0.15)
        out = ratio.copy()
        out[bad] = self.s_f_over_x_sq
        return out

    def admissible(self, bound_tol=0.05):
        """x^(-nu_minus) F > 0 and S_F inside an x^2 L-infinity envelope.

        The stencil error of the recomputed S_F grows like h^2/x^3 toward
        the boundary edge, so the envelope is checked where the stencil is
        trustworthy: x above (3 h^2 / bound_tol)^(1/3).
        """
        x = np.cos(self.chart.rho_grid)
        if np.any(self.F * x ** (-self.model.nu_minus) <= 0.0):
            return False
        ratio = self.S_F / x ** 2
        target = self.s_f_over_x_sq
        # measured stencil-error envelope ~ 150 h^2 / x^3 on these weights
        x_cut = (150.0 * self.chart.h ** 2 / bound_tol) ** (1.0 / 3.0)
        core = ratio[2:-2][x[2:-2] >= x_cut]
        return bool(np.max(np.abs(core - target)) <= bound_tol * max(
            1.0, abs(target)))


# ---------------------------------------------------------------------------
# Static fields entering the identities
# ---------------------------------------------------------------------------

@dataclass
class ModeField:
    """Finite combination of computed eigenmodes, with trace and tail data."""

    data: object
    terms: list          # list of (coef, EigenPair)

    def __post_init__(self):
        self._byl = {}
        for c, p in self.terms:
            self._byl.setdefault(p.l, []).append((c, p))
        grid = self.data.chart.rho_grid
        self._samples = {}
        self._splines = {}
        for l, parts in self._byl.items():
            s = sum(c * p.psi for c, p in parts)
            self._samples[l] = s
            self._splines[l] = CubicSpline(grid, s)

    @property
    def l_values(self):
        return sorted(self._byl)

    def psi(self, l, rho):
        return self._splines[l](rho) if l in self._splines else 0.0 * rho

    def dpsi(self, l, rho):
        if l not in self._splines:
            return 0.0 * rho
        return self._splines[l].derivative()(rho)

    def traces(self, l):
        parts = self._byl.get(l, [])
        A = sum(c * p.A for c, p in parts)
        B = sum(c * p.B for c, p in parts)
        return A, B

    def constituents(self, l):
        return self._byl.get(l, [])

    def weighted(self, weight_fn):
        """Same combination with coefficients rescaled mode by mode."""
        return ModeField(self.data,
                         [(c * weight_fn(p), p) for c, p in self.terms])


@dataclass
class CompactField:
    """Interior-supported sampled field; all traces and tails vanish."""

    chart: object
    samples: dict        # l -> samples on chart.rho_grid

    def __post_init__(self):
        grid = self.chart.rho_grid
        self._splines = {l: CubicSpline(grid, s)
                         for l, s in self.samples.items()}
        for l, s in self.samples.items():
            peak = np.max(np.abs(s))
            if peak > 0 and (abs(s[0]) > 1e-10 * peak
                             or abs(s[-1]) > 1e-10 * peak):
                raise ValueError("compact field must vanish at the grid ends")

    @property
    def l_values(self):
        return sorted(self.samples)

    def psi(self, l, rho):
        return self._splines[l](rho) if l in self._splines else 0.0 * rho

    def dpsi(self, l, rho):
        if l not in self._splines:
            return 0.0 * rho
        return self._splines[l].derivative()(rho)

    def traces(self, l):
        return 0.0, 0.0

    def constituents(self, l):
        return []


def _problem(data, l):
    return ModeProblem(data.model, data.symbol, l, data.chart)


def _mode_layer_data(problem, coef, pair):
    """(value, bracket) layer terms at both endpoints for one constituent."""
    nt = problem.chart.series_terms
    model = problem.model
    nu = model.nu
    s_m, s_p = fb.branch_exponents(nu)
    nu2 = nu * nu - 0.25
    other = problem.other_const
    A = 0.0 if problem.symbol.is_dirichlet else coef * pair.A
    B = coef * pair.B
    w2 = pair.omega_sq
    cm = (np.zeros(nt + 1) if (A == 0.0 or problem._resonant)
          else fb.branch_coefficients(s_m, nu2, other, w2, nt))
    cp = fb.branch_coefficients(s_p, nu2, other, w2, nt)
    bval = fb.boundary_value_terms(A, B, cm, cp, nu)
    bbra = fb.boundary_bracket_terms(A, B, cm, cp, nu, model.n)
    if model.kind is ModelKind.HALF_STRIP_1P1:
        cval, cbra = [], []
    else:
        mu = problem.mu_l
        cc = coef * pair.center_coef
        cr = fb.branch_coefficients(0.5 + mu, mu * mu - 0.25, nu2, w2, nt + 4)
        cval = fb.center_value_terms(cc, cr, mu)
        cbra = fb.center_bracket_terms(cc, cr, nu, mu, model.n)
    return bval, bbra, cval, cbra


def _field_layer_terms(field, data, l, problem):
    """Summed endpoint layer terms of a field component."""
    bval, bbra, cval, cbra = [], [], [], []
    for coef, pair in field.constituents(l):
        a, b, c, d = _mode_layer_data(problem, coef, pair)
        bval += a
        bbra += b
        cval += c
        cbra += d
    return bval, bbra, cval, cbra


@dataclass(frozen=True)
class _Quadrature:
    rho: np.ndarray
    x: np.ndarray
    s: np.ndarray
    T: np.ndarray

    @classmethod
    def build(cls, model, chart, stride):
        rho = chart.rho_grid[::stride]
        if rho[-1] != chart.rho_grid[-1]:
            rho = np.append(rho, chart.rho_grid[-1])
        x, s = np.cos(rho), np.sin(rho)
        with np.errstate(divide="ignore"):
            T = (0.5 - model.nu) * s / x + 0.5 * (2 - model.n) * x / s
        return cls(rho=rho, x=x, s=s, T=T)


def _twisted_form_parts(data, twist, u, v, stride=1):
    """Interior + endpoint-layer pieces of D_F, the S_F term and <(-P)u, v>.

    Returns a dict of the assembled scalars; all integrals in Schrodinger
    gauge on (0, pi/2) with series-exact endpoint layers.
    """
    model, chart = data.model, data.chart
    q = _Quadrature.build(model, chart, stride)
    jac = fb.binom_series(-0.5, chart.series_terms + 2)
    jac3 = fb.binom_series(-1.5, chart.series_terms + 2)
    x_end = float(chart.x_grid[-1])
    y0 = float(math.sin(chart.rho_grid[0]))
    wall = model.kind is ModelKind.HALF_STRIP_1P1

    # identity quadrature uses the closed-form ratio; the numeric
    # recomputation of S_F validates it (admissible / ratio_samples) but its
    # stencil noise integrates to ~1e-4, far above the identity's floor
    S_over_x2 = CubicSpline(chart.rho_grid,
                            np.full_like(chart.rho_grid,
                                         twist.s_f_over_x_sq))
    d_f = 0.0
    s_term = 0.0
    pu_v = 0.0
    bdry = 0.0
    for l in sorted(set(u.l_values) | set(v.l_values)):
        pu = _problem(data, l)
        lam = 0.0 if wall else angular_eigenvalue(model.n, l)
        psi_u, psi_v = u.psi(l, q.rho), v.psi(l, q.rho)
        bu = u.dpsi(l, q.rho) + q.T * psi_u
        bv = v.dpsi(l, q.rho) + q.T * psi_v
        d_f += simpson(bu * np.conjugate(bv), x=q.rho)
        if lam != 0.0:
            d_f += lam * simpson(psi_u * np.conjugate(psi_v) / q.s ** 2,
                                 x=q.rho)
        s_term += simpson(S_over_x2(q.rho) * psi_u * np.conjugate(psi_v),
                          x=q.rho)
        # <(-P) u, v>: mode coefficients weighted by omega^2
        acc = np.zeros_like(q.rho)
        for c, p in u.constituents(l):
            acc = acc + c * p.omega_sq * CubicSpline(
                chart.rho_grid, p.psi)(q.rho)
        pu_v += simpson(acc * np.conjugate(psi_v), x=q.rho)

        # endpoint layers
        uval, ubra, ucval, ucbra = _field_layer_terms(u, data, l, pu)
        vval, vbra, vcval, vcbra = _field_layer_terms(v, data, l, pu)
        d_f += fb.pair_tail_integral(ubra, vbra, x_end, jac).real
        d_f += fb.pair_tail_integral(ucbra, vcbra, y0, jac).real
        if lam != 0.0:
            d_f += lam * fb.pair_tail_integral(uval, vval, x_end, jac3).real
            shift_u = [fb.LayerTerm(t.coef, t.power - 1.0, t.ser)
                       for t in ucval]
            shift_v = [fb.LayerTerm(t.coef, t.power - 1.0, t.ser)
                       for t in vcval]
            d_f += lam * fb.pair_tail_integral(shift_u, shift_v, y0, jac).real
        csf = twist.s_f_over_x_sq
        s_term += csf * fb.pair_tail_integral(uval, vval, x_end, jac).real
        s_term += csf * fb.pair_tail_integral(ucval, vcval, y0, jac).real
        for coef, pair in u.constituents(l):
            # omega^2-weighted value terms of this constituent
            a, _, c, _ = _mode_layer_data(pu, coef * pair.omega_sq, pair)
            pu_v += fb.pair_tail_integral(a, vval, x_end, jac).real
            pu_v += fb.pair_tail_integral(c, vcval, y0, jac).real

        A_v = v.traces(l)[0]
        B_u = u.traces(l)[1]
        bdry += B_u * np.conjugate(A_v)
    return {"d_f": d_f, "s_term": s_term, "pu_v": pu_v, "bdry_raw": bdry}


BOUNDARY_PAIRING_CALIBRATION = "2*nu"  # closed once on eigenmodes; see tests


def green_identity_residual(data, twist, u, v, stride=1):
    """Relative closure defect of the twisted integration-by-parts identity.

    <(-P)u, v> - [ D_F(u,v) - int (S_F/x^2) psi_u psi_v + 2 nu B_u conj(A_v) ]
    over the common scale of the terms.
    """
    parts = _twisted_form_parts(data, twist, u, v, stride=stride)
    two_nu = 2.0 * data.model.nu
    rhs = parts["d_f"] - parts["s_term"] + two_nu * parts["bdry_raw"]
    lhs = parts["pu_v"]
    scale = max(abs(lhs), abs(parts["d_f"]), abs(parts["s_term"]), 1e-300)
    return abs(lhs - rhs) / scale


def energy_functional(data, twist, u, v, stride=1, self_check_tol=None):
    """Theta-twisted energy form E(u, v); complex for complex inputs.

    E(u,v) = D_F(u,v) - int (S_F/x^2) psi_u psi_v
           + 2 nu sum_l theta_l A_u,l conj(A_v,l)        (Dirichlet: 0).
    Raises GridTooCoarse when an internal two-level quadrature self-estimate
    exceeds self_check_tol (relative).
    """
    parts = _twisted_form_parts(data, twist, u, v, stride=stride)
    sym = data.symbol
    bterm = 0.0
    if not sym.is_dirichlet:
        for l in sorted(set(u.l_values) | set(v.l_values)):
            th = theta_of_mode(sym, data.model.n, l)
            bterm += th * u.traces(l)[0] * np.conjugate(v.traces(l)[0])
    value = (parts["d_f"] - parts["s_term"]
             + 2.0 * data.model.nu * bterm)
    if self_check_tol is not None:
        coarse = _twisted_form_parts(data, twist, u, v, stride=2 * stride)
        ref = (coarse["d_f"] - coarse["s_term"]
               + 2.0 * data.model.nu * bterm)
        if abs(ref - value) > self_check_tol * max(abs(value), 1e-300):
            raise GridTooCoarse(
                f"quadrature self-estimate {abs(ref - value):.2e} above "
                f"{self_check_tol:.1e} x |E|")
    return value


def boundary_pairing_constant(data, pair):
    """Calibrate the boundary-term constant by closing the identity on one
    eigenmode; the identity then fixes C_b = (omega^2 ||u||^2 - D_F + S)/
    (B conj(A)).  Recorded check: equals 2 nu."""
    twist = TwistingFunction.default(data.model, data.chart)
    u = ModeField(data, [(1.0, pair)])
    parts = _twisted_form_parts(data, twist, u, u, stride=1)
    raw = parts["bdry_raw"]
    if abs(raw) < 1e-12:
        raise ValueError("calibration needs a mode with nonzero traces")
    return (parts["pu_v"] - parts["d_f"] + parts["s_term"]) / raw


# ---------------------------------------------------------------------------
# Time-slice identity
# ---------------------------------------------------------------------------

def quintic_smoothstep(t, t0, t1):
    """C^2 monotone step: 0 below t0, 1 above t1."""
    s = np.clip((np.asarray(t, dtype=float) - t0) / (t1 - t0), 0.0, 1.0)
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s ** 2)


def time_slice_residual(data, f, window, late_start=None):
    """Relative defect of re-propagating through a cutoff time window.

    Builds h = P(chi * G f) with a discrete second-order time stencil (chi a
    quintic step supported in the window, which must precede supp f), then
    compares G h with G f on late times.
    """
    tau1, tau2 = window
    t = f.t_grid
    dt = t[1] - t[0]
    if tau2 - tau1 < 8 * dt:
        raise WindowTooNarrow(
            f"window width {tau2 - tau1:g} under 8 time steps ({8 * dt:g})")
    if f.t_support[0] <= tau2:
        raise ValueError("test function must be supported after the window")
    chi = quintic_smoothstep(t, tau1, tau2)
    late = t >= (f.t_support[1] if late_start is None else late_start)
    if not np.any(late):
        raise ValueError("no late-time subgrid beyond the support of f")

    data_grid = data.chart.rho_grid
    num = 0.0
    den = 0.0
    for l in range(min(data.l_max + 1, len(f.harmonics))):
        if f.harmonics[l] == 0.0 or l not in data.modes:
            continue
        for p in data.pairs(l):
            w = p.omega
            c = simpson(p.psi * f.radial_profile, x=data_grid) \
                * f.harmonics[l]
            if c == 0.0:
                continue
            fplus = np.trapezoid(f.t_profile * np.exp(-1j * w * t), t)
            a = np.imag(np.exp(1j * w * t) * fplus) / w    # G f amplitude
            chia = chi * a
            h = np.zeros_like(a)
            h[1:-1] = (chia[2:] - 2 * chia[1:-1] + chia[:-2]) / dt ** 2 \
                + w * w * chia[1:-1]
            hplus_t = np.exp(-1j * w * t) * h
            hplus = np.trapezoid(hplus_t, t)
            b = np.imag(np.exp(1j * w * t) * hplus) / w    # G h amplitude
            num += abs(c) ** 2 * np.trapezoid(np.abs(b - a)[late] ** 2,
                                              t[late])
            den += abs(c) ** 2 * np.trapezoid(np.abs(a)[late] ** 2, t[late])
    if den == 0.0:
        return 0.0
    return math.sqrt(num / den)


# ---------------------------------------------------------------------------
# Wavepacket bounce
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class BounceResult:
    measured: float
    predicted: float
    track_t: np.ndarray
    track_centroid: np.ndarray


def bounce_test(data, rho0, width, n_t=1200, t_max=None, carrier=None,
                localization_radius=5.0, min_energy_fraction=0.5):
    """Launch an outgoing Gaussian wavepacket and time its boundary bounce.

    The packet carries an oscillatory carrier (default frequency 3/width):
    the reflection instant of the high-frequency envelope is the geometric
    one, whereas low frequencies feel a symbol-dependent group delay.  The
    packet is evolved by the l=0 mode sum; the bounce is the maximum of the
    energy-density centroid, compared against the radial null travel time.
    Raises PacketDispersed when the windowed energy fraction around the
    centroid drops below min_energy_fraction before the bounce.
    """
    model, chart = data.model, data.chart
    grid = chart.rho_grid
    predicted = null_bounce_time(model, rho0)
    if carrier is None:
        carrier = 3.0 / width
    envelope = np.exp(-((grid - rho0) ** 2) / (2.0 * width ** 2))
    u0 = envelope * np.cos(carrier * (grid - rho0))
    du0 = (-(grid - rho0) / width ** 2 * u0
           - carrier * envelope * np.sin(carrier * (grid - rho0)))
    v0 = -du0  # right-moving toward the boundary
    pairs = data.pairs(0)
    V = effective_potential(model, 0)(grid)
    c = np.array([simpson(p.psi * u0, x=grid) for p in pairs])
    d = np.array([simpson(p.psi * v0, x=grid) for p in pairs])
    omegas = np.array([p.omega for p in pairs])
    psis = np.stack([p.psi for p in pairs])
    dpsis = np.stack([np.gradient(p.psi, chart.h, edge_order=2)
                      for p in pairs])

    t_max = 2.0 * predicted if t_max is None else t_max
    ts = np.linspace(0.0, t_max, n_t)
    centroids = np.empty(ts.size)
    for i, tcur in enumerate(ts):
        cos_t, sin_t = np.cos(omegas * tcur), np.sin(omegas * tcur)
        amp = c * cos_t + d * sin_t / omegas
        damp = -c * omegas * sin_t + d * cos_t
        u = amp @ psis
        ut = damp @ psis
        ur = amp @ dpsis
        e = 0.5 * (ut ** 2 + ur ** 2 + V * u ** 2)
        etot = simpson(e, x=grid)
        cen = simpson(grid * e, x=grid) / etot
        centroids[i] = cen
        if tcur < 0.8 * predicted:
            window = np.abs(grid - cen) <= localization_radius * width
            frac = simpson(e[window], x=grid[window]) / etot
            if frac < min_energy_fraction:
                raise PacketDispersed(
                    f"energy localization {frac:.2f} below "
                    f"{min_energy_fraction:.2f} at t={tcur:.3f}")
    i_max = int(np.argmax(centroids))
    # parabolic refinement of the maximum
    if 0 < i_max < ts.size - 1:
        y0, y1, y2 = centroids[i_max - 1:i_max + 2]
        denom = y0 - 2 * y1 + y2
        shift = 0.5 * (y0 - y2) / denom if denom != 0.0 else 0.0
        measured = ts[i_max] + shift * (ts[1] - ts[0])
    else:
        measured = ts[i_max]
    return BounceResult(measured=float(measured), predicted=predicted,
                        track_t=ts, track_centroid=centroids)
