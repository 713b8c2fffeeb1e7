"""Time-domain evolution on the 1+1 half strip and the deformation pullback.

The deformed wave operator is taken in time-divergence form,

    P u = d/dtau ( beta^{-1} du/dtau ) + E u,      E = -d^2/drho^2 + V,

integrated as the explicit Hamiltonian pair ``u_tau = beta pi``,
``pi_tau = -E u + f`` (Stormer-Verlet, second order).  The divergence form
matters: with a time-dependent warp multiplying only the spatial operator
the operator is not formally self-adjoint, Green reciprocity fails at order
``d(beta)/dtau``, and the transported pairing cannot reproduce the causal
antisymmetry no matter the resolution.  In static regions (beta = 1) the
equation reduces to ``u_tt = u_rr - V u + f`` and matches the spectral
modules.  The warp equals 1 outside a compact deformation window on a half
strip with a Dirichlet wall at the origin and the two-branch closure
``B = theta A`` at the conformal end.

Boundary closure: the admissible solution space near the conformal end is
spanned by the two branch series ``x^(1/2 -+ nu)`` tied by ``B = theta A``,
which fixes the logarithmic derivative ``psi_t / psi`` at the last grid
point.  That ratio is imposed through a classical symmetric ghost point, so
every real point evolves by the stencil and the closure stays
energy-consistent (directly injecting fitted boundary values couples to
the second-difference operator and is violently unstable).  The ratio
carries a curvature correction evaluated at a local effective frequency (a
relaxed Rayleigh quotient over an interior window, decoupled from the ghost
row to avoid feedback).

The pullback transports a two-point pairing from the early static region
through the deformation: for late test functions f, ``h_f = P(chi G f)`` is
supported in an early cutoff window (time-slice construction), and
``K2'(f, g) = K2_early(h_f, h_g)`` defines the transported pairing, whose
antisymmetric part must reproduce the time-domain causal pairing of the
deformed background and whose positivity is inherited from the Gram form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import frobenius as fb
from .boundary import theta_of_mode
from .errors import (CFLViolation, ClosureDiverged, UnsupportedModel,
                     WindowOverlap)
from .geometry import ModelKind, effective_potential
from .kernels import smooth_bump
from .verify import quintic_smoothstep


@dataclass(frozen=True)
class DeformationProfile:
    """Compact smooth warp: beta = 1 + amplitude * bump(tau) * bump(rho).

    beta is exactly 1 outside [tau0, tau1]; the radial bump must stay away
    from both ends so the boundary closure sees a static metric.
    """

    amplitude: float
    tau_center: float
    tau_width: float
    rho_center: float
    rho_width: float

    def __post_init__(self):
        if self.amplitude <= -1.0:
            raise ValueError("amplitude must keep beta positive")

    @property
    def tau0(self):
        return self.tau_center - self.tau_width

    @property
    def tau1(self):
        return self.tau_center + self.tau_width

    @property
    def bounds(self):
        hi = 1.0 + max(self.amplitude, 0.0)
        lo = 1.0 + min(self.amplitude, 0.0)
        return lo, hi

    def beta(self, tau, rho):
        """Warp factor at time tau on the radial samples rho."""
        bt = smooth_bump(np.array([tau]), self.tau_center, self.tau_width)[0]
        if bt == 0.0 or self.amplitude == 0.0:
            return np.ones_like(rho)
        br = smooth_bump(rho, self.rho_center, self.rho_width)
        return 1.0 + self.amplitude * bt * br

    def validate(self, chart, margin=0.12):
        grid = chart.rho_grid
        if self.rho_center - self.rho_width < grid[0] + margin:
            raise ValueError("deformation bump too close to the wall")
        if self.rho_center + self.rho_width > grid[-1] - margin:
            raise ValueError("deformation bump too close to the boundary")
        lo, hi = self.bounds
        if lo <= 0.0:
            raise ValueError("beta must stay positive")
        # C^4 smoothness proxy on a sample lattice
        taus = np.linspace(self.tau0 - 0.1, self.tau1 + 0.1, 160)
        vals = np.stack([self.beta(t, grid) for t in taus])
        dt4 = np.diff(vals, 4, axis=0) / (taus[1] - taus[0]) ** 4
        scale = max(abs(self.amplitude), 1e-12)
        if np.max(np.abs(dt4)) * self.tau_width ** 4 > 1e6 * scale:
            raise ValueError("beta fails the smoothness proxy in time")
        # exactly one outside the window
        for t in (self.tau0 - 1e-9, self.tau1 + 1e-9):
            if np.any(self.beta(t, grid) != 1.0):
                raise ValueError("beta must be exactly 1 outside the window")
        return True


def static_profile():
    return DeformationProfile(amplitude=0.0, tau_center=0.0, tau_width=1.0,
                              rho_center=0.7, rho_width=0.3)


def _simpson_weights(n, h):
    """Composite Simpson weights on a uniform grid (trapezoid patch if n even)."""
    w = np.zeros(n)
    m = n if n % 2 == 1 else n - 1
    w[:m] = 2.0
    w[1:m:2] = 4.0
    w[0] = 1.0
    w[m - 1] = 1.0
    w *= h / 3.0
    if n % 2 == 0:
        w[-2] += 0.5 * h
        w[-1] = 0.5 * h
    return w


def _smoothstep_derivatives(t, t0, t1):
    """First and second derivatives of the quintic smoothstep."""
    span = t1 - t0
    s = np.clip((np.asarray(t, dtype=float) - t0) / span, 0.0, 1.0)
    d1 = 30.0 * s ** 2 * (1.0 - s) ** 2 / span
    d2 = 60.0 * s * (1.0 - s) * (1.0 - 2.0 * s) / span ** 2
    return d1, d2


@dataclass
class EvolutionState:
    """Discretized field pair at one instant: u and its time derivative.

    w_eff_sq carries the relaxed local frequency estimate used by the
    boundary ratio, so stepping is a pure function of the state.
    """

    tau: float
    u: np.ndarray
    v: np.ndarray
    theta: float          # math.inf encodes the Dirichlet closure
    w_eff_sq: float = 0.0


class StripEvolver:
    """Velocity-Verlet integrator with the twisted boundary ghost closure."""

    def __init__(self, model, chart, symbol, profile=None, source=None,
                 n_fit=8, dt_safety=0.45, w_relax_time=2.5e-3):
        if model.kind is not ModelKind.HALF_STRIP_1P1:
            raise UnsupportedModel("time-domain evolution runs on the strip")
        if chart.rho_grid[0] != 0.0:
            raise ValueError("strip chart must include the wall at rho = 0")
        self.model = model
        self.chart = chart
        self.symbol = symbol
        self.theta = theta_of_mode(symbol, model.n, 0)
        self.profile = profile or static_profile()
        self.profile.validate(chart)
        self.source = source
        self.dt_safety = dt_safety
        self.w_relax_time = w_relax_time
        grid = chart.rho_grid
        self.h = chart.h
        if 0.5 * math.pi - grid[-1] <= self.h:
            raise ValueError("ghost point would cross the conformal end; "
                             "use a chart with x_end > h")
        self.V = effective_potential(model, 0)(grid)
        n = grid.size
        # interior window for the frequency estimate: fixed physical width,
        # independent of the ghost row to keep the estimate out of the
        # closure feedback loop
        self.n_fit = max(n_fit, int(round(0.01 / self.h)))
        self._fit_idx = np.arange(n - self.n_fit - 2, n - 2)
        # distance to the conformal boundary, the branch variable
        self._t_all = 0.5 * math.pi - grid
        self._nu = model.nu

    def max_dt(self):
        lo, hi = self.profile.bounds
        return self.dt_safety * self.h / math.sqrt(hi)

    def boundary_ratio(self, w_eff_sq):
        """Logarithmic derivative psi_t/psi of the admissible branch
        combination at the last grid point.  Cached: the relaxed frequency
        estimate drifts slowly between steps."""
        cached = getattr(self, "_ratio_cache", None)
        if cached is not None and abs(cached[0] - w_eff_sq) <= \
                1e-6 * (1.0 + abs(w_eff_sq)):
            return cached[1]
        nu = self._nu
        s_m, s_p = fb.branch_exponents(nu)
        nu2 = nu * nu - 0.25
        te = self._t_all[-1:]
        cp = fb.branch_coefficients(s_p, nu2, 0.0, w_eff_sq, 4)
        fpv = fb.eval_branch(cp, s_p, te)[0]
        fpd = fb.eval_branch_dv(cp, s_p, te)[0]
        if math.isinf(self.theta):
            val, der = fpv, fpd
        else:
            cm = fb.branch_coefficients(s_m, nu2, 0.0, w_eff_sq, 4)
            val = fb.eval_branch(cm, s_m, te)[0] + self.theta * fpv
            der = fb.eval_branch_dv(cm, s_m, te)[0] + self.theta * fpd
        if val == 0.0 or not np.isfinite(der / val):
            raise ClosureDiverged(
                "admissible branch combination vanishes at the grid end")
        self._ratio_cache = (w_eff_sq, der / val)
        return der / val

    def _minus_Eu(self, tau, u, w_eff_sq):
        """-E u + source: the momentum flow of the Hamiltonian pair."""
        a = np.zeros_like(u)
        a[1:-1] = u[2:] - 2.0 * u[1:-1] + u[:-2]
        # symmetric ghost with du/drho = -(psi_t/psi) u at the end
        r = self.boundary_ratio(w_eff_sq)
        ghost = u[-2] - 2.0 * self.h * r * u[-1]
        a[-1] = ghost - 2.0 * u[-1] + u[-2]
        a /= self.h ** 2
        a -= self.V * u
        if self.source is not None:
            a = a + self.source(tau, self.chart.rho_grid)
        a[0] = 0.0
        return a

    def _omega_estimate(self, u, flow):
        """Rayleigh quotient of the measured curvature over the interior
        window, capped so the branch series stays convergent there.

        Gated on the window amplitude: when the boundary region carries only
        noise relative to the bulk field, the quotient is meaningless and
        the estimate decays to the static value instead of swinging to the
        cap (which parametrically pumps the closure).
        """
        y = u[self._fit_idx]
        yy = float(y @ y)
        if yy == 0.0:
            return 0.0
        mean_sq_win = yy / y.size
        mean_sq_all = float(u @ u) / u.size
        gate = min(1.0, mean_sq_win / (1.0e-6 * mean_sq_all + 1e-300))
        w2 = float(-(flow[self._fit_idx] @ y) / yy)
        cap = (1.5 / float(self._t_all[self._fit_idx][0])) ** 2
        return gate * min(max(w2, -cap), cap)

    def initial_state(self, u0, v0, tau=0.0):
        u = np.array(u0, dtype=float)
        v = np.array(v0, dtype=float)
        u[0] = 0.0
        v[0] = 0.0
        # seed the boundary frequency estimate from the data
        flow = self._minus_Eu(tau, u, 0.0)
        w_eff = self._omega_estimate(u, flow)
        return EvolutionState(tau=tau, u=u, v=v, theta=self.theta,
                              w_eff_sq=w_eff)

    def _pi_of(self, state):
        beta = self.profile.beta(state.tau, self.chart.rho_grid)
        return state.v / beta

    def step(self, state, dt):
        """One Stormer-Verlet step; raises CFLViolation on oversized dt."""
        if dt > self.max_dt() * (1.0 + 1e-12):
            raise CFLViolation(
                f"dt = {dt:g} above stable limit {self.max_dt():g}")
        u, tau = state.u, state.tau
        grid = self.chart.rho_grid
        pi = self._pi_of(state)
        flow = self._minus_Eu(tau, u, state.w_eff_sq)
        # the relaxed estimate lags behind on a fixed physical time scale,
        # so closure dynamics do not depend on the step size
        relax = min(0.5, dt / self.w_relax_time)
        w_eff = ((1.0 - relax) * state.w_eff_sq
                 + relax * self._omega_estimate(u, flow))
        pi_half = pi + 0.5 * dt * flow
        u_new = u + dt * self.profile.beta(tau + 0.5 * dt, grid) * pi_half
        u_new[0] = 0.0
        flow_new = self._minus_Eu(tau + dt, u_new, w_eff)
        pi_new = pi_half + 0.5 * dt * flow_new
        pi_new[0] = 0.0
        v_new = self.profile.beta(tau + dt, grid) * pi_new
        return EvolutionState(tau=tau + dt, u=u_new, v=v_new,
                              theta=self.theta, w_eff_sq=w_eff)

    def run(self, state, t_end, dt, record_windows=None):
        """Evolve to t_end; record rows whose time falls in the windows.

        Returns (times, fields) with fields of shape (n_recorded, n_rho).
        """
        times, rows = [], []

        def maybe_record(st):
            if record_windows is None:
                times.append(st.tau)
                rows.append(st.u.copy())
                return
            for (a, b) in record_windows:
                if a - 1e-12 <= st.tau <= b + 1e-12:
                    times.append(st.tau)
                    rows.append(st.u.copy())
                    return

        maybe_record(state)
        n_steps = int(round((t_end - state.tau) / dt))
        for _ in range(n_steps):
            state = self.step(state, dt)
            maybe_record(state)
        return np.array(times), np.array(rows), state


def growth_factor(evolver, dt, n_steps=2000, warmup=500, trials=3, seed=7):
    """Power-iteration estimate of the per-step amplification in the energy
    norm.  A warmup absorbs the bounded shadow-energy rebalancing of the
    integrator before the growth rate is read off."""
    rng = np.random.default_rng(seed)
    n = evolver.chart.rho_grid.size
    worst = 0.0
    for _ in range(trials):
        u0 = rng.standard_normal(n) * 1e-3
        v0 = rng.standard_normal(n) * 1e-3
        u0[0] = v0[0] = 0.0
        st = evolver.initial_state(u0, v0)
        for _ in range(warmup):
            st = evolver.step(st, dt)
        e0 = strip_energy(evolver, st)
        for _ in range(n_steps):
            st = evolver.step(st, dt)
        e1 = strip_energy(evolver, st)
        worst = max(worst, (e1 / e0) ** (0.5 / n_steps))
    return worst


def strip_energy(evolver, state):
    """Conserved energy of the static-region dynamics.

    The bulk integral alone is not conserved under the generalized Robin
    closure; the boundary stores 0.5 * r * u(end)^2 with r the closure
    ratio, whose time derivative balances the bulk flux.
    """
    grid = evolver.chart.rho_grid
    du = np.gradient(state.u, evolver.h, edge_order=2)
    dens = 0.5 * (state.v ** 2 + du ** 2 + evolver.V * state.u ** 2)
    bulk = simpson(dens, x=grid)
    r = evolver.boundary_ratio(state.w_eff_sq)
    return bulk + 0.5 * r * state.u[-1] ** 2


def gaussian_source(tau_s, rho_s, tau_width, rho_width, amplitude=1.0):
    """Separable compact bump source for the driven wave equation."""

    def src(tau, rho):
        bt = smooth_bump(np.array([tau]), tau_s, tau_width)[0]
        if bt == 0.0:
            return 0.0
        return amplitude * bt * smooth_bump(rho, rho_s, rho_width)

    return src


def fd_green(model, chart, symbol, source_spec, t_end, dt=None, profile=None,
             record_windows=None):
    """Retarded solution for a compact source bump, by direct evolution.

    source_spec = (tau_s, rho_s, tau_width, rho_width); the bump must be
    resolved by the grid.
    """
    tau_s, rho_s, tau_w, rho_w = source_spec
    if rho_w < 6 * chart.h or tau_w < 6 * (dt or chart.h):
        raise ValueError("source bump must be resolved by the grid")
    src = gaussian_source(tau_s, rho_s, tau_w, rho_w)
    ev = StripEvolver(model, chart, symbol, profile=profile, source=src)
    if dt is None:
        dt = ev.max_dt()
    n = chart.rho_grid.size
    st = ev.initial_state(np.zeros(n), np.zeros(n))
    return ev.run(st, t_end, dt, record_windows=record_windows)


# ---------------------------------------------------------------------------
# Deformation pullback
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StripTestFunction:
    """Separable test function on the strip: s(tau) * r(rho)."""

    tau_center: float
    tau_width: float
    rho_center: float
    rho_width: float
    label: str = ""

    def t_profile(self, taus):
        return smooth_bump(taus, self.tau_center, self.tau_width)

    def r_profile(self, grid):
        return smooth_bump(grid, self.rho_center, self.rho_width)

    @property
    def t_support(self):
        return (self.tau_center - self.tau_width,
                self.tau_center + self.tau_width)


@dataclass
class PullbackResult:
    matrix: np.ndarray          # transported two-point pairing
    causal: np.ndarray          # time-domain causal pairing of the battery
    battery: list


def two_point_direct(early_data, fns):
    """Static two-point pairing of separable test functions (no evolution)."""
    grid = early_data.chart.rho_grid
    pairs = early_data.pairs(0)
    omegas = np.array([p.omega for p in pairs])
    out = np.zeros((len(fns), len(fns)), dtype=complex)
    hplus = []
    for f in fns:
        taus = np.linspace(f.t_support[0], f.t_support[1], 4001)
        prof = f.t_profile(taus)
        ft = np.array([np.trapezoid(prof * np.exp(1j * w * taus), taus)
                       for w in omegas])
        rad = np.array([simpson(p.psi * f.r_profile(grid), x=grid)
                        for p in pairs])
        hplus.append(ft * rad)
    for i, hi in enumerate(hplus):
        for j, hj in enumerate(hplus):
            out[i, j] = np.sum(hi * np.conjugate(hj) / (2.0 * omegas))
    return out


def pull_back_two_point(early_data, profile, battery, chi_window,
                        t_end=None, dt=None):
    """Transport the early-region two-point pairing to late test functions.

    For each f in the battery (supported after the deformation), computes
    G f backwards through the deformation, forms h_f = P(chi G f) in the
    early static window chi_window, and assembles
    K2'(f,g) = sum_k H_f(omega_k) conj(H_g(omega_k)) / (2 omega_k) from the
    early mode family.  Also returns the time-domain causal pairing
    <f_i, G f_j> for the antisymmetry cross-check.
    """
    model, chart, symbol = (early_data.model, early_data.chart,
                            early_data.symbol)
    grid = chart.rho_grid
    w1, w2 = chi_window
    if not w2 < profile.tau0:
        raise WindowOverlap("cutoff window must precede the deformation")
    for f in battery:
        if f.t_support[0] <= profile.tau1:
            raise WindowOverlap(
                f"test function {f.label or '?'} overlaps the deformation")
    if t_end is None:
        t_end = max(f.t_support[1] for f in battery) + 0.2
    ev_probe = StripEvolver(model, chart, symbol, profile=profile)
    if dt is None:
        dt = ev_probe.max_dt()
    if w2 - w1 < 10 * dt:
        raise WindowOverlap("cutoff window unresolved by the time step")

    pairs = early_data.pairs(0)
    omegas = np.array([p.omega for p in pairs])
    psis = np.stack([p.psi for p in pairs])

    late_windows = [(f.t_support[0] - 2 * dt, f.t_support[1] + 2 * dt)
                    for f in battery]
    hplus = []
    ret_fields = []
    for f in battery:
        src = gaussian_source(f.tau_center, f.rho_center, f.tau_width,
                              f.rho_width)
        # advanced part: time-reversed retarded run records the early window
        T = t_end
        rev_center = T - f.tau_center
        src_rev = gaussian_source(rev_center, f.rho_center, f.tau_width,
                                  f.rho_width)
        ev_rev = StripEvolver(
            model, chart, symbol, source=src_rev,
            profile=DeformationProfile(
                amplitude=profile.amplitude,
                tau_center=T - profile.tau_center,
                tau_width=profile.tau_width,
                rho_center=profile.rho_center,
                rho_width=profile.rho_width))
        st = ev_rev.initial_state(np.zeros(grid.size), np.zeros(grid.size))
        t_rev, rows_rev, _ = ev_rev.run(
            st, T, dt, record_windows=[(T - w2 - 4 * dt, T - w1 + 4 * dt)])
        # G f on the early window: retarded part vanishes there
        taus = T - t_rev[::-1]
        gf = -rows_rev[::-1]
        # h = P(chi G f) = chi'' G f + 2 chi' d/dt(G f) since P(G f) = 0;
        # the time-derivative form keeps the closure columns consistent
        chip, chipp = _smoothstep_derivatives(taus[1:-1], w1, w2)
        dgf = (gf[2:] - gf[:-2]) / (2.0 * dt)
        h_rows = chipp[:, None] * gf[1:-1] + 2.0 * chip[:, None] * dgf
        h_t = taus[1:-1]
        inside = (h_t >= w1) & (h_t <= w2)
        h_rows = h_rows[inside]
        h_t = h_t[inside]
        # mode transform of h over the window
        wgt = _simpson_weights(grid.size, chart.h)
        overlaps = h_rows @ (psis * wgt).T
        ft = np.exp(1j * np.outer(h_t, omegas))
        hplus.append(np.trapezoid(overlaps * ft, h_t, axis=0))

        # forward (retarded) run for the causal pairing
        ev_fwd = StripEvolver(model, chart, symbol, profile=profile,
                              source=src)
        st = ev_fwd.initial_state(np.zeros(grid.size), np.zeros(grid.size))
        t_f, rows_f, _ = ev_fwd.run(st, t_end, dt,
                                    record_windows=late_windows)
        ret_fields.append((t_f, rows_f))

    n_b = len(battery)
    matrix = np.zeros((n_b, n_b), dtype=complex)
    for i in range(n_b):
        for j in range(n_b):
            matrix[i, j] = np.sum(hplus[i] * np.conjugate(hplus[j])
                                  / (2.0 * omegas))
    causal = np.zeros((n_b, n_b))
    for i, fi in enumerate(battery):
        ri = fi.r_profile(grid)
        for j in range(n_b):
            t_f, rows_f = ret_fields[j]
            sel = ((t_f >= fi.t_support[0] - 1e-12)
                   & (t_f <= fi.t_support[1] + 1e-12))
            if not np.any(sel):
                continue
            tt = t_f[sel]
            prof = fi.t_profile(tt)
            space = np.array([simpson(row * ri, x=grid)
                              for row in rows_f[sel]])
            causal[i, j] = np.trapezoid(prof * space, tt)
    # antisymmetrized: <f_i, G f_j> with G = ret - adv reduces to the
    # retarded pairing difference for late-supported batteries
    causal = causal - causal.T
    return PullbackResult(matrix=matrix, causal=causal,
                          battery=list(battery))
