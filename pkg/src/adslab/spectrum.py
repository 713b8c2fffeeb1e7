"""Per-mode radial eigenvalue solver with boundary-trace shooting.

For each angular harmonic ``l`` the radial problem is a singular
Sturm-Liouville equation in Schrodinger gauge,

    -psi'' + V_l(rho) psi = omega^2 psi     on (0, pi/2),

with a regular branch ``rho^(1/2+mu_l)`` at the center and two branches
``x^(1/2 -+ nu)`` (x = cos rho) at the conformal boundary.  For nu in (0,1)
both boundary branches are square integrable (limit-circle endpoint) and a
boundary condition is required; it is imposed on the trace coefficients as
``B = theta_l * A`` where ``A`` and ``B`` multiply the decaying and growing
branch respectively.  Dirichlet (theta = inf) means ``A = 0`` and is
admissible for every nu > 0.

The solver shoots from the center with a Numerov integrator (fixed step,
fourth order, batched over trial frequencies and jitted), extracts ``(A, B)``
by a least-squares fit against the two branch series inside the boundary
layer, and finds roots of ``S(omega^2) = B - theta_l A`` by bracketing on a
uniform omega grid, bisection, and secant polish.  Norms include series-exact
endpoint-layer corrections so that eigenfunctions are orthonormal in
L^2((0, pi/2), d rho), the mode image of the weighted spacetime L^2 space.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit
from scipy.integrate import simpson

from . import frobenius as fb
from .boundary import BoundarySymbol, theta_of_mode, validate_hypothesis
from .errors import (BracketExhausted, FitDiverged, NegativeMode,
                     UnsupportedModel)
from .geometry import (ModelKind, RadialChart, SpacetimeModel,
                       effective_potential, mu_of_mode)


@njit(cache=True)
def _numerov_batch(V, h, w2, psi0, psi1):
    """Integrate psi'' = (V - w2) psi for a batch of frequencies.

    The midpoint factor 2 + (5/6) h^2 g is formed directly from g; going
    through 12 - 10*(1 - h^2 g/12) would quantize the O(h^2) frequency
    information at machine epsilon and bias root positions by ~1e-8.
    """
    n = V.size
    n_w = w2.size
    out = np.empty((n_w, n))
    h2 = h * h
    for k in range(n_w):
        w = w2[k]
        y_prev = psi0[k]
        y_cur = psi1[k]
        out[k, 0] = y_prev
        out[k, 1] = y_cur
        g_prev = V[0] - w
        g_cur = V[1] - w
        for i in range(2, n):
            g_next = V[i] - w
            y_next = (y_cur * 2.0 + h2 * ((5.0 / 6.0) * g_cur * y_cur
                                          + (1.0 / 12.0) * g_prev * y_prev)
                      - y_prev) / (1.0 - (h2 / 12.0) * g_next)
            y_prev = y_cur
            y_cur = y_next
            g_prev = g_cur
            g_cur = g_next
            out[k, i] = y_cur
    return out


_CHUNK = 256  # frequencies per Numerov batch; bounds scan memory


@dataclass
class ModeProblem:
    """One radial eigenvalue problem: background, symbol and harmonic index."""

    model: SpacetimeModel
    symbol: BoundarySymbol
    l: int
    chart: RadialChart
    omega_window: tuple = (-25.0, None)
    tol: float = 1.0e-10
    scan_step: float = 0.05
    fit_resid_tol: float = 1.0e-6

    def __post_init__(self):
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")
        if (self.model.kind is not ModelKind.HALF_STRIP_1P1
                and self.chart.rho_grid[0] <= 0.0):
            raise ValueError("chart must start at rho > 0 for this model")
        validate_hypothesis(self.symbol)
        nu = self.model.nu
        if not self.symbol.is_dirichlet and not 0.0 < nu < 1.0:
            raise UnsupportedModel(
                "non-Dirichlet conditions need nu in (0,1): the decaying "
                f"branch is not normalizable for nu = {nu:g}")
        self._V = effective_potential(self.model, self.l)(self.chart.rho_grid)
        self._mu = mu_of_mode(self.model, self.l)
        self._theta = theta_of_mode(self.symbol, self.model.n, self.l)
        self._fit_idx = self.chart.fit_window()
        self._fit_x = self.chart.x_grid[self._fit_idx]
        # resonant decaying branch (nu a positive integer): solved for
        # Dirichlet via two-sided Wronskian matching instead of an A-trace
        # fit; non-Dirichlet resonant cases are already outside the nu window
        self._resonant = abs(nu - round(nu)) < 1.0e-9 and round(nu) >= 1

    @property
    def theta_l(self):
        return self._theta

    @property
    def mu_l(self):
        return self._mu

    @property
    def other_const(self):
        """(mu^2 - 1/4) entering the boundary branch recursion."""
        if self.model.kind is ModelKind.HALF_STRIP_1P1:
            return 0.0
        return self._mu ** 2 - 0.25

    # -- launches ---------------------------------------------------------

    def _launch_center(self, w2):
        g = self.chart.rho_grid
        n_w = w2.size
        if self.model.kind is ModelKind.HALF_STRIP_1P1:
            # regular artificial wall at rho = 0
            if g[0] != 0.0:
                raise ValueError("half-strip chart must start at the wall")
            psi0 = np.zeros(n_w)
            psi1 = np.full(n_w, g[1])
            return psi0, psi1
        mu = self._mu
        coeff = fb.branch_coefficients(0.5 + mu, mu * mu - 0.25,
                                       self.model.nu ** 2 - 0.25, w2,
                                       self.chart.series_terms + 4)
        y = np.sin(g[:2])
        vals = fb.eval_branch_batch(coeff, 0.5 + mu, y)
        return vals[:, 0], vals[:, 1]

    def _boundary_bases(self, w2):
        """Branch basis values on the fit window for each trial frequency."""
        nt = self.chart.series_terms
        s_m, s_p = fb.branch_exponents(self.model.nu)
        nu2 = self.model.nu ** 2 - 0.25
        cm = None
        if not self._resonant:
            cm = fb.branch_coefficients(s_m, nu2, self.other_const, w2, nt)
            fm = fb.eval_branch_batch(cm, s_m, self._fit_x)
        else:
            fm = None
        cp = fb.branch_coefficients(s_p, nu2, self.other_const, w2, nt)
        fp = fb.eval_branch_batch(cp, s_p, self._fit_x)
        return fm, fp, cm, cp

    # -- shooting ---------------------------------------------------------

    def integrate(self, w2):
        """Center-launched solutions on the full grid, one row per frequency."""
        w2 = np.atleast_1d(np.asarray(w2, dtype=float))
        psi0, psi1 = self._launch_center(w2)
        return _numerov_batch(self._V, self.chart.h, w2, psi0, psi1)

    def traces(self, psi_rows, w2):
        """(A, B, fit residual) for solution samples against branch bases."""
        w2 = np.atleast_1d(np.asarray(w2, dtype=float))
        fm, fp, _, _ = self._boundary_bases(w2)
        win = psi_rows[:, self._fit_idx]
        if fm is None:
            # resonant Dirichlet: growing branch only
            bb = np.sum(fp * fp, axis=1)
            B = np.sum(fp * win, axis=1) / bb
            resid = np.linalg.norm(win - B[:, None] * fp, axis=1)
            A = np.zeros_like(B)
        else:
            # column-scaled 2x2 normal equations
            nm = np.linalg.norm(fm, axis=1)
            npl = np.linalg.norm(fp, axis=1)
            u = fm / nm[:, None]
            v = fp / npl[:, None]
            uu = np.sum(u * u, axis=1)
            vv = np.sum(v * v, axis=1)
            uv = np.sum(u * v, axis=1)
            ru = np.sum(u * win, axis=1)
            rv = np.sum(v * win, axis=1)
            det = uu * vv - uv * uv
            a_s = (ru * vv - rv * uv) / det
            b_s = (rv * uu - ru * uv) / det
            A = a_s / nm
            B = b_s / npl
            resid = np.linalg.norm(win - A[:, None] * fm - B[:, None] * fp,
                                   axis=1)
        scale = np.linalg.norm(win, axis=1)
        rel = resid / np.where(scale > 0.0, scale, 1.0)
        return A, B, rel

    def shooting_function(self, w2):
        """S(omega^2): A for Dirichlet, else B - theta_l A (normalized)."""
        w2 = np.atleast_1d(np.asarray(w2, dtype=float))
        out = np.empty(w2.size)
        for lo in range(0, w2.size, _CHUNK):
            chunk = w2[lo:lo + _CHUNK]
            if self._resonant:
                out[lo:lo + _CHUNK] = self._matching_function(chunk)
                continue
            psi = self.integrate(chunk)
            A, B, rel = self.traces(psi, chunk)
            if np.any(rel > self.fit_resid_tol):
                worst = float(np.max(rel))
                raise FitDiverged(
                    f"branch fit residual {worst:.3e} above "
                    f"{self.fit_resid_tol:.1e} (l={self.l}); refine the grid "
                    "or thin the boundary layer")
            scale = np.linalg.norm(psi[:, self._fit_idx], axis=1)
            scale = np.where(scale > 0.0, scale, 1.0)
            if self.symbol.is_dirichlet:
                out[lo:lo + _CHUNK] = A * math.sqrt(self._fit_idx.size) / scale
            else:
                out[lo:lo + _CHUNK] = (B - self.theta_l * A) / scale
        return out

    def _matching_function(self, w2):
        """Wronskian mismatch of center and boundary launches at mid grid."""
        g = self.chart.rho_grid
        im = g.size // 2
        psi_c = self.integrate(w2)
        psi_b = self._integrate_from_boundary(w2)
        h = self.chart.h
        dc = (psi_c[:, im + 1] - psi_c[:, im - 1]) / (2 * h)
        db = (psi_b[:, im + 1] - psi_b[:, im - 1]) / (2 * h)
        w = psi_c[:, im] * db - dc * psi_b[:, im]
        sc = np.sqrt((psi_c[:, im] ** 2 + dc ** 2) * (psi_b[:, im] ** 2 + db ** 2))
        return w / np.where(sc > 0.0, sc, 1.0)

    def _integrate_from_boundary(self, w2):
        """Pure growing-branch solution integrated inward from the boundary."""
        w2 = np.atleast_1d(np.asarray(w2, dtype=float))
        nt = self.chart.series_terms
        s_p = 0.5 + self.model.nu
        cp = fb.branch_coefficients(s_p, self.model.nu ** 2 - 0.25,
                                    self.other_const, w2, nt)
        xs = self.chart.x_grid
        vals = fb.eval_branch_batch(cp, s_p, xs[-2:])
        rev = _numerov_batch(self._V[::-1].copy(), self.chart.h, w2,
                             vals[:, 1].copy(), vals[:, 0].copy())
        return rev[:, ::-1]


def frobenius_traces(psi, model, chart, l, omega_sq, resid_tol=1.0e-6):
    """Boundary trace coefficients (A, B) of radial samples psi.

    psi must be sampled on chart.rho_grid into the boundary layer.  Raises
    FitDiverged when the two-branch fit does not represent the samples to
    resid_tol (grid too coarse or layer too thick).
    """
    nt = chart.series_terms
    nu = model.nu
    s_m, s_p = fb.branch_exponents(nu)
    if model.kind is ModelKind.HALF_STRIP_1P1:
        other = 0.0
    else:
        other = mu_of_mode(model, l) ** 2 - 0.25
    idx = chart.fit_window()
    x = chart.x_grid[idx]
    cm = fb.branch_coefficients(s_m, nu * nu - 0.25, other, float(omega_sq), nt)
    cp = fb.branch_coefficients(s_p, nu * nu - 0.25, other, float(omega_sq), nt)
    basis = np.stack([fb.eval_branch(cm, s_m, x), fb.eval_branch(cp, s_p, x)])
    win = np.asarray(psi, dtype=float)[idx]
    nrm = np.linalg.norm(basis, axis=1)
    sol, *_ = np.linalg.lstsq((basis / nrm[:, None]).T, win, rcond=None)
    A, B = sol / nrm
    resid = np.linalg.norm(win - A * basis[0] - B * basis[1])
    scale = np.linalg.norm(win)
    if resid > resid_tol * max(scale, 1.0e-300):
        raise FitDiverged(
            f"trace fit residual {resid / max(scale, 1e-300):.3e} above "
            f"{resid_tol:.1e}")
    return float(A), float(B)


# ---------------------------------------------------------------------------
# Eigen-data containers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EigenPair:
    """Normalized radial eigenfunction with boundary and center trace data."""

    l: int
    omega_sq: float
    psi: np.ndarray
    A: float
    B: float
    center_coef: float
    norm: float          # pre-normalization L2 norm of the raw shot

    @property
    def omega(self):
        return math.sqrt(self.omega_sq)


@dataclass(frozen=True)
class SpectralData:
    """Orthonormal eigenpairs per harmonic, up to (l_max, k_max)."""

    model: SpacetimeModel
    symbol: BoundarySymbol
    chart: RadialChart
    modes: dict

    @property
    def l_values(self):
        return sorted(self.modes)

    @property
    def l_max(self):
        return max(self.modes)

    def pairs(self, l):
        return self.modes[l]

    def min_omega_sq(self):
        return min(p.omega_sq for pairs in self.modes.values() for p in pairs)

    def to_json_dict(self):
        per_l = []
        for l in self.l_values:
            pairs = self.modes[l]
            per_l.append({
                "l": l,
                "omega_sq": [p.omega_sq for p in pairs],
                "A": [p.A for p in pairs],
                "B": [p.B for p in pairs],
            })
        ev = np.array([p.omega_sq for l in self.l_values
                       for p in self.modes[l]])
        checksum = hashlib.sha256(ev.tobytes()).hexdigest()[:16]
        return {
            "schema": "adslab/spectral-v1",
            "model": {"n": self.model.n, "mass_sq": self.model.mass_sq,
                      "nu": self.model.nu, "kind": self.model.kind.value},
            "symbol": self.symbol.label(),
            "grid": {"n_rho": int(self.chart.rho_grid.size),
                     "rho_min": float(self.chart.rho_grid[0]),
                     "rho_max": float(self.chart.rho_grid[-1]),
                     "boundary_layer": self.chart.boundary_layer},
            "modes": per_l,
            "checksum": checksum,
        }

    def eigenfunctions_csv(self):
        """CSV text: rho column followed by one psi column per mode."""
        buf = io.StringIO()
        writer = csv.writer(buf)
        header = ["rho"] + [f"psi_l{l}_k{k}" for l in self.l_values
                            for k in range(len(self.modes[l]))]
        buf.write("# schema=adslab/eigenfunctions-v1\n")
        writer.writerow(header)
        cols = [self.chart.rho_grid] + [p.psi for l in self.l_values
                                        for p in self.modes[l]]
        for row in zip(*cols):
            writer.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# Norms with endpoint-layer corrections
# ---------------------------------------------------------------------------

def _value_terms(problem, w2, A, B, center_coef):
    nt = problem.chart.series_terms
    nu = problem.model.nu
    s_m, s_p = fb.branch_exponents(nu)
    nu2 = nu * nu - 0.25
    other = problem.other_const
    if problem.symbol.is_dirichlet:
        A = 0.0  # the fitted A is noise; its branch may not be integrable
    cm = (np.zeros(nt + 1) if (A == 0.0 or problem._resonant)
          else fb.branch_coefficients(s_m, nu2, other, w2, nt))
    cp = fb.branch_coefficients(s_p, nu2, other, w2, nt)
    bterms = fb.boundary_value_terms(A, B, cm, cp, nu)
    if problem.model.kind is ModelKind.HALF_STRIP_1P1:
        cterms = []
    else:
        mu = problem.mu_l
        cr = fb.branch_coefficients(0.5 + mu, mu * mu - 0.25, nu2, w2, nt + 4)
        cterms = fb.center_value_terms(center_coef, cr, mu)
    return bterms, cterms


def _norm_sq(problem, w2, psi, A, B, center_coef=1.0):
    chart = problem.chart
    interior = simpson(psi * psi, x=chart.rho_grid)
    bterms, cterms = _value_terms(problem, w2, A, B, center_coef)
    jac = fb.binom_series(-0.5, chart.series_terms + 2)
    x_end = float(chart.x_grid[-1])
    tail_b = fb.pair_tail_integral(bterms, bterms, x_end, jac).real
    tail_c = 0.0
    if cterms:
        y0 = float(math.sin(chart.rho_grid[0]))
        tail_c = fb.pair_tail_integral(cterms, cterms, y0, jac).real
    return float(interior + tail_b + tail_c)


def mode_inner(data, pair1, pair2, problem=None):
    """L2 inner product of two eigenpairs including endpoint tails."""
    if pair1.l != pair2.l:
        return 0.0
    prob = problem or ModeProblem(data.model, data.symbol, pair1.l, data.chart)
    chart = data.chart
    interior = simpson(pair1.psi * pair2.psi, x=chart.rho_grid)
    b1, c1 = _value_terms(prob, pair1.omega_sq, pair1.A, pair1.B,
                          pair1.center_coef)
    b2, c2 = _value_terms(prob, pair2.omega_sq, pair2.A, pair2.B,
                          pair2.center_coef)
    jac = fb.binom_series(-0.5, chart.series_terms + 2)
    out = interior + fb.pair_tail_integral(b1, b2, float(chart.x_grid[-1]),
                                           jac).real
    if c1 and c2:
        y0 = float(math.sin(chart.rho_grid[0]))
        out += fb.pair_tail_integral(c1, c2, y0, jac).real
    return float(out)


# ---------------------------------------------------------------------------
# Root finding
# ---------------------------------------------------------------------------

def _refine_roots(problem, brackets, max_iter=80):
    """Vectorized bisection followed by secant polish on S(omega^2)."""
    lo = np.array([b[0] for b in brackets])
    hi = np.array([b[1] for b in brackets])
    s_lo = problem.shooting_function(lo)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        s_mid = problem.shooting_function(mid)
        left = np.sign(s_mid) == np.sign(s_lo)
        lo = np.where(left, mid, lo)
        s_lo = np.where(left, s_mid, s_lo)
        hi = np.where(left, hi, mid)
        if np.all(hi - lo < problem.tol):
            break
    # secant polish
    a, b = lo.copy(), hi.copy()
    sa = problem.shooting_function(a)
    sb = problem.shooting_function(b)
    for _ in range(4):
        denom = sb - sa
        ok = np.abs(denom) > 0.0
        c = np.where(ok, b - sb * (b - a) / np.where(ok, denom, 1.0), b)
        c = np.clip(c, lo, hi)
        sc = problem.shooting_function(c)
        a, sa = b, sb
        b, sb = c, sc
    return b


def solve_modes(problem, k_max, omega_max=None):
    """The k_max lowest eigenpairs of one radial mode problem."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if omega_max is None:
        omega_max = (problem.model.nu_plus + problem.l + 2.0 * (k_max + 2)
                     + 4.0 * problem.scan_step)
        if problem.model.kind is ModelKind.HALF_STRIP_1P1:
            omega_max = problem.model.nu + 1.0 + 2.0 * (k_max + 2)
    w_hi = problem.omega_window[1]
    if w_hi is not None:
        omega_max = min(omega_max, math.sqrt(w_hi))
    omegas = np.arange(problem.scan_step, omega_max, problem.scan_step)
    svals = problem.shooting_function(omegas ** 2)
    sign = np.sign(svals)
    flips = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if flips.size < k_max:
        raise BracketExhausted(
            f"found {flips.size} sign changes below omega={omega_max:g}, "
            f"need {k_max}; widen the search window")
    flips = flips[:k_max]
    brackets = [(omegas[i] ** 2, omegas[i + 1] ** 2) for i in flips]
    roots = _refine_roots(problem, brackets)

    pairs = []
    psi_rows = problem.integrate(roots)
    if problem._resonant:
        A_arr = np.zeros(roots.size)
        B_arr = np.zeros(roots.size)
        # match inward growing-branch solution to fix the outer region
        psi_b = problem._integrate_from_boundary(roots)
        n = problem.chart.rho_grid.size
        for r in range(roots.size):
            # match where the inward solution is largest, away from nodes
            im = n // 3 + int(np.argmax(np.abs(psi_b[r, n // 3:2 * n // 3])))
            scale = psi_rows[r, im] / psi_b[r, im]
            psi_rows[r, im:] = scale * psi_b[r, im:]
            B_arr[r] = scale
    else:
        A_arr, B_arr, _ = problem.traces(psi_rows, roots)
    for r, w2 in enumerate(roots):
        psi = psi_rows[r]
        nrm = math.sqrt(_norm_sq(problem, w2, psi, A_arr[r], B_arr[r]))
        pairs.append(EigenPair(
            l=problem.l, omega_sq=float(w2), psi=psi / nrm,
            A=float(A_arr[r] / nrm), B=float(B_arr[r] / nrm),
            center_coef=1.0 / nrm, norm=nrm))
    for p, q in zip(pairs, pairs[1:]):
        if q.omega_sq <= p.omega_sq:
            raise BracketExhausted("eigenvalues not strictly increasing; "
                                   "degenerate or skipped root suspected")
    return pairs


def solve_spectral_data(model, symbol, chart, l_max, k_max, **kw):
    """Solve all harmonics l = 0..l_max and assemble SpectralData."""
    modes = {}
    for l in range(l_max + 1):
        problem = ModeProblem(model, symbol, l, chart, **kw)
        modes[l] = solve_modes(problem, k_max)
    return SpectralData(model=model, symbol=symbol, chart=chart, modes=modes)


def negative_mode_scan(problem, kappa_max=5.0, n_scan=200):
    """Root of S on omega^2 < 0 (bound state), or None.

    Scans kappa = sqrt(-omega^2) from the window floor down to ~0; a sign
    change brackets a bound state, refined by bisection.
    """
    w_lo = problem.omega_window[0]
    kmax = min(kappa_max, math.sqrt(abs(w_lo))) if w_lo is not None else kappa_max
    kappas = np.linspace(1.0e-4, kmax, n_scan)
    w2 = -kappas ** 2
    svals = problem.shooting_function(w2)
    sign = np.sign(svals)
    flips = np.nonzero(sign[1:] * sign[:-1] < 0)[0]
    if flips.size == 0:
        return None
    i = flips[0]
    lo, hi = w2[i + 1], w2[i]
    root = _refine_roots(problem, [(lo, hi)])
    return float(root[0])


def bound_state(problem):
    """Normalized EigenPair of the bound state with omega^2 < 0, or None."""
    root = negative_mode_scan(problem)
    if root is None:
        return None
    w2 = np.atleast_1d(root)
    psi = problem.integrate(w2)
    A, B, _ = problem.traces(psi, w2)
    nrm = math.sqrt(_norm_sq(problem, root, psi[0], A[0], B[0]))
    return EigenPair(l=problem.l, omega_sq=root, psi=psi[0] / nrm,
                     A=float(A[0] / nrm), B=float(B[0] / nrm),
                     center_coef=1.0 / nrm, norm=nrm)


def check_lower_bound(data):
    """Lowest omega^2 over all computed modes; raises NegativeMode if a
    bound-state search in omega^2 < 0 succeeds for any harmonic."""
    if not data.modes:
        raise ValueError("empty spectral data")
    for l in data.l_values:
        problem = ModeProblem(data.model, data.symbol, l, data.chart)
        root = negative_mode_scan(problem)
        if root is not None:
            raise NegativeMode(l, root)
    return data.min_omega_sq()


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------

def gram_matrix(data, l, k_max=None):
    """Inner-product matrix of the computed eigenfunctions of harmonic l."""
    pairs = data.pairs(l)
    if k_max is not None:
        pairs = pairs[:k_max]
    prob = ModeProblem(data.model, data.symbol, l, data.chart)
    g = np.empty((len(pairs), len(pairs)))
    for i, p in enumerate(pairs):
        for j, q in enumerate(pairs):
            if j < i:
                g[i, j] = g[j, i]
            else:
                g[i, j] = mode_inner(data, p, q, problem=prob)
    return g


def completeness_defect(data, f, l, k_max=None):
    """Relative L2 defect of expanding f in the first k_max modes of l.

    f is either an EigenPair (inner products carry endpoint tails) or radial
    samples of a function supported away from both endpoints, where the chart
    quadrature is exact.  Evaluated through the quadratic form with the exact
    Gram matrix, so eigenfunction input reproduces the orthonormality floor.
    """
    grid = data.chart.rho_grid
    pairs = data.pairs(l)
    if k_max is not None:
        pairs = pairs[:k_max]
    prob = ModeProblem(data.model, data.symbol, l, data.chart)
    if isinstance(f, EigenPair):
        c = np.array([mode_inner(data, p, f, problem=prob) for p in pairs])
        nf2 = mode_inner(data, f, f, problem=prob)
    else:
        fs = np.asarray(f, dtype=float)
        c = np.array([simpson(p.psi * fs, x=grid) for p in pairs])
        nf2 = simpson(fs * fs, x=grid)
    g = gram_matrix(data, l, k_max=len(pairs))
    d2 = (nf2 - 2.0 * float(c @ c) + float(c @ g @ c)) / nf2
    return math.sqrt(max(d2, 0.0))


def lagrange_pairing_residual(problem, omega_sq):
    """Residual of the constant-Wronskian identity against trace data.

    For two solutions u (center launch) and v (boundary launch) at the same
    omega^2 the Wronskian u v' - u' v is constant and equals
    2 nu (B_u A_v - A_u B_v); the residual is the relative mismatch.
    """
    w2 = np.atleast_1d(float(omega_sq))
    u = problem.integrate(w2)
    v = problem._integrate_from_boundary(w2)
    A_u, B_u, _ = problem.traces(u, w2)
    A_v, B_v, _ = problem.traces(v, w2)
    h = problem.chart.h
    n = problem.chart.rho_grid.size
    sl = slice(n // 3, 2 * n // 3)
    du = np.gradient(u[0], h)
    dv = np.gradient(v[0], h)
    wr = u[0][sl] * dv[sl] - du[sl] * v[0][sl]
    predicted = 2.0 * problem.model.nu * (B_u[0] * A_v[0] - A_u[0] * B_v[0])
    scale = max(abs(predicted), np.max(np.abs(wr)), 1.0e-300)
    return float(np.max(np.abs(wr - predicted)) / scale)
