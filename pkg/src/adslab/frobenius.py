"""Branch series at the two singular endpoints of the radial problem.

Near the conformal boundary the radial Schrodinger equation, written in the
variable ``x = cos(rho)``, reads

    (1-x^2) psi_xx - x psi_x + [w^2 - (mu^2-1/4)/(1-x^2) - (nu^2-1/4)/x^2] psi = 0

with regular-singular exponents ``s = 1/2 -+ nu``.  Substituting
``psi = sum_j a_j x^(s+2j)`` closes on even powers and gives the recursion

    a_J * D(s+2J) = a_{J-1} [ (s+2J-2)^2 - w^2 ] + (mu^2-1/4) * sum_{j<J} a_j,
    D(sigma) = sigma(sigma-1) - (nu^2-1/4).

The same equation with ``x`` replaced by ``y = sin(rho)`` and ``nu <-> mu``
swapped governs the center, so one recursion serves both endpoints.  The
half-strip model is the special case ``mu^2 - 1/4 = 0``.

The module also provides truncated even-series arithmetic used to integrate
endpoint layers term by term (norms, energy-form tails).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ResonantBranch

_RESONANCE_TOL = 1.0e-9


def branch_exponents(nu):
    """Boundary exponents (s_minus, s_plus) = (1/2 - nu, 1/2 + nu)."""
    return 0.5 - nu, 0.5 + nu


def branch_coefficients(s, own_sq_m_quarter, other_sq_m_quarter, omega_sq,
                        n_terms):
    """Series coefficients a_0..a_n for one branch; a_0 = 1.

    omega_sq may be a scalar or an array; the returned array has shape
    (n_terms+1,) or (n_terms+1, len(omega_sq)).  Raises ResonantBranch when
    the indicial factor D vanishes (log branch, 2*nu an even integer).
    """
    w2 = np.asarray(omega_sq, dtype=float)
    scalar = w2.ndim == 0
    w2 = np.atleast_1d(w2)
    a = np.zeros((n_terms + 1, w2.size))
    a[0] = 1.0
    csum = np.ones(w2.size)
    for j in range(1, n_terms + 1):
        sigma = s + 2 * j
        d = sigma * (sigma - 1.0) - own_sq_m_quarter
        if abs(d) < _RESONANCE_TOL:
            raise ResonantBranch(
                f"indicial factor vanishes at series order {j} (s={s:g})")
        a[j] = (a[j - 1] * ((s + 2 * j - 2) ** 2 - w2)
                + other_sq_m_quarter * csum) / d
        csum = csum + a[j]
    return a[:, 0] if scalar else a


def eval_branch(coeffs, s, v):
    """Evaluate sum_j a_j v^(s+2j) for coefficient array (n_terms+1,)."""
    v = np.asarray(v, dtype=float)
    acc = np.zeros_like(v)
    for c in coeffs[::-1]:
        acc = acc * v * v + c
    return acc * v ** s


def eval_branch_batch(coeffs, s, v):
    """Batched evaluation: coeffs (J+1, n_w), v (n_v,) -> (n_w, n_v)."""
    v = np.asarray(v, dtype=float)
    u = v * v
    acc = np.zeros((coeffs.shape[1], v.size))
    for c in coeffs[::-1]:
        acc = acc * u[None, :] + c[:, None]
    return acc * (v ** s)[None, :]


def eval_branch_dv(coeffs, s, v):
    """d/dv of eval_branch."""
    v = np.asarray(v, dtype=float)
    acc = np.zeros_like(v)
    for j in range(len(coeffs) - 1, -1, -1):
        acc = acc * v * v + (s + 2 * j) * coeffs[j]
    return acc * v ** (s - 1.0)


# ---------------------------------------------------------------------------
# Truncated series in u = v^2 and endpoint-layer integrals.
# ---------------------------------------------------------------------------

def ser_mul(a, b, n_keep=None):
    out = np.convolve(np.asarray(a, float), np.asarray(b, float))
    if n_keep is not None:
        if out.size < n_keep:
            out = np.pad(out, (0, n_keep - out.size))
        else:
            out = out[:n_keep]
    return out


def ser_shift(a, n_keep):
    """Coefficients of u * a(u), truncated/padded to n_keep."""
    out = np.zeros(n_keep)
    m = min(n_keep - 1, len(a))
    out[1:m + 1] = np.asarray(a, float)[:m]
    return out

def binom_series(alpha, n_terms):
    """Coefficients of (1-u)^alpha up to u^n_terms."""
    c = np.empty(n_terms + 1)
    c[0] = 1.0
    for k in range(1, n_terms + 1):
        c[k] = c[k - 1] * (k - 1.0 - alpha) / k
    return c


@dataclass(frozen=True)
class LayerTerm:
    """One endpoint-layer contribution coef * v^power * ser(v^2)."""

    coef: complex
    power: float
    ser: np.ndarray


def pair_tail_integral(terms_u, terms_v, v0, jac_ser):
    """integral_0^v0 (sum terms_u)(sum terms_v) * jac(v^2) dv, term by term."""
    total = 0.0
    for tu in terms_u:
        for tv in terms_v:
            ser = ser_mul(ser_mul(tu.ser, tv.ser), jac_ser)
            p = tu.power + tv.power
            powers = p + 2.0 * np.arange(ser.size) + 1.0
            if np.any(powers <= 0.0):
                raise ValueError("non-integrable endpoint power in tail")
            total = total + tu.coef * np.conjugate(tv.coef) * np.sum(
                ser * v0 ** powers / powers)
    return total


def _dtilde(coeffs, s):
    """Coefficients of sum (s+2j) a_j u^j (the v d/dv operation)."""
    j = np.arange(len(coeffs), dtype=float)
    return (s + 2.0 * j) * coeffs


def boundary_value_terms(A, B, coeff_m, coeff_p, nu):
    """Layer terms of psi = A x^(1/2-nu) P + B x^(1/2+nu) Q near the boundary."""
    s_m, s_p = branch_exponents(nu)
    out = []
    if A != 0.0:
        out.append(LayerTerm(A, s_m, np.asarray(coeff_m, float)))
    if B != 0.0:
        out.append(LayerTerm(B, s_p, np.asarray(coeff_p, float)))
    return out


def boundary_bracket_terms(A, B, coeff_m, coeff_p, nu, n_dim):
    """Layer terms of the twisted radial derivative d psi/d rho + T psi.

    T(rho) = (1/2-nu) sin/cos + (2-n)/2 cos/sin; the decaying branch cancels
    at leading order, which is what makes the twisted energy form finite.
    """
    s_m, s_p = branch_exponents(nu)
    c_n = 0.5 * (2.0 - n_dim)
    n_keep = len(coeff_m) + 2
    e_s = binom_series(0.5, n_keep - 1)        # sqrt(1-u)
    e_is = binom_series(-0.5, n_keep - 1)      # 1/sqrt(1-u)
    out = []
    if A != 0.0:
        p = np.asarray(coeff_m, float)
        h = -2.0 * np.arange(1, p.size) * p[1:]          # (aP - dP~)/u
        ser = ser_mul(e_s, h if h.size else np.zeros(1), n_keep) \
            + c_n * ser_mul(e_is, p, n_keep)
        out.append(LayerTerm(A, s_m + 1.0, ser))
    if B != 0.0:
        q = np.asarray(coeff_p, float)
        k = -2.0 * (nu + np.arange(q.size)) * q
        ser = ser_mul(e_s, k, n_keep) \
            + c_n * ser_shift(ser_mul(e_is, q, n_keep), n_keep)
        out.append(LayerTerm(B, s_p - 1.0, ser))
    return out


def center_value_terms(c, coeff_reg, mu):
    """Layer terms of psi = c y^(1/2+mu) R near the center (regular branch)."""
    if c == 0.0:
        return []
    return [LayerTerm(c, 0.5 + mu, np.asarray(coeff_reg, float))]


def center_bracket_terms(c, coeff_reg, nu, mu, n_dim):
    """Twisted radial derivative layer terms near the center, variable y."""
    if c == 0.0:
        return []
    sigma = 0.5 + mu
    c_n = 0.5 * (2.0 - n_dim)
    r = np.asarray(coeff_reg, float)
    n_keep = r.size + 2
    e_s = binom_series(0.5, n_keep - 1)
    e_is = binom_series(-0.5, n_keep - 1)
    ser = ser_mul(e_s, _dtilde(r, sigma) + c_n * r, n_keep) \
        + (0.5 - nu) * ser_shift(ser_mul(e_is, r, n_keep), n_keep)
    return [LayerTerm(c, sigma - 1.0, ser)]
