"""Improved Hardy-Poincare inequality: quadratic form, ground-state identity, cutoff sequence.

In the f_{N,k} sector the form of L_lambda on u = phi(r) f(sigma) is

    l[u] = (omega_{N,k}/2^k) Int [phi'^2 + (k(N-2+k) - lambda) phi^2/r^2 + r^2 phi^2/16] r^{N-1} dr

and l[u] >= (1+m)/2 ||u||^2, with the defect equal to Int alpha^2 |grad(u/alpha)|^2.
Sharpness is seen on Lambda_eps = alpha * psi_eps(|x|), where psi_eps is a
mollified logarithmic cutoff equal to 1 on [eps, 1/eps].
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import numpy as np
from scipy.integrate import quad

from .model import CornerParams, SeparatedFunction, alpha_log_derivs, alpha_radial, corner_factor

GL_NODES = 64
LOG_NODES = 200_000
CLUSTER_NODES = 801


# --- mollifier ----------------------------------------------------------------

def bump(x):
    """exp(-1/(1-x^2)) on (-1, 1), zero outside."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    inside = np.abs(x) < 1
    out[inside] = np.exp(-1.0 / (1.0 - x[inside] ** 2))
    return out


@lru_cache(maxsize=1)
def bump_mass() -> float:
    return quad(lambda x: math.exp(-1.0 / (1.0 - x * x)), -1, 1, epsabs=0, epsrel=1e-13)[0]


def _gl_rule(a, b):
    """Nodes and normalised-bump weights on the sub-intervals [a_i, b_i] of [-1, 1]."""
    x, w = np.polynomial.legendre.leggauss(GL_NODES)
    half = 0.5 * (b - a)[:, None]
    nodes = 0.5 * (a + b)[:, None] + half * x
    weights = half * w * bump(nodes) / bump_mass()
    return nodes, weights


def mollifier_mass() -> float:
    """Unit mass of the normalised bump as seen by the quadrature rule."""
    _, q = _gl_rule(np.array([-1.0]), np.array([1.0]))
    return float(q.sum())


# --- eta_eps and its mollification ----------------------------------------------

def eta(eps: float, r):
    """Piecewise profile: log ramp on [eps^2, eps], 1 on [eps, 1/eps], linear ramp to 0 at eps^-2."""
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    le = math.log(eps)
    a = (r >= eps * eps) & (r < eps)
    out[a] = (np.log(r[a]) - 2 * le) / (-le)
    out[(r >= eps) & (r <= 1 / eps)] = 1.0
    b = (r > 1 / eps) & (r < eps ** -2)
    out[b] = (1 - r[b] * eps * eps) / (1 - eps)
    return out


def eta_prime(eps: float, r):
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    le = math.log(eps)
    a = (r > eps * eps) & (r < eps)
    out[a] = -1.0 / (r[a] * le)
    out[(r > 1 / eps) & (r < eps ** -2)] = -eps * eps / (1 - eps)
    return out


def _kinks(eps):
    return np.array([eps * eps, eps, 1 / eps, eps ** -2])


def _convolve(eps, r, f, one_minus):
    """Int f(r - eps^4 x) rho(x) dx, split at the kinks of eta so every piece is smooth.

    With `one_minus`, f is 1 - g and the result is returned as 1 - conv, which
    keeps the plateau and the zero set of psi exact.
    """
    w4 = eps ** 4
    kinks = _kinks(eps)
    out = np.empty_like(r)
    near = np.any(np.abs(r[:, None] - kinks) < w4, axis=1)

    far = ~near
    if far.any():
        x, q = _gl_rule(np.array([-1.0]), np.array([1.0]))
        x, q = x[0], q[0]
        for lo in range(0, int(far.sum()), 20000):
            rr = r[far][lo:lo + 20000]
            out_idx = np.flatnonzero(far)[lo:lo + 20000]
            out[out_idx] = f(rr[:, None] - w4 * x) @ q
    if near.any():
        rn = r[near]
        # breakpoints in the bump variable: r - w4 x = kink  <=>  x = (r - kink)/w4
        br = np.clip((rn[:, None] - kinks) / w4, -1, 1)
        edges = np.sort(np.concatenate([-np.ones((rn.size, 1)), br, np.ones((rn.size, 1))], axis=1), axis=1)
        acc = np.zeros(rn.size)
        for i in range(edges.shape[1] - 1):
            a, b = edges[:, i], edges[:, i + 1]
            x, q = _gl_rule(a, b)
            acc += np.sum(f(rn[:, None] - w4 * x) * q, axis=1)
        out[near] = acc
    return out


def _psi_values(eps, r):
    lo = _convolve(eps, r, lambda s: eta(eps, s), False)
    hi = 1.0 - _convolve(eps, r, lambda s: 1.0 - eta(eps, s), False)
    psi = np.where(lo < 0.5, lo, hi)
    return np.clip(psi, 0.0, 1.0)


def _psi_prime(eps, r):
    return _convolve(eps, r, lambda s: eta_prime(eps, s), False)


def cutoff_grid(eps: float, n_log: int = LOG_NODES, n_cluster: int = CLUSTER_NODES) -> np.ndarray:
    """Log grid over [eps^2/2, 2 eps^-2] plus uniform clusters of half-width 2 eps^4 at each kink."""
    if n_log < 2 * 10 ** 5:
        raise ValueError("the log grid needs at least 2e5 nodes to resolve the cutoff")
    pieces = [np.geomspace(eps * eps / 2, 2 / eps ** 2, n_log)]
    w4 = eps ** 4
    for k in _kinks(eps):
        pieces.append(np.linspace(k - 2 * w4, k + 2 * w4, n_cluster))
        pieces.append(np.array([k - w4, k + w4]))
    r = np.unique(np.concatenate(pieces))
    return r[r > 0]


@dataclass(frozen=True, eq=False)
class CutoffSequence:
    """One element psi_eps of the cutoff sequence, sampled on `r` with its exact derivative."""

    epsilon: float
    r: np.ndarray = field(repr=False)
    eta: np.ndarray = field(repr=False)
    psi: np.ndarray = field(repr=False)
    dpsi: np.ndarray = field(repr=False)
    mass: float = 1.0

    @property
    def plateau(self) -> tuple[float, float]:
        e = self.epsilon
        return e + e ** 4, 1 / e - e ** 4

    @property
    def support(self) -> tuple[float, float]:
        e = self.epsilon
        return e * e - e ** 4, e ** -2 + e ** 4


def cutoff_properties(c: CutoffSequence) -> dict[str, bool]:
    """Range, plateau and support properties checked on the sample grid."""
    lo, hi = c.plateau
    a, b = c.support
    on = (c.r >= lo) & (c.r <= hi)
    off = (c.r <= a) | (c.r >= b)
    return {
        "range": bool(np.all((c.psi >= 0) & (c.psi <= 1))),
        "plateau": bool(np.all(c.psi[on] == 1.0)),
        "support": bool(np.all(c.psi[off] == 0.0)),
        "unit_mass": abs(c.mass - 1.0) <= 1e-10,
    }


def build_cutoff(epsilon: float, n_log: int = LOG_NODES) -> CutoffSequence:
    eps = float(epsilon)
    if not 0 < eps < 0.25:
        raise ValueError(f"epsilon must lie in (0, 1/4), got {epsilon}")
    if not eps + eps ** 4 < 1 / eps - eps ** 4:
        raise ValueError(f"epsilon={epsilon} leaves no plateau")
    r = cutoff_grid(eps, n_log)
    c = CutoffSequence(eps, r, eta(eps, r), _psi_values(eps, r), _psi_prime(eps, r), mollifier_mass())
    bad = [k for k, ok in cutoff_properties(c).items() if not ok]
    if bad:
        raise RuntimeError(f"cutoff for epsilon={eps} violates: {', '.join(bad)}")
    return c


def weighted_gradient_integral(c: CutoffSequence, zeta: float) -> float:
    """Int_0^inf e^{-r^2/4} r^{1+zeta} psi'(r)^2 dr (trapezoid on the cutoff grid)."""
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    r = c.r
    return float(np.trapezoid(np.exp(-r * r / 4) * r ** (1 + zeta) * c.dpsi ** 2, r))


# --- quadratic form -----------------------------------------------------------------

class FormValue(NamedTuple):
    form: float      # l_lambda[u]
    norm_sq: float   # ||u||^2


def quadratic_form(p: CornerParams, u: SeparatedFunction) -> FormValue:
    r, phi, dphi = u.r, u.phi, u.dphi
    c = p.angular_eigenvalue - p.lam
    w = r ** (p.dim - 1)
    dens = (dphi ** 2 + c * phi ** 2 / (r * r) + r * r * phi ** 2 / 16) * w
    scale = corner_factor(p)
    return FormValue(scale * float(np.trapezoid(dens, r)), scale * float(np.trapezoid(phi ** 2 * w, r)))


def rayleigh_quotient(p: CornerParams, u: SeparatedFunction) -> float:
    f = quadratic_form(p, u)
    if not f.norm_sq > 0:
        raise ValueError("rayleigh quotient of the zero function")
    return f.form / f.norm_sq


def ground_state_defect(p: CornerParams, u: SeparatedFunction) -> float:
    """Int alpha^2 |grad(u/alpha)|^2 = (omega/2^k) Int (phi' - phi phi_a'/phi_a)^2 r^{N-1} dr."""
    d1, _ = alpha_log_derivs(p, u.r)
    dens = (u.dphi - u.phi * d1) ** 2 * u.r ** (p.dim - 1)
    return corner_factor(p) * float(np.trapezoid(dens, u.r))


def substitution_identity_check(p: CornerParams, u: SeparatedFunction) -> float:
    """|l[u] - (1+m)/2 ||u||^2 - Int alpha^2 |grad(u/alpha)|^2|.

    The identity needs the boundary term phi^2 phi_a'/phi_a r^{N-1} to vanish
    at both ends of the sample grid, so profiles that do not vanish there are
    rejected.
    """
    scale = np.abs(u.phi).max()
    if scale == 0:
        return 0.0
    if max(abs(u.phi[0]), abs(u.phi[-1])) > 1e-10 * scale:
        raise ValueError("profile does not vanish at the ends of its grid; u/alpha boundary term is not zero")
    f = quadratic_form(p, u)
    return abs(f.form - p.mu0 * f.norm_sq - ground_state_defect(p, u))


def lambda_eps(p: CornerParams, c: CutoffSequence) -> SeparatedFunction:
    """Lambda_eps = alpha * psi_eps with exact derivative."""
    r = c.r
    phi_a = alpha_radial(p, r)
    d1, _ = alpha_log_derivs(p, r)
    return SeparatedFunction(r, phi_a * c.psi, p, phi_a * (d1 * c.psi + c.dpsi))


class ScanRow(NamedTuple):
    epsilon: float
    quotient: float
    gap: float
    gap_times_log_eps: float
    norm_Lambda_eps: float


@dataclass
class SharpnessScan:
    rows: list[ScanRow]

    @property
    def monotone(self) -> bool:
        """Gap strictly decreasing along decreasing epsilon and positive."""
        order = sorted(self.rows, key=lambda row: -row.epsilon)
        gaps = [row.gap for row in order]
        return all(g > 0 for g in gaps) and all(a > b for a, b in zip(gaps, gaps[1:]))


def sharpness_row(p: CornerParams, eps: float) -> ScanRow:
    u = lambda_eps(p, build_cutoff(eps))
    q = rayleigh_quotient(p, u)
    gap = q - p.mu0
    return ScanRow(eps, q, gap, gap * abs(math.log(eps)), math.sqrt(u.l2_norm_sq()))


def sharpness_scan(p: CornerParams, eps_list: Sequence[float]) -> SharpnessScan:
    return SharpnessScan([sharpness_row(p, float(e)) for e in eps_list])


# --- random test profiles -------------------------------------------------------------

def _bump_with_derivative(x):
    inside = np.abs(x) < 1
    f = np.zeros_like(x)
    df = np.zeros_like(x)
    xi = x[inside]
    g = 1.0 - xi * xi
    f[inside] = np.exp(-1.0 / g)
    df[inside] = f[inside] * (-2.0 * xi / (g * g))
    return f, df


def random_profile(rng: np.random.Generator, p: CornerParams, n: int = 20001,
                   r_lo: float = 0.05, r_hi: float = 12.0, bumps: int = 4) -> SeparatedFunction:
    """Sum of smooth bumps with random centres, widths and signed weights, compactly supported in (r_lo, r_hi)."""
    r = np.linspace(r_lo, r_hi, n)
    phi = np.zeros(n)
    dphi = np.zeros(n)
    for _ in range(bumps):
        c = rng.uniform(r_lo + 0.2, r_hi - 0.2)
        half = rng.uniform(0.1, min(c - r_lo, r_hi - c, 4.0))
        a = rng.normal()
        f, df = _bump_with_derivative((r - c) / half)
        phi += a * f
        dphi += a * df / half
    return SeparatedFunction(r, phi, p, dphi)
