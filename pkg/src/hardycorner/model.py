"""Problem parameters, closed-form constants and the self-similar change of variables.

The corner domain is R^{N-k} x (0, inf)^k.  Everything in the package lives in
the sector of functions u(x) = phi(|x|) f(x/|x|) with the angular factor
f(sigma) = sigma_{N-k+1} ... sigma_N, so only radial profiles are ever stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np


def hardy_constant(N: int, k: int) -> float:
    """Sharp Hardy constant ((N-2)/2 + k)^2 on the corner domain."""
    _check_dims(N, k)
    return ((N - 2) / 2 + k) ** 2


def _check_dims(N, k):
    if int(N) != N or int(k) != k:
        raise ValueError(f"N and k must be integers, got N={N!r}, k={k!r}")
    if N < 2:
        raise ValueError(f"dimension N must be >= 2, got {N}")
    if not 0 <= k <= N:
        raise ValueError(f"corner index k must lie in [0, N={N}], got {k}")


@dataclass(frozen=True)
class CornerParams:
    """The triple (N, k, lambda) with its derived constants."""

    dim: int
    corner: int
    lam: float
    hardy_const: float = field(init=False, repr=False)
    m: float = field(init=False, repr=False)

    def __post_init__(self):
        _check_dims(self.dim, self.corner)
        hc = hardy_constant(self.dim, self.corner)
        if not math.isfinite(self.lam):
            raise ValueError(f"lambda must be finite, got {self.lam}")
        if self.lam > hc:
            raise ValueError(
                f"lambda={self.lam} exceeds the Hardy constant {hc} for "
                f"(N={self.dim}, k={self.corner}); the problem is ill-posed"
            )
        object.__setattr__(self, "hardy_const", hc)
        object.__setattr__(self, "m", math.sqrt(hc - self.lam))

    @classmethod
    def critical(cls, N: int, k: int) -> "CornerParams":
        return cls(N, k, hardy_constant(N, k))

    @property
    def mu0(self) -> float:
        """Ground energy (1 + m)/2 of the harmonic oscillator with Hardy potential."""
        return (1.0 + self.m) / 2.0

    @property
    def radial_exponent(self) -> float:
        # power of r in the radial factor of the ground state
        return self.m - (self.dim - 2) / 2

    @property
    def angular_eigenvalue(self) -> float:
        """k(N-2+k): minus the Laplace-Beltrami eigenvalue of the angular factor."""
        return self.corner * (self.dim - 2 + self.corner)


def criticality_index(p: CornerParams) -> float:
    """m = sqrt(lambda_{N,k} - lambda); zero exactly at the critical strength."""
    return p.m


def omega_nk(N: int, k: int) -> float:
    """Integral over S^{N-1} of sigma_{N-k+1}^2 ... sigma_N^2."""
    _check_dims(N, k)
    return 2.0 * math.pi ** (N / 2) / (2.0 ** k * math.gamma(N / 2 + k))


def corner_factor(p: CornerParams) -> float:
    """omega_{N,k} / 2^k: angular mass of f^2 restricted to the corner.

    L^2 norms over the corner of separated functions reduce to this constant
    times a radial integral with weight r^{N-1}.
    """
    return omega_nk(p.dim, p.corner) / 2.0 ** p.corner


def sphere_moment_mc(N: int, k: int, samples: int, rng: np.random.Generator,
                     chunk: int = 1_000_000) -> tuple[float, float]:
    """Monte-Carlo estimate of omega_{N,k} with its standard error.

    Uniform points on S^{N-1} are normalised Gaussian vectors; the integral is
    |S^{N-1}| times the mean of sigma_{N-k+1}^2 ... sigma_N^2.
    """
    _check_dims(N, k)
    area = 2.0 * math.pi ** (N / 2) / math.gamma(N / 2)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        g = rng.standard_normal((n, N))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        f = np.prod(g[:, N - k:] ** 2, axis=1)
        total += f.sum()
        total_sq += (f * f).sum()
        done += n
    mean = total / samples
    var = max(total_sq / samples - mean * mean, 0.0)
    return area * mean, area * math.sqrt(var / samples)


def alpha_radial_integral(m: float) -> float:
    """Int_0^inf e^{-r^2/4} r^{2m+1} dr = 2^{2m+1} Gamma(m+1)."""
    return 2.0 ** (2 * m + 1) * math.gamma(m + 1)


def alpha_l2_norm_sq(p: CornerParams) -> float:
    """||alpha_{k,lambda}||^2 over the corner."""
    return corner_factor(p) * alpha_radial_integral(p.m)


def alpha_radial(p: CornerParams, r):
    """Radial factor phi(r) = e^{-r^2/8} r^{m-(N-2)/2} of the ground state."""
    r = np.asarray(r, dtype=float)
    return np.exp(-r * r / 8) * r ** p.radial_exponent


def alpha_log_derivs(p: CornerParams, r):
    """Return (phi'/phi, phi''/phi) of the radial ground-state factor.

    Ratios avoid the underflow of phi itself at large r.
    """
    r = np.asarray(r, dtype=float)
    a = p.radial_exponent
    d1 = -r / 4 + a / r
    d2 = r * r / 16 - (2 * p.m - p.dim + 3) / 4 + a * (a - 1) / (r * r)
    return d1, d2


def alpha_eval(p: CornerParams, x) -> np.ndarray | float:
    """Evaluate alpha_{k,lambda} at one point or a stack of points (last axis N).

    Points on the flat boundary of the corner (some of the last k coordinates
    zero, x != 0) give 0 by continuity.  The origin and points outside the
    closed corner are rejected.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.dim:
        raise ValueError(f"points must have {p.dim} coordinates, got shape {x.shape}")
    tail = x[..., p.dim - p.corner:]
    if np.any(tail < 0):
        raise ValueError("point lies outside the corner domain")
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise ValueError("alpha is undefined at the origin")
    prod = np.prod(tail, axis=-1)
    val = np.exp(-r * r / 8) * r ** (p.radial_exponent - p.corner) * prod
    return float(val) if val.ndim == 0 else val


def in_open_corner(p: CornerParams, x) -> np.ndarray | bool:
    x = np.asarray(x, dtype=float)
    ok = np.all(x[..., p.dim - p.corner:] > 0, axis=-1)
    return bool(ok) if np.ndim(ok) == 0 else ok


# --- self-similar variables -------------------------------------------------

def sst_forward(t, x):
    """(t, x) -> (s, y) = (ln(t+1), x / sqrt(t+1)).

    The last axis of `x` holds coordinates; `t` broadcasts against the rest.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("time must be non-negative")
    x = np.asarray(x, dtype=float)
    scale = np.sqrt(1.0 + t)
    if x.ndim:
        scale = scale[..., None]
    return np.log1p(t), x / scale


def sst_inverse(s, y):
    """(s, y) -> (t, x) = (e^s - 1, e^{s/2} y)."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = np.exp(s / 2)
    if y.ndim:
        scale = scale[..., None]
    return np.expm1(s), scale * y


def w_from_u(u_value, t, N: int):
    """w(s, y) = e^{Ns/4} u(t, x); preserves the L^2 norm."""
    s = np.log1p(np.asarray(t, dtype=float))
    return np.exp(N * s / 4) * np.asarray(u_value, dtype=float)


def v_from_u(u_value, t, x, N: int):
    """v(s, y) = K^{1/2}(y) e^{Ns/4} u(t, x) with K(y) = e^{|y|^2/4}.

    `x` is the original point (last axis N) and (s, y) = sst_forward(t, x).
    """
    _, y = sst_forward(t, x)
    y2 = np.sum(np.atleast_1d(y) ** 2, axis=-1)
    return np.exp(y2 / 8) * w_from_u(u_value, t, N)


def u_from_v(v_value, s, y, N: int):
    """Inverse of v_from_u: u(t, x) = e^{-Ns/4} K^{-1/2}(y) v(s, y)."""
    y2 = np.sum(np.atleast_1d(np.asarray(y, dtype=float)) ** 2, axis=-1)
    s = np.asarray(s, dtype=float)
    return np.exp(-N * s / 4 - y2 / 8) * np.asarray(v_value, dtype=float)


# --- separated functions ----------------------------------------------------

@dataclass
class SeparatedFunction:
    """u(x) = phi(|x|) f(x/|x|), stored as samples of phi on an increasing grid.

    `dphi` may be supplied analytically; otherwise it is estimated with
    second-order differences on `r`.
    """

    r: np.ndarray
    phi: np.ndarray
    params: CornerParams
    dphi: Optional[np.ndarray] = None

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.phi = np.asarray(self.phi, dtype=float)
        if self.r.shape != self.phi.shape or self.r.ndim != 1:
            raise ValueError("r and phi must be 1-D arrays of equal length")
        if np.any(np.diff(self.r) <= 0) or self.r[0] <= 0:
            raise ValueError("radial samples must be positive and strictly increasing")
        if self.dphi is None:
            self.dphi = np.gradient(self.phi, self.r, edge_order=2)
        else:
            self.dphi = np.asarray(self.dphi, dtype=float)

    def scaled(self, c: float) -> "SeparatedFunction":
        return SeparatedFunction(self.r, c * self.phi, self.params, c * self.dphi)

    def l2_norm_sq(self) -> float:
        """||u||^2 over the corner: (omega/2^k) Int phi^2 r^{N-1} dr."""
        integrand = self.phi ** 2 * self.r ** (self.params.dim - 1)
        return corner_factor(self.params) * float(np.trapezoid(integrand, self.r))


def ground_state_function(p: CornerParams, r) -> SeparatedFunction:
    """alpha_{k,lambda} sampled on `r`, with its exact derivative."""
    r = np.asarray(r, dtype=float)
    phi = alpha_radial(p, r)
    d1, _ = alpha_log_derivs(p, r)
    return SeparatedFunction(r, phi, p, d1 * phi)
