"""Radial reduction of L_lambda on the f_{N,k} sector and its tridiagonal discretization.

On u = phi(r) f(x/|x|) the Liouville substitution w = r^{(N-1)/2} phi gives

    -w'' + [(m^2 - 1/4)/r^2 + r^2/16] w = mu w,

with m = sqrt(lambda_{N,k} - lambda).  Two symmetric tridiagonal
discretizations of this operator are provided, both acting on node values of w:

``"regular"`` (default)
    Flux form of w = r^{m+1/2} g, i.e. -(p g')' + p r^2/16 g = mu p g with
    p = r^{2m+1}, symmetrised back to w.  The inner node sits at r_min with a
    zero-flux closure, which selects the regular solution r^{m+1/2} at the
    origin for every m >= 0.  Second order in h, insensitive to r_min.

``"dirichlet"``
    Plain central differences, diag 2/h^2 + V(r_j), offdiag -1/h^2, with
    w = 0 at both r_min and r_max.  Converges slowly in r_min when m < 1/2.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .model import CornerParams, alpha_radial, corner_factor

SCHEMES = ("regular", "dirichlet")


@dataclass(frozen=True)
class RadialGrid:
    """Uniform nodes r_j = r_min + j h, j = 1..n, with h = (r_max - r_min)/(n+1)."""

    r_min: float = 2e-3
    r_max: float = 20.0
    n: int = 20000

    def __post_init__(self):
        if not 0 < self.r_min < self.r_max:
            raise ValueError(f"need 0 < r_min < r_max, got r_min={self.r_min}, r_max={self.r_max}")
        if int(self.n) != self.n or self.n < 3:
            raise ValueError(f"need an integer n >= 3 interior nodes, got {self.n}")

    @classmethod
    def default(cls, r_max: float = 20.0, n: int = 20000) -> "RadialGrid":
        return cls(1e-4 * r_max, r_max, n)

    @property
    def h(self) -> float:
        return (self.r_max - self.r_min) / (self.n + 1)

    @cached_property
    def nodes(self) -> np.ndarray:
        return self.r_min + self.h * np.arange(1, self.n + 1)


def effective_potential(p: CornerParams, r):
    """(m^2 - 1/4)/r^2 + r^2/16."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("effective potential is defined for r > 0 only")
    return (p.m ** 2 - 0.25) / (r * r) + r * r / 16


@dataclass(frozen=True, eq=False)
class TridiagonalOperator:
    """Symmetric tridiagonal matrix acting on node vectors y.

    Node values of the Liouville function are w = y * w_scale (w_scale is 1
    except at the natural inner node of the regular scheme).  The radial L^2
    norm of w is approximated by h * sum(y^2).
    """

    diag: np.ndarray
    offdiag: np.ndarray
    nodes: np.ndarray
    grid: RadialGrid
    params: CornerParams | None
    scheme: str
    w_scale: np.ndarray

    @property
    def size(self) -> int:
        return self.diag.size

    @property
    def h(self) -> float:
        return self.grid.h

    def matvec(self, y):
        y = np.asarray(y, dtype=float)
        out = self.diag * y
        out[:-1] += self.offdiag * y[1:]
        out[1:] += self.offdiag * y[:-1]
        return out

    def to_dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)

    def inf_norm(self) -> float:
        a = np.abs(self.diag).copy()
        a[:-1] += np.abs(self.offdiag)
        a[1:] += np.abs(self.offdiag)
        return float(a.max())

    def gershgorin(self) -> tuple[float, float]:
        rad = np.zeros_like(self.diag)
        rad[:-1] += np.abs(self.offdiag)
        rad[1:] += np.abs(self.offdiag)
        return float(np.min(self.diag - rad)), float(np.max(self.diag + rad))

    # L^2 bookkeeping over the corner; the angular factor is omega_{N,k}/2^k.
    @property
    def angular(self) -> float:
        return corner_factor(self.params) if self.params is not None else 1.0

    def inner(self, a, b) -> float:
        return self.angular * self.h * float(np.dot(a, b))

    def norm(self, y) -> float:
        return float(np.sqrt(self.inner(y, y)))

    def from_liouville(self, w_values):
        """Node vector whose Liouville values are `w_values` (sampled at self.nodes)."""
        return np.asarray(w_values, dtype=float) / self.w_scale

    def to_liouville(self, y):
        return np.asarray(y, dtype=float) * self.w_scale

    def sample_radial(self, phi):
        """Node vector of a radial profile given as a callable phi(r)."""
        N = self.params.dim
        r = self.nodes
        return self.from_liouville(r ** ((N - 1) / 2) * phi(r))


def dirichlet_stencil(grid: RadialGrid, potential_values) -> tuple[np.ndarray, np.ndarray]:
    """(diag, offdiag) of -d^2/dr^2 + V with Dirichlet ends at r_min and r_max."""
    h2 = grid.h ** 2
    V = np.asarray(potential_values, dtype=float)
    if V.shape != (grid.n,):
        raise ValueError("potential must be sampled at the grid nodes")
    return 2.0 / h2 + V, np.full(grid.n - 1, -1.0 / h2)


def _regular_stencil(p: CornerParams, grid: RadialGrid):
    m = p.m
    h = grid.h
    r = grid.r_min + h * np.arange(grid.n + 1)
    a = 2 * m + 2
    edge = grid.r_min + h / 2
    flux = (r + h / 2) ** (2 * m + 1)
    mass = r ** (2 * m + 1)
    # inner cell [0, r_min + h/2] carries the mass of the whole neighbourhood of 0
    mass[0] = edge ** a / (a * h)
    pot = mass * r * r / 16
    pot[0] = edge ** (a + 2) / ((a + 2) * h) / 16
    left = np.concatenate(([0.0], flux[:-1]))
    diag = (flux + left) / (h * h * mass) + pot / mass
    off = -flux[:-1] / (h * h * np.sqrt(mass[:-1] * mass[1:]))
    w_scale = np.ones_like(r)
    w_scale[0] = np.sqrt(grid.r_min ** (2 * m + 1) / mass[0])
    return diag, off, r, w_scale


def assemble(p: CornerParams, g: RadialGrid, scheme: str = "regular") -> TridiagonalOperator:
    """Discretize the radial Liouville operator of L_lambda on `g`."""
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")
    V = effective_potential(p, g.nodes)
    # the regular scheme absorbs the inverse-square term exactly, only r^2/16 is sampled
    sampled = V if scheme == "dirichlet" else g.nodes ** 2 / 16
    coarse = g.h ** 2 * float(np.max(np.abs(sampled)))
    if coarse > 1.0:
        raise ValueError(f"grid too coarse: h^2 * max|V| = {coarse:.3g} > 1; increase n")
    if scheme == "dirichlet":
        if p.m < 0.5:
            warnings.warn(
                f"m = {p.m:.3g} < 1/2: Dirichlet truncation at r_min converges slowly "
                "(shift ~ r_min^(2m), logarithmic at m = 0)",
                RuntimeWarning,
                stacklevel=2,
            )
        diag, off = dirichlet_stencil(g, V)
        return TridiagonalOperator(diag, off, g.nodes, g, p, scheme, np.ones(g.n))
    diag, off, nodes, w_scale = _regular_stencil(p, g)
    return TridiagonalOperator(diag, off, nodes, g, p, scheme, w_scale)


def exact_ground_vector(op: TridiagonalOperator) -> np.ndarray:
    """Unit node vector of the sampled exact ground state w0 = r^{(N-1)/2} phi_alpha."""
    y = op.sample_radial(lambda r: alpha_radial(op.params, r))
    return y / np.linalg.norm(y)


def _square_minus(m: float, x: float) -> float:
    """m*m - x without cancellation error (Dekker two-product; m*m ~ x)."""
    split = 134217729.0 * m  # 2^27 + 1
    hi = split - (split - m)
    lo = m - hi
    prod = m * m
    err = ((hi * hi - prod) + 2 * hi * lo) + lo * lo
    return (prod - x) + err


def miracle_residual(p: CornerParams, g: RadialGrid, method: str = "analytic",
                     fd_step: float = 1e-4, shift: float = 0.0) -> float:
    """max_j |L_lambda alpha / alpha - (1+m)/2 - shift| over the grid nodes.

    ``method="analytic"`` uses the closed-form phi', phi'' of the radial factor
    collected by powers of r:

        L alpha / alpha - (1+m)/2 = -c0 / r^2 + [(2a + N)/4 - (1+m)/2] + [r^2/16 - r^2/16],

    with a the radial exponent and c0 = a(a-1) + (N-1)a - k(N-2+k) + lambda = m^2 - (lambda_Nk - lambda).
    c0 is evaluated exactly for the floating-point m, so the result is the true
    residual of the representable alpha (at most ~ m ulp(m) / r^2).
    ``method="fd"`` replaces phi', phi'' by central differences with step `fd_step`.
    """
    r = g.nodes
    N = p.dim
    a = p.radial_exponent
    if method == "analytic":
        c0 = _square_minus(p.m, p.hardy_const - p.lam)
        res = -c0 / (r * r) + ((2 * a + N) / 4 - p.mu0) + (r * r / 16 - r * r / 16) - shift
        return float(np.max(np.abs(res)))
    if method != "fd":
        raise ValueError(f"unknown method {method!r}")
    hh = fd_step
    if np.any(r - hh <= 0):
        raise ValueError("finite-difference stencil crosses r = 0")
    f0 = alpha_radial(p, r)
    fp = alpha_radial(p, r + hh)
    fm = alpha_radial(p, r - hh)
    r1 = r * (fp - fm) / (2 * hh) / f0  # r phi'/phi
    r2 = r * r * (fp - 2 * f0 + fm) / (hh * hh) / f0  # r^2 phi''/phi
    # -Delta alpha/alpha - lambda/r^2 + r^2/16 - mu0, collected over r^2
    bracket = r2 + (N - 1) * r1 - p.angular_eigenvalue + p.lam
    res = -bracket / (r * r) + r * r / 16 - p.mu0 - shift
    return float(np.max(np.abs(res)))
