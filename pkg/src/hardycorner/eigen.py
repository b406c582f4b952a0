"""Lowest eigenpairs of a symmetric tridiagonal operator by Sturm bisection and inverse iteration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

from .model import CornerParams
from .radial import RadialGrid, TridiagonalOperator, assemble, exact_ground_vector

EPS = np.finfo(float).eps


class EigenSolverError(RuntimeError):
    pass


@njit(cache=True)
def _sturm_count(d, e2, x, pivmin):
    # number of eigenvalues strictly below x (negative pivots of LDL^T of T - xI)
    count = 0
    q = d[0] - x
    if abs(q) < pivmin:
        q = -pivmin
    if q < 0.0:
        count += 1
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        if abs(q) < pivmin:
            q = -pivmin
        if q < 0.0:
            count += 1
    return count


@njit(cache=True)
def _bisect(d, e2, j, lo, hi, tol, pivmin):
    for _ in range(400):
        width = hi - lo
        if width <= tol or width <= 4.0 * 2.220446049250313e-16 * max(abs(lo), abs(hi)):
            break
        mid = 0.5 * (lo + hi)
        if _sturm_count(d, e2, mid, pivmin) >= j + 1:
            hi = mid
        else:
            lo = mid
    return lo, hi


@njit(cache=True)
def _thomas(sub, d, sup, b):
    """Solve a tridiagonal system without pivoting; returns (x, ok)."""
    n = d.size
    c = np.empty(n)
    x = np.empty(n)
    piv = d[0]
    if piv == 0.0:
        return x, False
    c[0] = sup[0] / piv if n > 1 else 0.0
    x[0] = b[0] / piv
    for i in range(1, n):
        piv = d[i] - sub[i - 1] * c[i - 1]
        if piv == 0.0:
            return x, False
        if i < n - 1:
            c[i] = sup[i] / piv
        x[i] = (b[i] - sub[i - 1] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= c[i] * x[i + 1]
    return x, True


def sturm_count(op: TridiagonalOperator, x: float) -> int:
    """Number of eigenvalues of `op` strictly below x."""
    e2 = op.offdiag ** 2
    return int(_sturm_count(op.diag, e2, float(x), _pivmin(e2)))


def _pivmin(e2):
    return float(np.finfo(float).tiny * max(1.0, float(e2.max()) if e2.size else 1.0))


@dataclass
class SpectralResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns, unit Euclidean norm
    residuals: np.ndarray
    widths: np.ndarray

    @property
    def count(self) -> int:
        return self.eigenvalues.size


def _shifted_solve(op, shift, b, scale):
    sub = op.offdiag
    x, ok = _thomas(sub, op.diag - shift, sub, b)
    if ok and np.all(np.isfinite(x)):
        return x
    x, ok = _thomas(sub, op.diag - (shift + 1e-12 * scale), sub, b)
    if not ok or not np.all(np.isfinite(x)):
        raise EigenSolverError(f"shifted factorization failed twice near {shift!r}")
    return x


def _inverse_iteration(op, mu, previous, scale, bound, maxit=6):
    n = op.size
    # deterministic, non-degenerate start vector
    b = 1.0 + 0.01 * np.cos(np.arange(n) * 0.7071)
    b /= np.linalg.norm(b)
    res = np.inf
    for _ in range(maxit):
        x = _shifted_solve(op, mu, b, scale)
        for q in previous:
            x -= np.dot(q, x) * q
        nrm = np.linalg.norm(x)
        if nrm == 0 or not np.isfinite(nrm):
            raise EigenSolverError(f"inverse iteration collapsed at mu={mu!r}")
        x /= nrm
        res = float(np.linalg.norm(op.matvec(x) - mu * x))
        if res <= bound:
            break
        b = x
    else:
        raise EigenSolverError(
            f"inverse iteration stagnated at mu={mu!r}: residual {res:.3g} > {bound:.3g}"
        )
    # sign: first significant entry positive
    k = int(np.argmax(np.abs(x) > 1e-3 * np.abs(x).max()))
    if x[k] < 0:
        x = -x
    return x, res


def lowest_eigenvalues(op: TridiagonalOperator, count: int = 1, tol: float = 1e-10) -> SpectralResult:
    """The `count` smallest eigenpairs of `op`.

    Each eigenvalue is bracketed by Sturm-count bisection to width <= tol (or
    to rounding level when tol is below it), starting from the Gershgorin
    interval; the Sturm counts certify its index.  Eigenvectors come from
    inverse iteration with the bisection midpoint as shift.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if count > op.size:
        raise ValueError(f"count={count} exceeds the matrix size {op.size}")
    d = np.ascontiguousarray(op.diag, dtype=float)
    e2 = np.ascontiguousarray(op.offdiag, dtype=float) ** 2
    pivmin = _pivmin(e2)
    glo, ghi = op.gershgorin()
    pad = 2 * EPS * max(abs(glo), abs(ghi)) + pivmin
    glo -= pad
    ghi += pad
    scale = op.inf_norm()
    bound = max(10 * tol * scale, 1e3 * EPS * scale)

    vals = np.empty(count)
    widths = np.empty(count)
    vecs = np.empty((op.size, count))
    resid = np.empty(count)
    lo = glo
    for j in range(count):
        a, b = _bisect(d, e2, j, lo, ghi, tol, pivmin)
        if not (_sturm_count(d, e2, a, pivmin) <= j < _sturm_count(d, e2, b, pivmin)):
            raise EigenSolverError(f"bracket for eigenvalue {j} is not certified")
        vals[j] = 0.5 * (a + b)
        widths[j] = b - a
        lo = a
    for j in range(count):
        near = [vecs[:, i] for i in range(j)]
        vecs[:, j], resid[j] = _inverse_iteration(op, vals[j], near, scale, bound)
    return SpectralResult(vals, vecs, resid, widths)


@dataclass
class GroundStateReport:
    mu0: float
    mu0_exact: float
    abs_err: float
    eigvec_distance: float
    sign_definite: bool
    gap: float | None = None

    @property
    def rel_err(self) -> float:
        return self.abs_err / self.mu0_exact


def ground_state_check(p: CornerParams, g: RadialGrid | None = None, tol: float = 1e-10,
                       scheme: str = "regular") -> GroundStateReport:
    """Compare the discrete ground pair with (1+m)/2 and the sampled alpha_{k,lambda}."""
    g = g or RadialGrid.default()
    op = assemble(p, g, scheme)
    spec = lowest_eigenvalues(op, 2, tol)
    v = spec.eigenvectors[:, 0]
    exact = exact_ground_vector(op)
    dist = float(np.linalg.norm(v - exact))
    mu0 = float(spec.eigenvalues[0])
    gap = float(spec.eigenvalues[1] - mu0)
    # entries below the inverse-iteration rounding floor eps*||A||/gap carry no sign
    floor = EPS * op.inf_norm() / gap * np.abs(v).max()
    big = np.abs(v) > floor
    definite = bool(np.all(v[big] > 0) or np.all(v[big] < 0))
    return GroundStateReport(mu0, p.mu0, abs(mu0 - p.mu0), dist, definite, gap)


@dataclass
class LadderReport:
    eigenvalues: np.ndarray
    expected: np.ndarray

    @property
    def deviations(self) -> np.ndarray:
        return np.abs(self.eigenvalues - self.expected)

    @property
    def gaps(self) -> np.ndarray:
        return np.diff(self.eigenvalues)


def radial_ladder(p: CornerParams, count: int) -> np.ndarray:
    """n + (1+m)/2, n = 0..count-1: the radial spectrum in the f_{N,k} sector."""
    return np.arange(count) + p.mu0


def radial_ladder_check(p: CornerParams, g: RadialGrid | None = None, count: int = 4,
                        scheme: str = "regular", tol: float = 1e-10) -> LadderReport:
    if not 1 <= count <= 6:
        raise ValueError("ladder check supports 1 <= count <= 6")
    g = g or RadialGrid.default()
    spec = lowest_eigenvalues(assemble(p, g, scheme), count, tol)
    return LadderReport(spec.eigenvalues, radial_ladder(p, count))
