"""1D Allen-Cahn solver: semi-implicit convex splitting with an O(N) tridiagonal solve.

The equation is u_t - nu*u_xx = u - alpha*u**3 on [0, L] with homogeneous
Dirichlet boundary conditions.  One step of the implicit/explicit splitting
solves

    (1 - dt*(nu*D_xx + 1 + 2*alpha)) U^{n+1} = U^n + dt*(-2*alpha*U^n - alpha*(U^n)**3)

where D_xx is the standard second-order centered difference.  The left-hand
matrix is tridiagonal and constant in time, so each step costs one Thomas
sweep over the N-1 interior unknowns.

We store N+1 samples at x_k = k*dx, k = 0..N, with both Dirichlet endpoints
explicit; the linear solve acts on the interior only and the endpoints are
pinned to zero after every step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a hard speedup, soft dependency
    def njit(*args, **kwargs):
        def deco(f):
            return f
        return deco if not (len(args) == 1 and callable(args[0])) else args[0]


PIVOT_FLOOR = 1e-300


class DivergenceError(RuntimeError):
    """A field went non-finite or a linear solve hit a degenerate pivot."""


@dataclass(frozen=True)
class SolverConfig:
    """Physical and discretization parameters for one simulation.

    nu, alpha : diffusion and cubic coefficients (both > 0)
    domain_length : L, length of the interval
    n_points : N, number of mesh intervals (dx = L/N); N+1 samples are stored
    dt : time-step
    """

    nu: float
    alpha: float = 1.0
    domain_length: float = 1.0
    n_points: int = 4096
    dt: float = 1e-3

    def __post_init__(self):
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.alpha <= 0:
            raise ValueError(f"alpha must be positive, got {self.alpha}")
        if self.domain_length <= 0:
            raise ValueError(f"domain_length must be positive, got {self.domain_length}")
        if self.n_points < 8:
            raise ValueError(f"n_points must be >= 8, got {self.n_points}")
        if self.dt <= 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def dx(self) -> float:
        return self.domain_length / self.n_points

    @property
    def mesh(self) -> np.ndarray:
        """Sample coordinates x_k = k*dx, k = 0..N."""
        return np.linspace(0.0, self.domain_length, self.n_points + 1)


@dataclass
class Field:
    """One time slice of a discrete solution on the uniform mesh.

    Solver-produced fields keep values[0] = values[-1] = 0 (Dirichlet);
    hand-built test fields may violate that, the steppers do not.
    """

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1:
            raise ValueError("Field values must be one-dimensional")

    def copy(self) -> "Field":
        return Field(self.values.copy(), self.time)


@dataclass
class TridiagonalSystem:
    """Tridiagonal system A*x = rhs for the interior unknowns.

    sub, diag, sup and rhs all have the same length n; sub[0] and sup[-1]
    are ignored (kept zero by convention).  Construction asserts row-wise
    diagonal dominance, which the convex-splitting matrix satisfies
    whenever dt <= 1/(1 + 2*alpha).
    """

    sub: np.ndarray
    diag: np.ndarray
    sup: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        self.sub = np.asarray(self.sub, dtype=float)
        self.diag = np.asarray(self.diag, dtype=float)
        self.sup = np.asarray(self.sup, dtype=float)
        self.rhs = np.asarray(self.rhs, dtype=float)
        n = self.diag.size
        if not (self.sub.size == self.sup.size == self.rhs.size == n):
            raise ValueError("sub, diag, sup, rhs must all share one length")
        dom = np.abs(self.diag) - (np.abs(self.sub) + np.abs(self.sup))
        # sub[0]/sup[-1] are structural zeros; include them, they only help
        if np.any(dom < 0):
            k = int(np.argmax(dom < 0))
            raise ValueError(
                f"matrix is not diagonally dominant at row {k}: "
                f"|{self.diag[k]}| < |{self.sub[k]}| + |{self.sup[k]}|"
            )


@njit(cache=True)
def _thomas(sub, diag, sup, rhs):
    """Single forward-elimination / back-substitution pass. Returns (x, bad_pivot_row)."""
    n = rhs.size
    cp = np.empty(n)
    x = np.empty(n)
    piv = diag[0]
    if abs(piv) < PIVOT_FLOOR:
        return x, 0
    cp[0] = sup[0] / piv
    x[0] = rhs[0] / piv
    for i in range(1, n):
        piv = diag[i] - sub[i] * cp[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            return x, i
        cp[i] = sup[i] / piv
        x[i] = (rhs[i] - sub[i] * x[i - 1]) / piv
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x, -1


@njit(cache=True)
def _thomas_factor(sub, diag, sup):
    """Precompute elimination coefficients for a fixed matrix. Returns (cp, inv_piv, bad_row)."""
    n = diag.size
    cp = np.empty(n)
    inv_piv = np.empty(n)
    piv = diag[0]
    if abs(piv) < PIVOT_FLOOR:
        return cp, inv_piv, 0
    inv_piv[0] = 1.0 / piv
    cp[0] = sup[0] * inv_piv[0]
    for i in range(1, n):
        piv = diag[i] - sub[i] * cp[i - 1]
        if abs(piv) < PIVOT_FLOOR:
            return cp, inv_piv, i
        inv_piv[i] = 1.0 / piv
        cp[i] = sup[i] * inv_piv[i]
    return cp, inv_piv, -1


@njit(cache=True)
def _thomas_solve_factored(sub, cp, inv_piv, rhs):
    n = rhs.size
    x = np.empty(n)
    x[0] = rhs[0] * inv_piv[0]
    for i in range(1, n):
        x[i] = (rhs[i] - sub[i] * x[i - 1]) * inv_piv[i]
    for i in range(n - 2, -1, -1):
        x[i] -= cp[i] * x[i + 1]
    return x


def solve_tridiagonal(system: TridiagonalSystem) -> np.ndarray:
    """Solve A*x = rhs with the Thomas algorithm (O(n), one sweep each way)."""
    x, bad = _thomas(system.sub, system.diag, system.sup, system.rhs)
    if bad >= 0:
        raise DivergenceError(f"tridiagonal pivot below {PIVOT_FLOOR:g} at row {bad}")
    return x


class SchemeOperator:
    """The constant left-hand matrix of the convex-splitting scheme, prefactored.

    diag = 1 + dt*(2*nu/dx**2 - 1 - 2*alpha), off-diagonals = -dt*nu/dx**2,
    acting on the N-1 interior unknowns.
    """

    def __init__(self, config: SolverConfig):
        n = config.n_points - 1
        r = config.dt * config.nu / config.dx**2
        sub = np.full(n, -r)
        sup = np.full(n, -r)
        sub[0] = 0.0
        sup[-1] = 0.0
        diag = np.full(n, 1.0 + 2.0 * r - config.dt * (1.0 + 2.0 * config.alpha))
        # validates diagonal dominance (requires dt <= 1/(1 + 2*alpha))
        TridiagonalSystem(sub, diag, sup, np.zeros(n))
        self.sub, self.diag, self.sup = sub, diag, sup
        cp, inv_piv, bad = _thomas_factor(sub, diag, sup)
        if bad >= 0:
            raise DivergenceError(f"scheme matrix has degenerate pivot at row {bad}")
        self._cp = cp
        self._inv_piv = inv_piv

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        return _thomas_solve_factored(self.sub, self._cp, self._inv_piv, rhs)

    def system(self, rhs: np.ndarray) -> TridiagonalSystem:
        return TridiagonalSystem(self.sub, self.diag, self.sup, rhs)


@lru_cache(maxsize=32)
def scheme_operator(config: SolverConfig) -> SchemeOperator:
    """Cached operator; the matrix only depends on (nu, alpha, dx, dt)."""
    return SchemeOperator(config)


def reaction_rhs(w: np.ndarray, alpha: float) -> np.ndarray:
    """Explicit part of the splitting: -2*alpha*w - alpha*w**3, evaluated pointwise."""
    return -alpha * (2.0 + w * w) * w


@njit(cache=True)
def _reference_rhs(w, alpha, dt):
    out = np.empty_like(w)
    for i in range(w.size):
        wi = w[i]
        out[i] = wi + dt * (-alpha * (2.0 + wi * wi) * wi)
    return out


@njit(cache=True)
def _nudged_rhs(w, ih_u, ih_v, alpha, mu, dt):
    out = np.empty_like(w)
    for i in range(w.size):
        wi = w[i]
        out[i] = wi + dt * (-alpha * (2.0 + wi * wi) * wi + mu * (ih_u[i] - ih_v[i]))
    return out


def _check_finite(values: np.ndarray, what: str, time: float) -> None:
    if not np.all(np.isfinite(values)):
        bad = int(np.argmin(np.isfinite(values)))
        raise DivergenceError(
            f"{what} produced a non-finite value at index {bad} (t = {time:.6g})"
        )


def step_reference(u: Field, config: SolverConfig) -> Field:
    """Advance the reference solution by one convex-splitting step."""
    op = scheme_operator(config)
    rhs = _reference_rhs(u.values[1:-1], config.alpha, config.dt)
    interior = op.solve(rhs)
    out = np.empty_like(u.values)
    out[0] = 0.0
    out[-1] = 0.0
    out[1:-1] = interior
    t_next = u.time + config.dt
    _check_finite(out, "reference step", t_next)
    return Field(out, t_next)


def discrete_l2(u: Field | np.ndarray, dx: float) -> float:
    """Mesh-weighted L2 norm sqrt(dx * sum(values**2)); resolution independent."""
    values = u.values if isinstance(u, Field) else np.asarray(u)
    return math.sqrt(dx * float(np.dot(values, values)))


def discrete_linf(u: Field | np.ndarray) -> float:
    """Max-norm of the samples."""
    values = u.values if isinstance(u, Field) else np.asarray(u)
    if values.size == 0:
        return 0.0
    return float(np.max(np.abs(values)))


def make_initial_data(config: SolverConfig, seed: int, target_l2: float = 1e-2) -> Field:
    """Random low-mode initial data rescaled to a prescribed discrete L2 norm.

    u0(x) = sum_{k=1}^{N/4} a_k sin(2*pi*k*x/L) with a_k standard Gaussian
    draws from a PCG64 generator seeded by `seed`.  Only modes below the
    cubic aliasing cutoff N/4 are populated, so the spectrum is fully
    resolved.  Endpoints are exactly zero.
    """
    if target_l2 <= 0:
        raise ValueError(f"target_l2 must be positive, got {target_l2}")
    n_modes = config.n_points // 4
    if n_modes < 1:
        raise ValueError(f"n_points = {config.n_points} leaves no mode below the N/4 cutoff")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(n_modes)
    x = config.mesh / config.domain_length
    k = np.arange(1, n_modes + 1)
    values = np.sin(2.0 * np.pi * np.outer(x, k)) @ coeffs
    values[0] = 0.0
    values[-1] = 0.0
    norm = discrete_l2(values, config.dx)
    if norm == 0.0:
        raise ValueError("degenerate initial draw with zero norm")
    values *= target_l2 / norm
    return Field(values, 0.0)
