"""Fixed-interval scalar ReLU approximations used as comparison baselines.

Square, least-squares, and minimax (Remez-exchange with an LP fallback)
fits on a dense uniform grid over the empirical pre-activation range.  The
kink at zero is always kept on the grid because it controls the minimax
error; no percentile clipping or validation tuning is applied.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import DegenerateInterval, EmptyInput

DEFAULT_GRID_SIZE = 4001


@dataclass(frozen=True)
class PolyActivation:
    """Scalar polynomial activation p(u) = sum_k coefficients[k] u^k."""

    coefficients: np.ndarray  # ascending powers, length degree+1
    fit_interval: tuple[float, float]
    method: str  # "square" | "least_squares" | "remez"
    max_error: float  # sup |p - relu| over the fit grid
    alternations: int | None = None  # equioscillation count (remez only)

    def __post_init__(self):
        object.__setattr__(
            self, "coefficients", np.asarray(self.coefficients, dtype=np.float64).reshape(-1)
        )

    @property
    def degree(self) -> int:
        return self.coefficients.shape[0] - 1

    def __call__(self, u: np.ndarray) -> np.ndarray:
        """Horner evaluation."""
        u = np.asarray(u, dtype=np.float64)
        out = np.full_like(u, self.coefficients[-1])
        for c in self.coefficients[-2::-1]:
            out = out * u + c
        return out


def relu(u: np.ndarray) -> np.ndarray:
    return np.maximum(u, 0.0)


def empirical_interval(preacts) -> tuple[float, float]:
    """Global min-max range of the pre-activations in the fitting split."""
    arr = np.asarray(preacts, dtype=np.float64)
    if arr.size == 0:
        raise EmptyInput("empirical interval of an empty matrix")
    return float(arr.min()), float(arr.max())


def _fit_grid(interval: tuple[float, float], grid_size: int) -> np.ndarray:
    a, b = float(interval[0]), float(interval[1])
    if not a < b:
        raise DegenerateInterval(f"need a < b, got [{a}, {b}]")
    grid = np.linspace(a, b, grid_size)
    if a < 0.0 < b and not np.any(grid == 0.0):
        grid = np.sort(np.append(grid, 0.0))
    return grid


def fit_least_squares(
    degree: int, interval: tuple[float, float], grid_size: int = DEFAULT_GRID_SIZE
) -> PolyActivation:
    """Least-squares polynomial fit of ReLU on the dense grid.

    The normal equations are solved in an orthogonalized (Chebyshev) basis on
    the mapped interval, then converted back to ascending power coefficients.
    """
    if degree < 1:
        raise ValueError("least-squares baseline needs degree >= 1")
    grid = _fit_grid(interval, grid_size)
    cheb = np.polynomial.Chebyshev.fit(grid, relu(grid), degree, domain=list(interval))
    poly = cheb.convert(kind=np.polynomial.Polynomial)
    coeffs = np.zeros(degree + 1)
    coeffs[: poly.coef.shape[0]] = poly.coef
    act = PolyActivation(
        coefficients=coeffs,
        fit_interval=(float(interval[0]), float(interval[1])),
        method="least_squares",
        max_error=0.0,
    )
    object.__setattr__(act, "max_error", float(np.abs(act(grid) - relu(grid)).max()))
    return act


def _solve_reference(grid: np.ndarray, f: np.ndarray, ref_idx: np.ndarray, scale: float):
    """Solve p(x_k) + (-1)^k E = f(x_k) on the reference; returns (coeffs, E)."""
    x = grid[ref_idx] / scale
    k = ref_idx.shape[0]
    A = np.vander(x, k - 1, increasing=True)
    A = np.hstack([A, ((-1.0) ** np.arange(k))[:, None]])
    sol = np.linalg.solve(A, f[ref_idx])
    return sol[:-1], float(sol[-1])


def _alternating_extrema(err: np.ndarray) -> np.ndarray:
    """Indices of the max-|err| point inside each maximal same-sign block."""
    sign = np.sign(err)
    # zero entries inherit the previous nonzero sign so blocks stay maximal
    for i in range(sign.shape[0]):
        if sign[i] == 0.0:
            sign[i] = sign[i - 1] if i else 1.0
    boundaries = np.flatnonzero(np.diff(sign) != 0.0)
    starts = np.concatenate([[0], boundaries + 1])
    ends = np.concatenate([boundaries + 1, [sign.shape[0]]])
    picks = [s + int(np.argmax(np.abs(err[s:e]))) for s, e in zip(starts, ends)]
    return np.asarray(picks, dtype=np.int64)


def _lp_minimax(grid: np.ndarray, f: np.ndarray, degree: int, scale: float):
    """LP fallback: minimize t subject to |p(u_g) - f(u_g)| <= t on the grid."""
    x = grid / scale
    V = np.vander(x, degree + 1, increasing=True)
    n = grid.shape[0]
    # variables: coeffs (degree+1), t
    c = np.zeros(degree + 2)
    c[-1] = 1.0
    a_ub = np.vstack(
        [
            np.hstack([V, -np.ones((n, 1))]),
            np.hstack([-V, -np.ones((n, 1))]),
        ]
    )
    b_ub = np.concatenate([f, -f])
    res = linprog(
        c,
        A_ub=a_ub,
        b_ub=b_ub,
        bounds=[(None, None)] * (degree + 1) + [(0.0, None)],
        method="highs-ds",
    )
    if not res.success:
        raise ArithmeticError(f"minimax LP failed: {res.message}")
    return res.x[: degree + 1], float(res.x[-1])


def fit_remez(
    degree: int, interval: tuple[float, float], grid_size: int = DEFAULT_GRID_SIZE
) -> PolyActivation:
    """Minimax fit of ReLU on the dense grid.

    Multi-point exchange iteration on the grid; when the reference stops
    alternating (fewer than degree+2 sign blocks) the dense-grid LP takes
    over.  The equioscillation count of the final error curve is recorded.
    """
    if degree < 0:
        raise ValueError("degree must be nonnegative")
    grid = _fit_grid(interval, grid_size)
    f = relu(grid)
    scale = max(abs(grid[0]), abs(grid[-1]), 1e-300)
    n = grid.shape[0]
    k = degree + 2

    coeffs_scaled = None
    if k <= n:
        # Chebyshev-distributed initial reference snapped to grid indices
        t = np.cos(np.pi * np.arange(k)[::-1] / (k - 1))
        ref = np.unique(np.round((t + 1.0) / 2.0 * (n - 1)).astype(np.int64))
        converged = False
        for _ in range(60):
            if ref.shape[0] != k:
                break  # degenerate reference: hand off to the LP
            try:
                cand, E = _solve_reference(grid, f, ref, scale)
            except np.linalg.LinAlgError:
                break
            err = np.vander(grid / scale, degree + 1, increasing=True) @ cand - f
            picks = _alternating_extrema(err)
            if picks.shape[0] < k:
                break
            # keep k consecutive blocks containing the global maximum
            pos = int(np.argmax(np.abs(err[picks])))
            lo = min(max(0, pos - (k - 1)), picks.shape[0] - k)
            window = picks[lo : lo + k]
            # grow the window toward larger extrema while possible
            best_window = window
            for start in range(picks.shape[0] - k + 1):
                w = picks[start : start + k]
                if np.abs(err[w]).min() > np.abs(err[best_window]).min():
                    best_window = w
            window = best_window
            coeffs_scaled = cand
            max_err = float(np.abs(err).max())
            if max_err - abs(E) <= 1e-12 * max(1.0, max_err):
                converged = True
                break
            if np.array_equal(window, ref):
                converged = True  # stationary reference: grid optimum reached
                break
            ref = window
        if not converged:
            coeffs_scaled = None

    if coeffs_scaled is None:
        coeffs_scaled, _ = _lp_minimax(grid, f, degree, scale)

    # undo the variable scaling u -> u/scale
    coeffs = coeffs_scaled / scale ** np.arange(degree + 1)
    act = PolyActivation(
        coefficients=coeffs,
        fit_interval=(float(interval[0]), float(interval[1])),
        method="remez",
        max_error=0.0,
    )
    err = act(grid) - f
    max_err = float(np.abs(err).max())
    picks = _alternating_extrema(err)
    near_max = picks[np.abs(err[picks]) >= max_err * (1.0 - 1e-6)]
    object.__setattr__(act, "max_error", max_err)
    object.__setattr__(act, "alternations", int(near_max.shape[0]))
    return act


def square_activation(
    interval: tuple[float, float] = (-1.0, 1.0), grid_size: int = DEFAULT_GRID_SIZE
) -> PolyActivation:
    """The square activation u^2, the cheapest nonlinear replacement."""
    grid = _fit_grid(interval, grid_size)
    act = PolyActivation(
        coefficients=np.array([0.0, 0.0, 1.0]),
        fit_interval=(float(interval[0]), float(interval[1])),
        method="square",
        max_error=0.0,
    )
    object.__setattr__(act, "max_error", float(np.abs(act(grid) - relu(grid)).max()))
    return act
