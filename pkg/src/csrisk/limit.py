"""Limit processes of the naive estimator and the MLE, simulated on a grid.

``V_k(t) = W_k(t) + f_k t^2 / 2`` with ``W`` a two-sided correlated Brownian
motion. The naive limit is the convex minorant of each ``V_k``. The MLE limit
``H`` is self-induced: with ``b_k = a_{K+1} / a_k`` each ``H_k`` is the convex
minorant of ``V_k + b_k (V_+ - H_+)``.

That fixed point is also the minimizer of a strictly convex quadratic over
nondecreasing slope vectors, and minimizing over one component at a time
gives the convex minorant of
``(a_k V_k + a_{K+1} (V_+ - H_+^{(-k)})) / (a_k + a_{K+1})``. Cycling those
block updates is the default solver; a damped iteration of the first map is
kept as an alternative. Either way the reported residual is the sup-norm
distance between ``H_k`` and the convex minorant of ``V_k + b_k (V_+ - H_+)``.
"""

from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidInputError, NonConvergenceError
from .stepfn import minorant_on_grid

TOUCH_TOL = 1e-6


@dataclass(frozen=True)
class LocalParams:
    """Model quantities at the point ``t0``: ``F0_k(t0)``, ``f0_k(t0)``, ``g(t0)``."""

    t0: float
    F0: tuple
    f0: tuple
    g0: float

    def __post_init__(self):
        F0 = tuple(float(v) for v in np.atleast_1d(self.F0))
        f0 = tuple(float(v) for v in np.atleast_1d(self.f0))
        if len(F0) != len(f0) or not F0:
            raise InvalidInputError("F0 and f0 must have one entry per cause")
        if any(not 0 < v < 1 for v in F0) or sum(F0) >= 1:
            raise InvalidInputError("need 0 < F0_k and sum(F0) < 1")
        if any(v <= 0 for v in f0) or not self.g0 > 0:
            raise InvalidInputError("densities f0 and g0 must be positive")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "f0", f0)
        object.__setattr__(self, "g0", float(self.g0))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def K(self):
        return len(self.F0)

    @property
    def a(self):
        """``(a_1, ..., a_K, a_{K+1})``, reciprocals of ``F0_k`` and ``1 - F0_+``."""
        F0 = np.array(self.F0)
        return np.append(1.0 / F0, 1.0 / (1.0 - F0.sum()))


def covariance(p):
    """Covariance matrix of ``W(1)`` and the matrix of correlations."""
    F0 = np.array(p.F0)
    sigma = (np.diag(F0) - np.outer(F0, F0)) / p.g0
    sd = np.sqrt(np.diag(sigma))
    r = sigma / np.outer(sd, sd)
    if np.linalg.eigvalsh(sigma).min() <= 0:
        raise AssertionError("covariance is not positive definite")
    return sigma, r


def symmetric_grid(c, h):
    m = int(round(c / h))
    return np.arange(-m, m + 1) * h


@dataclass
class GridPaths:
    grid: np.ndarray
    W: np.ndarray
    V: np.ndarray
    window: float
    extra: dict = field(default_factory=dict)

    @property
    def K(self):
        return self.W.shape[0]

    @property
    def inner(self):
        """Mask of grid points in the analysis window ``[-window, window]``."""
        return np.abs(self.grid) <= self.window + 1e-9

    @property
    def zero_index(self):
        return int(np.flatnonzero(self.grid == 0.0)[0])


def sample_paths(p, grid, seed, window=None, zero_noise=False):
    """Sample ``W`` and ``V`` on ``grid`` (sorted, containing 0).

    Increments over each grid step are independent ``N(0, |dt| Sigma)``
    draws, accumulated outward from 0 separately on each side. ``window``
    (default: half the grid's extent) is the analysis window.
    """
    grid = np.asarray(grid, dtype=float)
    zero = np.flatnonzero(grid == 0.0)
    if zero.size != 1 or np.any(np.diff(grid) <= 0):
        raise InvalidInputError("grid must be increasing and contain 0 exactly once")
    z = int(zero[0])
    sigma, _ = covariance(p)
    evals, evecs = np.linalg.eigh(sigma)
    root = evecs * np.sqrt(np.clip(evals, 0.0, None)) @ evecs.T
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    K = p.K
    W = np.zeros((K, grid.size))
    if not zero_noise:
        right = np.diff(grid[z:])
        left = np.diff(grid[: z + 1])[::-1]
        zr = rng.standard_normal((right.size, K)) @ root * np.sqrt(right)[:, None]
        zl = rng.standard_normal((left.size, K)) @ root * np.sqrt(left)[:, None]
        W[:, z + 1:] = np.cumsum(zr, axis=0).T
        W[:, :z] = np.cumsum(zl, axis=0).T[:, ::-1]
    V = W + 0.5 * np.array(p.f0)[:, None] * grid[None, :] ** 2
    if window is None:
        window = min(-grid[0], grid[-1]) / 2
    return GridPaths(grid, W, V, float(window))


def naive_limit(paths):
    """Convex minorants ``H~_k`` of ``V_k`` and their right slopes ``F~_k``."""
    H = np.empty_like(paths.V)
    F = np.empty_like(paths.V)
    for k in range(paths.K):
        H[k], F[k], _ = minorant_on_grid(paths.grid, paths.V[k])
    paths.extra["Htilde"], paths.extra["Ftilde"] = H, F
    return H, F


@dataclass
class LimitFit:
    H: np.ndarray
    F: np.ndarray
    vertices: list
    iterations: int
    residual: float
    history: list
    converged: bool

    @property
    def rate(self):
        """Geometric mean contraction factor of the residual over the run."""
        h = [r for r in self.history if r > 0]
        if len(h) < 2:
            return float("nan")
        return float((h[-1] / h[0]) ** (1.0 / (len(h) - 1)))


def fixed_point_map(p, paths, H):
    """Convex minorants of ``V_k + b_k (V_+ - H_+)``, with slopes and vertices."""
    a = p.a
    gap = paths.V.sum(axis=0) - H.sum(axis=0)
    G = np.empty_like(H)
    F = np.empty_like(H)
    verts = []
    for k in range(p.K):
        G[k], F[k], idx = minorant_on_grid(paths.grid, paths.V[k] + a[-1] / a[k] * gap)
        verts.append(idx)
    return G, F, verts


def mle_limit(p, paths, tol=1e-9, max_iter=5000, scheme="block", damping=0.3):
    """Self-induced limit ``(H^, F^)`` by fixed-point iteration.

    ``scheme="block"`` cycles exact minimizations over one component;
    ``scheme="damped"`` iterates ``H <- (1 - damping) H + damping G(H)``;
    that map is only stable for ``damping < 2 / (1 + sum_k b_k)``.
    Starts from the naive limit. Raises :class:`NonConvergenceError` if the
    residual on the analysis window is still above ``tol`` after
    ``max_iter`` sweeps.
    """
    if scheme not in ("block", "damped"):
        raise InvalidInputError(f"unknown scheme {scheme!r}")
    a = p.a
    K = p.K
    inner = paths.inner
    Ht = paths.extra.get("Htilde")
    if Ht is None:
        Ht, _ = naive_limit(paths)
    H = Ht.copy()
    F = np.array(paths.extra["Ftilde"])
    verts = [None] * K
    V = paths.V
    Vplus = V.sum(axis=0)
    history = []
    res = np.inf
    for it in range(1, max_iter + 1):
        if scheme == "block":
            for k in range(K):
                others = H.sum(axis=0) - H[k]
                z = (a[k] * V[k] + a[-1] * (Vplus - others)) / (a[k] + a[-1])
                H[k], F[k], verts[k] = minorant_on_grid(paths.grid, z)
        else:
            G, _, _ = fixed_point_map(p, paths, H)
            H = (1 - damping) * H + damping * G
        G, FG, vG = fixed_point_map(p, paths, H)
        res = float(np.abs(G - H)[:, inner].max())
        history.append(res)
        if res <= tol:
            break
    if scheme == "damped" or verts[0] is None:
        H, F, verts = G, FG, vG
    fit = LimitFit(H, F, verts, it, res, history, res <= tol)
    if not fit.converged:
        raise NonConvergenceError(f"limit fixed point: residual {res:.3e} > {tol:.1e} after {it} sweeps",
                                  fit, res, it)
    paths.extra["Hhat"], paths.extra["Fhat"] = fit.H, fit.F
    return fit


def theorem_conditions(p, paths, fit):
    """Violation of the inequality and of equality at jumps, on the window.

    Returns ``(max_k sup (a_k H_k + a_{K+1} H_+ - a_k V_k - a_{K+1} V_+),
    max_k max |same| over jump points of F_k)``.
    """
    a = p.a
    inner = paths.inner
    Hp, Vp = fit.H.sum(axis=0), paths.V.sum(axis=0)
    ineq, eq = -np.inf, 0.0
    for k in range(p.K):
        diff = a[k] * fit.H[k] + a[-1] * Hp - a[k] * paths.V[k] - a[-1] * Vp
        ineq = max(ineq, float(diff[inner].max()))
        j = _jump_indices(fit.vertices[k], paths.grid.size)
        j = j[inner[j]]
        if j.size:
            eq = max(eq, float(np.abs(diff[j]).max()))
    return ineq, eq


def _jump_indices(vertices, size):
    """Interior hull vertices: grid points where the right slope changes."""
    v = np.asarray(vertices)
    return v[(v > 0) & (v < size - 1)]


def _cumulative_integral(grid, f):
    """``I[i] = integral from grid[0] to grid[i]`` of the right-continuous step ``f``."""
    return np.concatenate(([0.0], np.cumsum(f[:-1] * np.diff(grid))))


def diagnostics(p, paths, fit, Htilde=None, seed=0, n_pairs=10, touch_tol=TOUCH_TOL):
    """Checks of the touch-set inclusion, the order relations, and the integral inequality.

    Returns a JSON-ready dict.
    """
    a = p.a
    K = p.K
    grid = paths.grid
    inner = paths.inner
    H = fit.H
    Hp, Vp = H.sum(axis=0), paths.V.sum(axis=0)
    Wp = paths.W.sum(axis=0)
    if Htilde is None:
        Htilde = paths.extra.get("Htilde")
        if Htilde is None:
            Htilde, _ = naive_limit(paths)
    rng = np.random.default_rng(seed)
    f0 = np.array(p.f0)
    report = {
        "touch_tol": touch_tol,
        "sum_bound_max_violation": max(float((Hp - Vp)[inner].max()), 0.0),
        "naive_bound_max_violation": max(float((Htilde - H)[:, inner].max()), 0.0),
        "components": [],
    }
    win_idx = np.flatnonzero(inner)
    for k in range(K):
        P = a[k] * paths.V[k] + a[-1] * Vp
        Q = a[k] * H[k] + a[-1] * Hp
        M, _, _ = minorant_on_grid(grid, P)
        n_hat = inner & (P - Q <= touch_tol)
        n_own = inner & (P - M <= touch_tol)
        n_hat_count = int(n_hat.sum())
        outside = int((n_hat & ~n_own).sum())
        jumps = _jump_indices(fit.vertices[k], grid.size)
        _, _, vt = minorant_on_grid(grid, paths.V[k])
        jumps_t = _jump_indices(vt, grid.size)
        # integral inequality spot check between a touch point tau and a random s;
        # integrals from tau to s follow the signed convention
        step_cum = _cumulative_integral(grid, a[k] * fit.F[k] + a[-1] * fit.F.sum(axis=0))
        drift = 0.5 * (a[k] * f0[k] + a[-1] * f0.sum()) * grid**2
        lhs_cum = step_cum - drift
        S = a[k] * paths.W[k] + a[-1] * Wp
        tau_pool = np.flatnonzero(n_hat)
        worst, worst_eq = -np.inf, 0.0
        pairs = []
        if tau_pool.size:
            for _ in range(n_pairs):
                ti = int(rng.choice(tau_pool))
                si = int(rng.choice(win_idx))
                lhs = lhs_cum[si] - lhs_cum[ti]
                rhs = S[si] - S[ti]
                worst = max(worst, lhs - rhs)
                pairs.append({"tau": float(grid[ti]), "s": float(grid[si]), "lhs": float(lhs), "rhs": float(rhs)})
                sj = int(rng.choice(tau_pool))
                worst_eq = max(worst_eq, abs((lhs_cum[sj] - lhs_cum[ti]) - (S[sj] - S[ti])))
        report["components"].append({
            "k": k + 1,
            "touch_hat": n_hat_count,
            "touch_own": int(n_own.sum()),
            "inclusion_fraction": outside / n_hat_count if n_hat_count else 0.0,
            "jumps_Fhat": int(inner[jumps].sum()),
            "jumps_Ftilde": int(inner[jumps_t].sum()),
            "integral_max_excess": float(worst) if pairs else None,
            "integral_max_equality_gap": float(worst_eq),
            "integral_pairs": pairs,
        })
    return report
