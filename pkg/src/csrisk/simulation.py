"""Data generation, the Monte-Carlo MSE comparison and localized processes.

The model has exponential observation times ``T ~ Exp(obs_rate)``, cause
``Y = k`` with probability ``cause_probs[k]`` (no failure at all with the
remaining probability) and ``X | Y = k ~ Exp(cond_rates[k])``, so that
``F0_k(t) = p_k (1 - exp(-lambda_k t))``.
"""

import csv
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset
from .estimators import naive, scaled_naive, truncated_naive
from .exceptions import InvalidInputError, NonConvergenceError
from .limit import LocalParams
from .mle import mle

log = logging.getLogger(__name__)

DEFAULT_GRID = np.round(np.arange(301) * 0.01, 10)


@dataclass(frozen=True)
class ModelSpec:
    obs_rate: float
    cause_probs: tuple
    cond_rates: tuple

    def __post_init__(self):
        probs = tuple(float(v) for v in self.cause_probs)
        rates = tuple(float(v) for v in self.cond_rates)
        if len(probs) != len(rates) or not probs:
            raise InvalidInputError("cause_probs and cond_rates need one entry per cause")
        if any(not 0 < v <= 1 for v in probs) or sum(probs) > 1 + 1e-12:
            raise InvalidInputError("cause probabilities must lie in (0, 1] and sum to <= 1")
        if any(v <= 0 for v in rates) or not self.obs_rate > 0:
            raise InvalidInputError("rates must be positive")
        object.__setattr__(self, "cause_probs", probs)
        object.__setattr__(self, "cond_rates", rates)
        object.__setattr__(self, "obs_rate", float(self.obs_rate))

    @classmethod
    def example(cls):
        """Two causes, ``G(t) = 1 - exp(-t)``, ``P(Y = k) = k/3``, ``X | Y = k ~ Exp(k)``."""
        return cls(1.0, (1 / 3, 2 / 3), (1.0, 2.0))

    @property
    def K(self):
        return len(self.cause_probs)

    def G(self, t):
        t = np.asarray(t, dtype=float)
        return np.where(t > 0, -np.expm1(-self.obs_rate * np.maximum(t, 0.0)), 0.0)

    def to_dict(self):
        return {"obs_rate": self.obs_rate, "cause_probs": list(self.cause_probs),
                "cond_rates": list(self.cond_rates)}


def true_subdist(m, k, t):
    """``F0_k(t) = p_k (1 - exp(-lambda_k t))``; zero for ``t < 0``."""
    t = np.asarray(t, dtype=float)
    p, lam = m.cause_probs[k - 1], m.cond_rates[k - 1]
    out = np.where(t > 0, p * -np.expm1(-lam * np.maximum(t, 0.0)), 0.0)
    return out if out.ndim else float(out)


def local_params_at(m, t0):
    if not t0 > 0:
        raise InvalidInputError("t0 must be positive")
    F0 = [true_subdist(m, k, t0) for k in range(1, m.K + 1)]
    f0 = [p * lam * np.exp(-lam * t0) for p, lam in zip(m.cause_probs, m.cond_rates)]
    g0 = m.obs_rate * np.exp(-m.obs_rate * t0)
    return LocalParams(t0, F0, f0, g0)


def gen_data(m, n, seed):
    """``n`` i.i.d. observations; deterministic for a given seed."""
    if n < 1:
        raise InvalidInputError("n must be at least 1")
    rng = np.random.default_rng(seed)
    K = m.K
    probs = np.append(m.cause_probs, max(0.0, 1.0 - sum(m.cause_probs)))
    probs /= probs.sum()
    t = rng.exponential(1.0 / m.obs_rate, size=n)
    y = rng.choice(K + 1, size=n, p=probs) + 1
    rates = np.append(m.cond_rates, 1.0)[y - 1]
    x = rng.exponential(1.0 / rates)
    x[y == K + 1] = np.inf
    cause = np.where(x <= t, y, K + 1)
    return Dataset(K, t, cause)


class TrueModelEstimate:
    """The true sub-distribution functions, usable wherever an estimate is."""

    def __init__(self, m):
        self.m = m

    def __call__(self, t):
        return np.vstack([true_subdist(self.m, k, t) for k in range(1, self.m.K + 1)])


def _scaled3(d):
    return scaled_naive(d, 3.0)


ESTIMATORS = {
    "mle": mle,
    "naive": naive,
    "scaled_naive": _scaled3,
    "truncated_naive": truncated_naive,
}


def _resolve(estimators, s0):
    out = {}
    for e in estimators:
        if isinstance(e, tuple):
            name, fn = e
        elif e == "scaled_naive" and s0 != 3.0:
            name, fn = e, _ScaledAt(s0)
        else:
            if e not in ESTIMATORS:
                raise InvalidInputError(f"unknown estimator {e!r}")
            name, fn = e, ESTIMATORS[e]
        out[name] = fn
    return out


class _ScaledAt:
    def __init__(self, s0):
        self.s0 = s0

    def __call__(self, d):
        return scaled_naive(d, self.s0)


@dataclass
class MSETable:
    sizes: tuple
    grid: np.ndarray
    estimators: tuple
    mse: dict = field(default_factory=dict)  # (n, name) -> (K, len(grid))
    reps: int = 0

    def relative(self, n, name, reference="mle"):
        """MSE of the reference estimator divided by that of ``name`` (nan where 0)."""
        ref = self.mse.get((n, reference))
        if ref is None:
            return np.full_like(self.mse[(n, name)], np.nan)
        den = self.mse[(n, name)]
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(den > 0, ref / den, np.nan)

    def rows(self):
        for n in self.sizes:
            for name in self.estimators:
                m = self.mse[(n, name)]
                rel = self.relative(n, name)
                for k in range(m.shape[0]):
                    for j, t in enumerate(self.grid):
                        yield n, name, k + 1, float(t), float(m[k, j]), float(rel[k, j])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["n", "estimator", "k", "t", "mse", "relative_mse"])
            for n, name, k, t, m, r in self.rows():
                w.writerow([n, name, k, repr(t), repr(m), repr(r)])


def _replicate(args):
    m, n, seed, rep, size_index, grid, names, fns = args
    d = gen_data(m, n, np.random.SeedSequence([seed, rep, size_index]))
    truth = TrueModelEstimate(m)(grid)
    out = {}
    for name, fn in zip(names, fns):
        try:
            est = fn(d)
        except NonConvergenceError as exc:
            raise NonConvergenceError(f"replication {rep} (n={n}, {name}): {exc}",
                                      exc.best, exc.residual, exc.iterations) from exc
        out[name] = (est(grid) - truth) ** 2
    return out


def mse_experiment(m, sizes=(250, 2500), reps=200, grid=DEFAULT_GRID,
                   estimators=("mle", "naive", "scaled_naive", "truncated_naive"),
                   seed=0, s0=3.0, threads=1, progress=None):
    """Pointwise MSE of each estimator over ``reps`` simulated datasets per size.

    Every estimator sees the same datasets; replication ``r`` of size index
    ``i`` uses the seed sequence ``(seed, r, i)``. Estimators are names from
    :data:`ESTIMATORS` or ``(name, callable)`` pairs.
    """
    if reps < 2:
        raise InvalidInputError("reps must be at least 2")
    if not estimators:
        raise InvalidInputError("need at least one estimator")
    fns = _resolve(estimators, s0)
    names = tuple(fns)
    grid = np.asarray(grid, dtype=float)
    table = MSETable(tuple(int(n) for n in sizes), grid, names, reps=reps)
    for si, n in enumerate(table.sizes):
        jobs = [(m, n, seed, r, si, grid, names, tuple(fns.values())) for r in range(reps)]
        if threads > 1:
            with ProcessPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(_replicate, jobs, chunksize=max(1, reps // (4 * threads))))
        else:
            results = []
            for r, job in enumerate(jobs):
                results.append(_replicate(job))
                if progress is not None and (r + 1) % max(1, reps // 10) == 0:
                    progress(f"n={n}: {r + 1}/{reps} replications")
        for name in names:
            acc = np.zeros((m.K, grid.size))
            for res in results:  # fixed summation order
                acc += res[name]
            table.mse[(n, name)] = acc / reps
    return table


def empirical_processes(d, k, F0k, t):
    """Cumulative sums at ``t`` (observations ``<= t``).

    Returns ``(W, V, Gn)`` with ``V = mean(1{T <= t} delta_k)``,
    ``Gn = mean(1{T <= t})`` and ``W = mean(1{T <= t} (delta_k - F0k))``.
    """
    order = np.argsort(d.t, kind="stable")
    ts = d.t[order]
    dk = (d.cause[order] == k).astype(float)
    cnt = np.searchsorted(ts, np.asarray(t, dtype=float), side="right")
    cdk = np.concatenate(([0.0], np.cumsum(dk)))
    cw = np.concatenate(([0.0], np.cumsum(dk - F0k)))
    return cw[cnt] / d.n, cdk[cnt] / d.n, cnt / d.n


def _cum_W(d, k, F0k, x, left=False):
    order = np.argsort(d.t, kind="stable")
    ts = d.t[order]
    vals = (d.cause[order] == k) - F0k
    cw = np.concatenate(([0.0], np.cumsum(vals)))
    cnt = np.searchsorted(ts, x, side="left" if left else "right")
    return cw[cnt] / d.n


def _step_dG(F, G, lo, hi):
    """Signed ``integral_{lo}^{hi} F(u) dG(u)`` for a step function ``F`` and continuous ``G``."""
    jt, js = F.jumps()
    Gj = G(jt)
    cum_j = np.concatenate(([0.0], np.cumsum(js)))
    cum_jg = np.concatenate(([0.0], np.cumsum(js * Gj)))

    def primitive(x):
        x = np.asarray(x, dtype=float)
        i = np.searchsorted(jt, x, side="right")
        Gx = G(x)
        return F.left_value * Gx + cum_j[i] * Gx - cum_jg[i]

    return primitive(hi) - primitive(lo)


@dataclass
class LocalizedPaths:
    t: np.ndarray
    F: np.ndarray
    V: np.ndarray
    V_left: np.ndarray
    Hbar: np.ndarray
    Hhat: np.ndarray
    c: np.ndarray
    tau: np.ndarray
    gap: np.ndarray
    jump_points: list
    jump_gaps: list

    def summary(self):
        jg = [np.abs(g).max() if len(g) else 0.0 for g in self.jump_gaps]
        return {
            "min_gap": [float(g.min()) for g in self.gap],
            "max_abs_gap_at_jumps": [float(v) for v in jg],
            "jumps": [int(len(j)) for j in self.jump_points],
            "tau": self.tau.tolist(),
            "c": self.c.tolist(),
        }


def localized_processes(d, p, fit, m, t):
    """Recentered and rescaled MLE, empirical process and integrated processes.

    ``p`` are the true local parameters at ``p.t0`` and ``m`` supplies the
    true observation-time distribution ``G``. ``gap[k]`` is
    ``a_k V_k(t-) + a_{K+1} V_+(t-) - a_k H_k(t) - a_{K+1} H_+(t)``,
    which should be nonnegative up to a vanishing remainder and close to
    zero at jump points of the localized MLE.
    """
    t = np.asarray(t, dtype=float)
    n, K, t0 = d.n, d.K, p.t0
    a = p.a
    F0 = np.array(p.F0)
    r = n ** (-1 / 3)
    scale = n ** (2 / 3) / p.g0
    x = t0 + r * t

    def V_at(tt, left=False):
        xx = t0 + r * np.asarray(tt, dtype=float)
        return np.vstack([scale * (_cum_W(d, k, F0[k - 1], xx, left) - _cum_W(d, k, F0[k - 1], t0))
                          for k in range(1, K + 1)])

    def Hbar_at(tt):
        xx = t0 + r * np.asarray(tt, dtype=float)
        out = []
        for k in range(K):
            Fk = fit.components[k]
            out.append(scale * (_step_dG(Fk, m.G, t0, xx) - F0[k] * (m.G(xx) - m.G(t0))))
        return np.vstack(out)

    Floc = (fit(x) - F0[:, None]) / r
    taus = np.empty(K)
    for k, Fk in enumerate(fit.components):
        jt, _ = Fk.jumps()
        before = jt[jt < t0]
        if before.size == 0:
            raise InvalidInputError(f"component {k + 1} has no jump before t0")
        taus[k] = (before[-1] - t0) / r
    Vtau = np.array([V_at([taus[k]], left=True)[:, 0] for k in range(K)])  # (k, j)
    Htau = np.array([Hbar_at([taus[k]])[:, 0] for k in range(K)])
    c = np.array([a[k] * Vtau[k, k] + a[-1] * Vtau[k].sum() - a[k] * Htau[k, k] - a[-1] * Htau[k].sum()
                  for k in range(K)])
    shift = c / a[:K] - F0 * np.sum(c / a[:K])

    def Hhat_at(tt):
        return Hbar_at(tt) + shift[:, None]

    def gap_at(tt):
        VL = V_at(tt, left=True)
        Hh = Hhat_at(tt)
        return np.vstack([a[k] * VL[k] + a[-1] * VL.sum(axis=0) - a[k] * Hh[k] - a[-1] * Hh.sum(axis=0)
                          for k in range(K)])

    V = V_at(t)
    VL = V_at(t, left=True)
    Hbar = Hbar_at(t)
    Hhat = Hbar + shift[:, None]
    gap = gap_at(t)
    jump_points, jump_gaps = [], []
    for k, Fk in enumerate(fit.components):
        jt, _ = Fk.jumps()
        loc = (jt - t0) / r
        loc = loc[(loc >= t.min()) & (loc <= t.max())]
        jump_points.append(loc)
        jump_gaps.append(gap_at(loc)[k] if loc.size else np.empty(0))
    return LocalizedPaths(t, Floc, V, VL, Hbar, Hhat, c, taus, gap, jump_points, jump_gaps)
