"""Nonparametric MLE for current status data with competing risks.

The likelihood is rewritten as a mixture likelihood. Component ``k`` puts a
point mass ``p[k, u]`` at each support time ``u`` and the remaining mass
``p_inf`` sits "at infinity", so that every observation contributes
``log(a_i @ p)`` with ``a_i`` a 0/1 vector:

* cause ``k`` at ``t``: masses of component ``k`` at times ``<= t``;
* no failure at ``t``: every finite mass at times ``> t`` plus ``p_inf``.

Maximizing ``mean(log(a_i @ p)) - sum(p)`` over the cone ``p >= 0`` has the
same solution as the simplex-constrained problem (the objective is
log-homogeneous, so the optimal total mass is one). It is solved with the
support reduction algorithm: add atoms with positive directional derivative,
take a Newton step for the quadratic model restricted to the current support,
and drop atoms that the step would make negative.

The optimality certificate: with ``d_j = mean(a_ij / (a_i @ p))``, ``p`` is
the MLE iff ``d_j <= 1`` for every atom and ``d_j = 1`` where ``p_j > 0``.
"""

import logging

import numpy as np

from .estimators import SubDistEstimate, loglik, naive, unique_support
from .exceptions import InfeasibleEstimateError, NonConvergenceError
from .stepfn import StepFunction

log = logging.getLogger(__name__)

INIT_EPS = 1e-6
MASS_TOL = 1e-12
FEAS_TOL = 1e-12


class _Problem:
    """Aggregated data and vectorized likelihood pieces for one dataset."""

    def __init__(self, d):
        self.K = d.K
        self.n = d.n
        self.times = d.unique_times
        self.C = d.counts.T.copy()  # (K + 1, U)
        self.U = self.times.size
        is_atom = np.zeros((self.K, self.U), dtype=bool)
        for k in range(1, self.K + 1):
            is_atom[k - 1] = np.isin(self.times, unique_support(d, k))
        self.is_atom = is_atom

    def split(self, P, p_inf):
        F = np.cumsum(P, axis=1)
        # suffix sums, so that S is exactly zero when no mass lies beyond u
        beyond = np.cumsum(P.sum(axis=0)[::-1])[::-1]
        S = np.append(beyond[1:], 0.0) + p_inf
        return F, S

    def objective(self, P, p_inf):
        F, S = self.split(P, p_inf)
        val = 0.0
        for k in range(self.K + 1):
            c = self.C[k]
            x = F[k] if k < self.K else S
            m = c > 0
            if np.any(x[m] <= 0):
                return -np.inf
            val += float(np.dot(c[m], np.log(x[m])))
        return val / self.n

    def derivatives(self, P, p_inf, second=False):
        """Directional derivatives ``d`` for all atoms (and ``d_inf``).

        With ``second`` also the cumulative pieces of the Hessian.
        """
        F, S = self.split(P, p_inf)
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(self.C[: self.K] > 0, self.C[: self.K] / F, 0.0)
            s = np.where(self.C[self.K] > 0, self.C[self.K] / S, 0.0)
        right = np.cumsum(r[:, ::-1], axis=1)[:, ::-1]
        left = np.concatenate(([0.0], np.cumsum(s)))  # left[u] = sum_{u' < u}
        D = (right + left[None, : self.U]) / self.n
        d_inf = left[-1] / self.n
        if not second:
            return D, d_inf
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.where(self.C[: self.K] > 0, self.C[: self.K] / F**2, 0.0)
            s2 = np.where(self.C[self.K] > 0, self.C[self.K] / S**2, 0.0)
        R2 = np.cumsum(r2[:, ::-1], axis=1)[:, ::-1] / self.n
        L2 = np.concatenate(([0.0], np.cumsum(s2))) / self.n
        return D, d_inf, R2, L2


def _hessian(ks, us, R2, L2, K, U):
    """Curvature matrix on the atoms ``(ks, us)``; ``k == K`` marks infinity."""
    R2x = np.concatenate([R2, np.zeros((1, R2.shape[1]))], axis=0)
    R2x = np.concatenate([R2x, np.zeros((K + 1, 1))], axis=1)
    umax = np.maximum.outer(us, us)
    umin = np.minimum.outer(us, us)
    same = ks[:, None] == ks[None, :]
    return np.where(same, R2x[ks[:, None], umax], 0.0) + L2[umin]


def _solve(B, c):
    try:
        L = np.linalg.cholesky(B)
        return np.linalg.solve(L.T, np.linalg.solve(L, c))
    except np.linalg.LinAlgError:
        return np.linalg.lstsq(B, c, rcond=None)[0]


def _initial_masses(prob, d):
    """Interior start from the naive estimator, capped so that F+ <= 1 - eps."""
    est = naive(d)
    P = np.zeros((prob.K, prob.U))
    for k in range(prob.K):
        u = np.flatnonzero(prob.is_atom[k])
        vals = np.maximum(est.components[k](prob.times[u]), 0.0)
        vals = np.maximum.accumulate(vals)
        P[k, u] = np.diff(np.concatenate(([0.0], vals)))
        # every cause-k time must carry positive F_k
        first = np.flatnonzero(prob.C[k] > 0)
        if first.size and P[k, : first[0] + 1].sum() <= 0:
            P[k, first[0]] += INIT_EPS
    total = P.sum()
    if total > 1.0 - INIT_EPS:
        P *= (1.0 - INIT_EPS) / total
    return P, 1.0 - P.sum()


def _residual(prob, P, p_inf):
    """Certificate at the normalized point ``p / sum(p)``."""
    D, d_inf = prob.derivatives(P, p_inf)
    c = P.sum() + p_inf
    D, d_inf = D * c, d_inf * c
    g = np.where(prob.is_atom, D - 1.0, -np.inf)
    stat = max(float(g.max(initial=-np.inf)), d_inf - 1.0, 0.0)
    supp = P > 0
    comp = float(np.abs(D[supp] - 1.0).max(initial=0.0))
    if p_inf > 0:
        comp = max(comp, abs(d_inf - 1.0))
    return max(stat, comp), D, d_inf


def _candidates(prob, P, p_inf, D, d_inf, thresh):
    """Per component, the best violating atom between consecutive support points."""
    new = []
    for k in range(prob.K):
        atoms = np.flatnonzero(prob.is_atom[k])
        if atoms.size == 0:
            continue
        inside = P[k, atoms] > 0
        seg = np.cumsum(inside)
        g = np.where(inside, -np.inf, D[k, atoms] - 1.0)
        for s in np.unique(seg):
            m = seg == s
            j = int(np.argmax(np.where(m, g, -np.inf)))
            if g[j] > thresh:
                new.append((k, int(atoms[j])))
    if p_inf == 0 and d_inf - 1.0 > thresh:
        new.append((prob.K, prob.U))
    return new


def _sra_step(prob, P, p_inf, add):
    """One support-reduction Newton step; returns the trial point."""
    D, d_inf, R2, L2 = prob.derivatives(P, p_inf, second=True)
    kk, uu = np.nonzero(P > 0)
    ks = list(kk) + ([prob.K] if p_inf > 0 else [])
    us = list(uu) + ([prob.U] if p_inf > 0 else [])
    for k, u in add:
        ks.append(k)
        us.append(u)
    ks = np.array(ks, dtype=np.intp)
    us = np.array(us, dtype=np.intp)
    Dx = np.concatenate([D, np.full((1, prob.U), d_inf)], axis=0)
    Dx = np.concatenate([Dx, np.full((prob.K + 1, 1), d_inf)], axis=1)
    Px = np.concatenate([P, np.zeros((1, prob.U))], axis=0)
    Px = np.concatenate([Px, np.zeros((prob.K + 1, 1))], axis=1)
    Px[prob.K, prob.U] = p_inf
    x = Px[ks, us].copy()
    g = Dx[ks, us] - 1.0
    B = _hessian(ks, us, R2, L2, prob.K, prob.U)
    c = g + B @ x
    active = np.ones(x.size, dtype=bool)
    while True:
        idx = np.flatnonzero(active)
        beta = np.zeros_like(x)
        beta[idx] = _solve(B[np.ix_(idx, idx)], c[idx])
        bad = active & (beta <= 0)
        if not bad.any():
            x = beta
            break
        steps = np.full(x.size, np.inf)
        den = x - beta
        steps[bad] = np.where(den[bad] > 0, x[bad] / np.where(den[bad] > 0, den[bad], 1.0), 0.0)
        j = int(np.argmin(steps))
        t = float(np.clip(steps[j], 0.0, 1.0))
        x = x + t * (beta - x)
        drop = bad & (steps <= t)
        drop[j] = True
        x[drop] = 0.0
        x[~active] = 0.0
        active &= ~drop
        x = np.maximum(x, 0.0)
        if not active.any():
            break
    newP = np.zeros_like(P)
    new_inf = 0.0
    for k, u, v in zip(ks, us, x):
        if k == prob.K:
            new_inf = float(v)
        else:
            newP[k, u] += v
    return newP, new_inf, g, Px[ks, us], x


def _components(prob, P):
    comps = []
    for k in range(prob.K):
        u = np.flatnonzero(P[k] > 0)
        comps.append(StepFunction(prob.times[u], np.cumsum(P[k, u])))
    return comps


def mle(d, tol=1e-10, max_iter=1000):
    """Maximum likelihood estimate with a directional-derivative certificate.

    Raises :class:`NonConvergenceError` (carrying the last iterate) when the
    certificate is not met within ``max_iter`` support-reduction steps.
    """
    prob = _Problem(d)
    P, p_inf = _initial_masses(prob, d)
    obj = prob.objective(P, p_inf) - P.sum() - p_inf
    res = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        res, D, d_inf = _residual(prob, P, p_inf)
        if res <= tol:
            break
        add = _candidates(prob, P, p_inf, D / (P.sum() + p_inf), d_inf / (P.sum() + p_inf), tol / 10)
        newP, new_inf, g, x0, x1 = _sra_step(prob, P, p_inf, add)
        slope = float(g @ (x1 - x0))
        step = 1.0
        accepted = False
        # near the optimum objective gains drown in roundoff; there the full
        # step is taken when it lowers the certificate
        full = prob.objective(newP, new_inf) - newP.sum() - new_inf
        if full >= obj - 1e-13 * max(1.0, abs(obj)) and _residual(prob, newP, new_inf)[0] < res:
            trialP, trial_inf, trial, accepted = newP, new_inf, full, True
        while not accepted and step > 1e-12:
            trialP = P + step * (newP - P)
            trial_inf = p_inf + step * (new_inf - p_inf)
            trial = prob.objective(trialP, trial_inf) - trialP.sum() - trial_inf
            if trial >= obj + 1e-4 * step * slope and trial > -np.inf:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # model step failed; fall back to the best single atom
            if len(add) > 1:
                best = max(add, key=lambda a: (D[a] if a[0] < prob.K else d_inf))
                newP, new_inf, g, x0, x1 = _sra_step(prob, P, p_inf, [best])
                trialP, trial_inf = newP, new_inf
                trial = prob.objective(trialP, trial_inf) - trialP.sum() - trial_inf
                accepted = trial > obj
            if not accepted:
                log.debug("mle: no ascent at iteration %d (residual %.3e)", it, res)
                continue
        trialP[trialP < 0] = 0.0
        P, p_inf, obj = trialP, max(trial_inf, 0.0), trial
    else:
        res, _, _ = _residual(prob, P, p_inf)
    total = P.sum() + p_inf
    P, p_inf = P / total, p_inf / total
    est = SubDistEstimate(_components(prob, P), kind="mle", iterations=it)
    est.loglik = loglik(d, est)
    est.info["boundary"] = p_inf <= MASS_TOL
    if res > tol:
        est.converged = False
        est.kkt_residual = res
        raise NonConvergenceError(
            f"mle: certificate {res:.3e} > {tol:.1e} after {it} iterations", est, res, it)
    est.kkt_residual = kkt_residual(d, est)
    return est


def directional_derivatives(d, F):
    """Derivatives of the log-likelihood for moving mass to each candidate atom.

    Returns ``{k: (times, values)}`` for ``k = 1..K`` and the value for the
    atom at infinity under key ``"inf"``. Candidate times for component ``k``
    are :func:`unique_support` plus the jump points of ``F_k``.
    """
    comps = F.components if isinstance(F, SubDistEstimate) else list(F)
    vals = np.vstack([Fk(d.t) for Fk in comps])
    surv = 1.0 - vals.sum(axis=0)
    s_mask = d.cause == d.K + 1
    inv_s = np.zeros(d.n)
    inv_s[s_mask] = 1.0 / surv[s_mask]
    out = {}
    order = np.argsort(d.t, kind="stable")
    ts = d.t[order]
    cs = np.concatenate(([0.0], np.cumsum(inv_s[order])))
    for k, Fk in enumerate(comps, start=1):
        cand = np.union1d(unique_support(d, k), Fk.jumps()[0])
        mk = d.cause == k
        inv_f = np.zeros(d.n)
        inv_f[mk] = 1.0 / vals[k - 1, mk]
        cf = np.concatenate(([0.0], np.cumsum(inv_f[order])))
        lo = np.searchsorted(ts, cand, side="left")  # count of t_i < cand
        D = (cf[-1] - cf[lo] + cs[lo]) / d.n
        out[k] = (cand, D)
    out["inf"] = cs[-1] / d.n
    return out


def kkt_residual(d, F, mass_tol=MASS_TOL):
    """Largest violation of the first-order optimality conditions.

    ``max`` over all candidate atoms of ``(d_j - 1)+`` and, at atoms carrying
    mass above ``mass_tol`` (jumps of ``F_k``, and infinity when ``F+ < 1``),
    of ``|d_j - 1|``. Zero exactly at the MLE.
    """
    comps = F.components if isinstance(F, SubDistEstimate) else list(F)
    if len(comps) != d.K:
        raise InfeasibleEstimateError("estimate has the wrong number of components")
    for k, Fk in enumerate(comps, start=1):
        if not Fk.is_monotone(FEAS_TOL) or Fk.left_value < -FEAS_TOL or Fk.final_value > 1 + FEAS_TOL:
            raise InfeasibleEstimateError(f"component {k} is not a sub-distribution function")
    top = sum(Fk.final_value for Fk in comps)
    if top > 1 + FEAS_TOL:
        raise InfeasibleEstimateError(f"F+ reaches {top!r} > 1")
    if not np.isfinite(loglik(d, comps)):
        raise InfeasibleEstimateError("log-likelihood is -inf")
    dd = directional_derivatives(d, comps)
    res = 0.0
    for k, Fk in enumerate(comps, start=1):
        cand, D = dd[k]
        res = max(res, float(np.max(D - 1.0, initial=0.0)))
        jt, js = Fk.jumps()
        jt = jt[js > mass_tol]
        if jt.size:
            res = max(res, float(np.abs(D[np.searchsorted(cand, jt)] - 1.0).max()))
    d_inf = dd["inf"]
    res = max(res, d_inf - 1.0)
    if 1.0 - top > mass_tol:
        res = max(res, abs(d_inf - 1.0))
    return float(res)
