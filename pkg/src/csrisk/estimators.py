"""Naive, scaled naive and truncated naive estimators, and the log-likelihoods.

The MLE lives in :mod:`csrisk.mle`; all estimators return a
:class:`SubDistEstimate` holding one right-continuous step function per cause.
"""

import csv
from dataclasses import dataclass, field, replace

import numpy as np

from .dataset import Dataset
from .exceptions import InvalidInputError
from .stepfn import StepFunction, pava

KINDS = ("naive", "scaled_naive", "truncated_naive", "mle")


@dataclass
class SubDistEstimate:
    components: list
    kind: str = "naive"
    loglik: float = float("nan")
    kkt_residual: float = float("nan")
    iterations: int = 0
    converged: bool = True
    info: dict = field(default_factory=dict)

    @property
    def K(self):
        return len(self.components)

    def __call__(self, t):
        """``(K, len(t))`` array of component values."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        return np.vstack([F(t) for F in self.components])

    def plus(self, t):
        return self(t).sum(axis=0)

    def knots(self):
        """Union of the knots of all components."""
        if not self.components:
            return np.empty(0)
        return np.unique(np.concatenate([F.knots for F in self.components]))


def _as_components(F):
    return F.components if isinstance(F, SubDistEstimate) else list(F)


def loglik(d, F):
    """Average full log-likelihood; ``-inf`` if any observed term is ``log(<=0)``."""
    comps = _as_components(F)
    if len(comps) != d.K:
        raise InvalidInputError("estimate has the wrong number of components")
    vals = np.vstack([Fk(d.t) for Fk in comps])
    surv = 1.0 - vals.sum(axis=0)
    arg = np.where(d.cause <= d.K, vals[np.minimum(d.cause, d.K) - 1, np.arange(d.n)], surv)
    if np.any(arg <= 0):
        return -np.inf
    return float(np.mean(np.log(arg)))


def loglik_marginal(d, k, Fk):
    """Average log-likelihood of the reduced data ``(t, delta_k)``."""
    v = Fk(d.t)
    dk = d.cause == k
    arg = np.where(dk, v, 1.0 - v)
    if np.any(arg <= 0):
        return -np.inf
    return float(np.mean(np.log(arg)))


def naive_component(d, k):
    """Current status MLE from ``(t, delta_k)`` alone, ties pooled."""
    times, counts = d.unique_times, d.counts
    w = counts.sum(axis=1)
    vals = pava(counts[:, k - 1] / w, w)
    return StepFunction(times, vals).compress()


def naive(d):
    comps = [naive_component(d, k) for k in range(1, d.K + 1)]
    return SubDistEstimate(comps, kind="naive", loglik=loglik(d, comps))


def scale_estimate(est, s0):
    """Divide every component by ``F+(s0)`` when that exceeds one."""
    total = float(est.plus([s0])[0])
    if total <= 1.0:
        return replace(est, kind="scaled_naive", info={"scale": 1.0})
    comps = [StepFunction(F.knots, F.levels / total, F.left_value / total) for F in est.components]
    return replace(est, components=comps, kind="scaled_naive", info={"scale": total})


def scaled_naive(d, s0=3.0):
    est = scale_estimate(naive(d), s0)
    est.loglik = loglik(d, est)
    return est


def truncate_estimate(est, t_max):
    """Freeze the components at the first knot where ``F+`` exceeds one.

    With ``s`` that knot, component ``k`` is ``F_k(s-) + alpha_k`` on
    ``[s, inf)`` where ``alpha_k`` splits ``1 - F+(s-)`` in proportion to the
    component jumps at ``s``.
    """
    if float(est.plus([t_max])[0]) <= 1.0:
        return replace(est, kind="truncated_naive", info={"s_n": None})
    knots = est.knots()
    over = knots[est.plus(knots) > 1.0]
    s_n = float(over[0])
    at = np.array([F(s_n) for F in est.components])
    before = np.array([F.left_limit(s_n) for F in est.components])
    jump = at - before
    alpha = jump / jump.sum() * (1.0 - before.sum())
    comps = []
    for F, b, a in zip(est.components, before, alpha):
        keep = F.knots < s_n
        comps.append(StepFunction(np.append(F.knots[keep], s_n),
                                  np.append(F.levels[keep], b + a), F.left_value).compress())
    return replace(est, components=comps, kind="truncated_naive", info={"s_n": s_n})


def truncated_naive(d):
    est = truncate_estimate(naive(d), float(d.t.max()))
    est.loglik = loglik(d, est)
    return est


def unique_support(d, k):
    """Times where the MLE of component ``k`` is uniquely determined.

    These are the observation times with cause ``k`` or ``K + 1``, plus the
    largest observation time.
    """
    mask = (d.cause == k) | (d.cause == d.K + 1)
    return np.union1d(d.t[mask], [d.t.max()])


def write_estimate(est, path):
    """Write ``k,t,value`` rows, one per knot of each component."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "t", "value"])
        for k, F in enumerate(est.components, start=1):
            for t, v in zip(F.knots.tolist(), F.levels.tolist()):
                w.writerow([k, repr(t), repr(v)])


def read_estimate(path, K):
    rows = {k: ([], []) for k in range(1, K + 1)}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["k", "t", "value"]:
            raise InvalidInputError(f"{path}: expected header 'k,t,value'")
        for lineno, row in enumerate(reader, start=2):
            try:
                k = int(row["k"])
                t, v = float(row["t"]), float(row["value"])
            except (TypeError, ValueError) as exc:
                raise InvalidInputError(f"{path}:{lineno}: {exc}") from None
            if k not in rows:
                raise InvalidInputError(f"{path}:{lineno}: component {k} outside 1..{K}")
            rows[k][0].append(t)
            rows[k][1].append(v)
    comps = []
    for k in range(1, K + 1):
        t, v = np.array(rows[k][0]), np.array(rows[k][1])
        order = np.argsort(t, kind="stable")
        comps.append(StepFunction(t[order], v[order]))
    return SubDistEstimate(comps, kind="mle")


__all__ = [
    "Dataset", "SubDistEstimate", "loglik", "loglik_marginal", "naive", "naive_component",
    "scaled_naive", "scale_estimate", "truncated_naive", "truncate_estimate", "unique_support",
    "write_estimate", "read_estimate",
]
