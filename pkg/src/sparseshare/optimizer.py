"""Leakage-minimising padding distributions for given share sparsities.

Two independent routes:

* :func:`solve_optimal_pmf` restricts to the structured five-parameter
  family, where stationarity reduces to a cubic in ``p1``.
* :func:`optimize_general_pmf` minimises over all q^2 conditional
  probabilities by alternating minimisation (Blahut-Arimoto style) and is
  used as an oracle for small q.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .cubic import real_roots
from .leakage import (
    ConditionalPmf,
    GeneralConditionalPmf,
    LeakageReport,
    ModelError,
    SourceModel,
    SparsityTargets,
    _index_tables,
    _general_terms,
    _report,
    build_conditional_pmf,
    total_leakage,
)

__all__ = [
    "InfeasibleTargetsError",
    "ConvergenceError",
    "CubicCoefficients",
    "OptimizationResult",
    "GeneralOptimizationResult",
    "SweepRow",
    "cubic_coefficients",
    "feasible_p1_window",
    "recover_pmf_from_p1",
    "solve_optimal_pmf",
    "optimize_general_pmf",
    "sweep_leakage",
]

_WINDOW_SLACK = 1e-12


class InfeasibleTargetsError(ModelError):
    """No structured PMF reaches the requested share sparsities."""


class ConvergenceError(RuntimeError):
    """Iterative solver stopped at its cap; ``result`` holds the last iterate."""

    def __init__(self, msg, result=None):
        super().__init__(msg)
        self.result = result


@dataclass(frozen=True)
class CubicCoefficients:
    theta: float
    alpha: float
    beta: float
    gamma: float
    delta: float

    def as_tuple(self):
        return self.alpha, self.beta, self.gamma, self.delta

    def __call__(self, p1):
        return ((self.alpha * p1 + self.beta) * p1 + self.gamma) * p1 + self.delta


def cubic_coefficients(src: SourceModel, t: SparsityTargets) -> CubicCoefficients:
    q, s, sr, sar = src.q, src.s, t.s_R, t.s_AR
    theta = (q - 2) ** 2 / (q - 1)
    u = 1 - s - sar - sr
    return CubicCoefficients(
        theta=theta,
        alpha=s * s * (4 + theta),
        beta=4 * s * u - theta * s * (sr + sar + s),
        gamma=u * u + theta * (s * sar + s * sr + sar * sr),
        delta=-theta * sar * sr,
    )


def feasible_p1_window(src: SourceModel, t: SparsityTargets) -> tuple[float, float]:
    """Interval of p1 for which p2, p3 and p2 + p3 stay in [0, 1]."""
    s = src.s
    lo = max(t.s_R + t.s_AR - 1 + s, 0.0) / (2 * s)
    hi = min(s, t.s_R, t.s_AR) / s
    if lo > hi + _WINDOW_SLACK:
        raise InfeasibleTargetsError(
            f"infeasible targets s_R={t.s_R:.12g}, s_AR={t.s_AR:.12g} for s={s:.12g}: "
            f"need max(s_R+s_AR-1+s, 0) <= 2*p1*s <= 2*min(s, s_R, s_AR), "
            f"but p1 window is [{lo:.12g}, {hi:.12g}]")
    return lo, max(lo, hi)


def recover_pmf_from_p1(p1: float, src: SourceModel, t: SparsityTargets) -> ConditionalPmf:
    """Fill in p2 and p3 so that the share sparsities hit the targets."""
    s = src.s
    p2 = (t.s_R - p1 * s) / (1 - s)
    p3 = (t.s_AR - p1 * s) / (1 - s)
    return build_conditional_pmf(p1, p2, p3, src.q)


@dataclass(frozen=True)
class OptimizationResult:
    pmf: ConditionalPmf
    p1_star: float
    leakage: LeakageReport
    feasible_window: tuple[float, float]
    candidate_roots: list = field(default_factory=list)  # (root, in_window)
    stationary: bool = True
    targets: SparsityTargets | None = None

    def as_dict(self) -> dict:
        d = {"p1": self.p1_star, "p1_inv": self.pmf.p1_inv, "p2": self.pmf.p2,
             "p3": self.pmf.p3, "p23_inv": self.pmf.p23_inv,
             "window": list(self.feasible_window), "stationary": self.stationary,
             "roots": [{"p1": r, "feasible": ok} for r, ok in self.candidate_roots]}
        d.update({f"leakage_{k}": v for k, v in self.leakage.as_dict().items() if k != "base"})
        d["base"] = self.leakage.base
        return d


def solve_optimal_pmf(src: SourceModel, t: SparsityTargets, base=2) -> OptimizationResult:
    """Leakage-minimising structured PMF for the targets ``t``.

    The feasible roots of the stationarity cubic and both window endpoints
    are all evaluated; the smallest leakage wins, ties going to the larger
    p1. ``stationary`` is False when an endpoint beat every root.
    """
    lo, hi = feasible_p1_window(src, t)
    coeffs = cubic_coefficients(src, t)
    roots = real_roots(*coeffs.as_tuple())
    tagged = [(r, lo - _WINDOW_SLACK <= r <= hi + _WINDOW_SLACK) for r in roots]

    candidates = [(min(max(r, lo), hi), True) for r, ok in tagged if ok]
    candidates += [(lo, False), (hi, False)]
    best = None
    for p1, is_root in candidates:
        try:
            pmf = recover_pmf_from_p1(p1, src, t)
        except ModelError:
            continue
        value = total_leakage(pmf, src, "e").total
        key = (value, -p1)
        if best is None or key < best[0]:
            best = (key, p1, pmf, is_root)
    if best is None:  # pragma: no cover - endpoints are always valid
        raise InfeasibleTargetsError("no valid candidate in the feasible window")
    _, p1, pmf, is_root = best
    return OptimizationResult(pmf, p1, total_leakage(pmf, src, base), (lo, hi),
                              tagged, is_root, t)


# -- general q^2-variable oracle --------------------------------------------

@dataclass(frozen=True)
class GeneralOptimizationResult:
    pmf: GeneralConditionalPmf
    leakage: LeakageReport
    iterations: int
    column_residual: float
    sparsity_residual: float
    kkt_residual: float
    converged: bool


def _tilted_columns(logw, zmask, nmask, mu):
    lg = logw - 0.5 * (mu[0] * zmask + mu[1] * nmask)
    lg = lg - lg.max(axis=0, keepdims=True)
    p = np.exp(lg)
    z = p.sum(axis=0, keepdims=True)
    return p / z, np.log(z[0]) + (logw - 0.5 * (mu[0] * zmask + mu[1] * nmask)).max(axis=0)


def _solve_multipliers(logw, zmask, nmask, pa, targets, mu, tol=1e-15, max_iter=200):
    """Fit the two sparsity multipliers by damped Newton on the convex dual."""
    goal = np.array(targets)

    def dual(m):
        p, logz = _tilted_columns(logw, zmask, nmask, m)
        return float(pa @ logz + 0.5 * m @ goal), p

    val, p = dual(mu)
    for _ in range(max_iter):
        ez, en = (p * zmask).sum(0), (p * nmask).sum(0)
        ezn = (p * zmask * nmask).sum(0)
        resid = np.array([pa @ ez, pa @ en]) - goal
        if np.abs(resid).max() < tol:
            break
        grad = -0.5 * resid
        hess = 0.25 * np.array([[pa @ (ez - ez * ez), pa @ (ezn - ez * en)],
                                [pa @ (ezn - ez * en), pa @ (en - en * en)]])
        hess += 1e-18 * np.eye(2)
        try:
            step = -np.linalg.solve(hess, grad)
        except np.linalg.LinAlgError:
            step = -grad
        lam = 1.0
        while lam > 1e-12:
            cand = mu + lam * step
            cval, cp = dual(cand)
            if cval <= val + 1e-4 * lam * (grad @ step):
                break
            lam *= 0.5
        else:
            break
        mu, val, p = cand, cval, cp
    return mu, p


def _kkt_residual(p, q_r, q_ar, plus, zmask, nmask, mu):
    # per column, log(p/P_R) + log(p/P_AR) + multiplier terms must be constant on the support
    with np.errstate(divide="ignore", invalid="ignore"):
        h = (np.log(p / q_r[:, None]) + np.log(p / q_ar[plus])
             + mu[0] * zmask + mu[1] * nmask)
    h = np.where(p > 0, h, np.nan)
    return float(np.nanmax(np.nanmax(h, axis=0) - np.nanmin(h, axis=0)))


def optimize_general_pmf(src: SourceModel, t: SparsityTargets, tol: float = 1e-12,
                         max_iter: int = 10 ** 6, base=2, q_limit: int = 64,
                         kkt_tol: float = 1e-7, seed: int | None = 0
                         ) -> GeneralOptimizationResult:
    """Minimise L1 + L2 over every conditional table with the sparsity constraints.

    Alternates between the best table for fixed share marginals (a
    column-wise Gibbs tilt whose two multipliers enforce the sparsity
    targets) and the marginals induced by that table. Stops when one
    sweep lowers the leakage by less than ``tol`` nats and the KKT
    residual is below ``kkt_tol``. The starting marginals are random
    (``seed``) so the iterates do not inherit any symmetry of the
    structured family; ``seed=None`` starts from uniform marginals.
    """
    f = src.field
    q = f.q
    if q > q_limit:
        raise ModelError(f"q={q} is above the oracle limit {q_limit}")
    feasible_p1_window(src, t)
    plus, neg = _index_tables(f)
    pa = src.pmf()
    cols = np.arange(q)
    zmask = np.zeros((q, q))
    zmask[0, :] = 1.0
    nmask = np.zeros((q, q))
    nmask[neg[cols], cols] = 1.0
    targets = (t.s_R, t.s_AR)

    if seed is None:
        q_r = np.full(q, 1.0 / q)
        q_ar = np.full(q, 1.0 / q)
    else:
        rng = np.random.default_rng(seed)
        q_r, q_ar = rng.uniform(0.5, 1.5, size=(2, q))
        q_r /= q_r.sum()
        q_ar /= q_ar.sum()
    mu = np.zeros(2)
    prev = math.inf
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        logw = 0.5 * (np.log(q_r)[:, None] + np.log(q_ar)[plus])
        mu, p = _solve_multipliers(logw, zmask, nmask, pa, targets, mu)
        joint = p * pa[None, :]
        q_r = joint.sum(axis=1)
        q_ar = np.bincount(plus.ravel(), weights=joint.ravel(), minlength=q)
        l1, l2 = _general_terms(p, pa, plus)
        obj = float(l1.sum() + l2.sum())
        if it > 2 and prev - obj < tol:
            kkt = _kkt_residual(p, q_r, q_ar, plus, zmask, nmask, mu)
            if kkt < kkt_tol:
                converged = True
                break
        prev = obj

    col_res = float(np.abs(p.sum(axis=0) - 1).max())
    sp_res = float(max(abs(pa @ p[0] - t.s_R), abs(pa @ p[neg, cols] - t.s_AR)))
    kkt = _kkt_residual(p, q_r, q_ar, plus, zmask, nmask, mu)

    table = GeneralConditionalPmf(p / p.sum(axis=0, keepdims=True), f)
    l1, l2 = _general_terms(table.table, pa, plus)
    report = _report(max(math.fsum(l1.ravel()), 0.0), max(math.fsum(l2.ravel()), 0.0), src, base)
    result = GeneralOptimizationResult(table, report, it, col_res, sp_res, kkt, converged)
    if not converged or sp_res > 1e-9:
        raise ConvergenceError(
            f"general optimizer stopped after {it} iterations "
            f"(sparsity residual {sp_res:.3g}, KKT residual {kkt:.3g})", result)
    return result


# -- sweeps -------------------------------------------------------------------

@dataclass(frozen=True)
class SweepRow:
    s_avg: float
    s_delta: float
    s_R: float
    s_AR: float
    p1: float
    p2: float
    p3: float
    leakage_L1: float
    leakage_L2: float
    leakage_total: float
    feasible: bool


SWEEP_FIELDS = [f for f in SweepRow.__dataclass_fields__]


def _sweep_point(args):
    src, s_avg, s_delta, base = args
    s_r, s_ar = s_avg - s_delta / 2, s_avg + s_delta / 2
    nan = float("nan")
    try:
        t = SparsityTargets(s_r, s_ar, src.q)
        res = solve_optimal_pmf(src, t, base)
    except ModelError:
        return SweepRow(s_avg, s_delta, s_r, s_ar, nan, nan, nan, nan, nan, nan, False)
    lk = res.leakage
    return SweepRow(s_avg, s_delta, s_r, s_ar, res.p1_star, res.pmf.p2, res.pmf.p3,
                    lk.L1, lk.L2, lk.total, True)


def default_jobs() -> int:
    try:
        return max(1, int(os.environ.get("SPARSESHARE_JOBS", "1")))
    except ValueError:
        return 1


def sweep_leakage(src: SourceModel, s_avg_grid, s_delta: float, base=2,
                  jobs: int | None = None) -> list[SweepRow]:
    """Optimal leakage along a grid of average sparsities.

    Output order follows the grid; infeasible points come back with
    ``feasible=False`` and NaN values.
    """
    jobs = default_jobs() if jobs is None else jobs
    work = [(src, float(x), float(s_delta), base) for x in s_avg_grid]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            return list(ex.map(_sweep_point, work, chunksize=max(1, len(work) // (4 * jobs))))
    return [_sweep_point(w) for w in work]
