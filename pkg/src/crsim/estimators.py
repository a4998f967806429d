"""Survival estimators for two-cause trial data.

The two regression fits share one scalar Newton-Raphson core on the
partial likelihood of a single binary treatment covariate, with Breslow
handling of ties:

* ``fit_cox`` treats competing events as censoring (cause-specific hazard).
* ``fit_fine_gray`` keeps subjects in the risk set after a competing event
  with weights G(t-)/G(T_j-) from the Kaplan-Meier censoring survival G,
  evaluated left-continuously (subdistribution hazard).

Because the covariate is binary, every risk-set sum collapses to a pair
(weighted control count, weighted treatment count) per event, which makes
each likelihood, score and information evaluation O(events) after one sort.

Nonparametric companions: all-cause and censoring Kaplan-Meier curves and
the Aalen-Johansen cumulative incidence per cause, all returned as
right-continuous step functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .datagen import Cause, TrialData

__all__ = [
    "FitResult",
    "StepFunction",
    "aalen_johansen",
    "cox_partial_loglik",
    "fine_gray_partial_loglik",
    "fit_cox",
    "fit_fine_gray",
    "km_censoring",
    "km_survival",
]

SCORE_TOL = 1e-8
MAX_ITERATIONS = 50
MAX_STEP_HALVINGS = 20
SEPARATION_BOUND = 15.0  # |beta| beyond this flags monotone likelihood


@dataclass(frozen=True)
class FitResult:
    """Outcome of one partial-likelihood maximization.

    log_hr is the estimated coefficient of the treatment indicator and
    se_log_hr the inverse square root of the observed information at the
    optimum; both are NaN when converged is False (reason says why).
    """

    log_hr: float
    se_log_hr: float
    n_primary_events: int
    converged: bool
    iterations: int
    reason: str | None = None

    @property
    def hr(self) -> float:
        return math.exp(self.log_hr)


@dataclass(frozen=True)
class StepFunction:
    """Right-continuous piecewise-constant function of time.

    values has one entry per interval, including the value before the
    first jump: f(t) = values[i] on [jump_times[i-1], jump_times[i]).
    """

    jump_times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        jumps = np.ascontiguousarray(self.jump_times, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if vals.shape[0] != jumps.shape[0] + 1:
            raise ValueError("need exactly one value per interval (len(jumps) + 1)")
        if jumps.size > 1 and not np.all(np.diff(jumps) > 0):
            raise ValueError("jump times must be strictly increasing")
        object.__setattr__(self, "jump_times", jumps)
        object.__setattr__(self, "values", vals)

    def __call__(self, t):
        idx = np.searchsorted(self.jump_times, t, side="right")
        out = self.values[idx]
        return float(out) if np.ndim(t) == 0 else out

    def left_limit(self, t):
        """f(t-): the value just before t."""
        idx = np.searchsorted(self.jump_times, t, side="left")
        out = self.values[idx]
        return float(out) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# shared sorted-time machinery
# ---------------------------------------------------------------------------

def _sorted_columns(data: TrialData):
    order = np.argsort(data.time, kind="stable")
    return data.time[order], data.cause[order], data.arm[order]


def _tie_groups(t: np.ndarray):
    """Group ids and first positions of tied blocks in an ascending array."""
    starts = np.empty(t.shape[0], dtype=bool)
    starts[0] = True
    starts[1:] = t[1:] > t[:-1]
    gidx = np.cumsum(starts) - 1
    first = np.flatnonzero(starts)
    return gidx, first


def _censor_survival_before(t, c, gidx, first):
    """Left-continuous censoring-KM value G(t_k-) at every sorted position.

    Zeros (possible once everyone still at risk is censored at one time)
    are replaced by the last positive value so downstream weights never
    divide by zero.
    """
    n = t.shape[0]
    at_risk = (n - first).astype(np.float64)
    d_cens = np.bincount(gidx, weights=(c == Cause.CENSORED).astype(np.float64),
                         minlength=first.size)
    g = np.concatenate(([1.0], np.cumprod(1.0 - d_cens / at_risk)))
    g_before = g[gidx]  # product over strictly earlier times
    positive = g[g > 0.0]
    return np.where(g_before > 0.0, g_before, positive[-1])


def _risk_aggregates(data: TrialData, weighted: bool):
    """Per-event weighted risk-set totals (control, treatment) plus event arms.

    With the unweighted (cause-specific) risk set this is simply the count
    of subjects with observed time >= t_event in each arm.  The weighted
    variant adds, for each subject with an earlier competing event, the
    factor G(t_event-)/G(t_subject-).
    """
    t, c, a = _sorted_columns(data)
    n = t.shape[0]
    gidx, first = _tie_groups(t)
    f = first[gidx]
    cum_treat = np.concatenate(([0], np.cumsum(a, dtype=np.int64)))
    n_treat = int(cum_treat[-1])

    events = np.flatnonzero(c == Cause.PRIMARY)
    fe = f[events]
    r1 = (n_treat - cum_treat[fe]).astype(np.float64)
    r0 = (n - fe).astype(np.float64) - r1
    z = a[events].astype(np.float64)

    if weighted:
        g_before = _censor_survival_before(t, c, gidx, first)
        inv_g = np.where(c == Cause.COMPETING, 1.0 / g_before, 0.0)
        kept1 = np.concatenate(([0.0], np.cumsum(inv_g * a)))
        kept0 = np.concatenate(([0.0], np.cumsum(inv_g * (1 - a))))
        r1 = r1 + g_before[events] * kept1[fe]
        r0 = r0 + g_before[events] * kept0[fe]
    return r0, r1, z


def _loglik_terms(r0, r1, z, beta: float):
    """(log partial likelihood, score, observed information) at beta."""
    s1 = math.exp(beta) * r1
    s0 = r0 + s1
    p = s1 / s0
    loglik = beta * float(z.sum()) - float(np.log(s0).sum())
    score = float(z.sum() - p.sum())
    info = float((p * (1.0 - p)).sum())
    return loglik, score, info


def _maximize(r0, r1, z) -> FitResult:
    n_events = z.shape[0]
    if n_events == 0:
        return FitResult(math.nan, math.nan, 0, False, 0, "no primary events")
    n_treat_events = int(z.sum())
    if n_treat_events == 0 or n_treat_events == n_events:
        return FitResult(math.nan, math.nan, n_events, False, 0,
                         "all primary events in one arm (monotone likelihood)")

    beta = 0.0
    loglik, score, info = _loglik_terms(r0, r1, z, beta)
    iterations = 0
    in_tol = 0
    converged = False
    while iterations < MAX_ITERATIONS:
        iterations += 1
        if not (math.isfinite(loglik) and math.isfinite(score) and info > 0.0):
            return FitResult(math.nan, math.nan, n_events, False, iterations,
                             "observed information not positive")
        step = score / info
        cand = beta + step
        cand_terms = _loglik_terms(r0, r1, z, cand)
        halvings = 0
        while cand_terms[0] < loglik and halvings < MAX_STEP_HALVINGS:
            step *= 0.5
            cand = beta + step
            cand_terms = _loglik_terms(r0, r1, z, cand)
            halvings += 1
        beta = cand
        loglik, score, info = cand_terms
        if abs(beta) > SEPARATION_BOUND:
            return FitResult(math.nan, math.nan, n_events, False, iterations,
                             "estimate diverged (separation / monotone likelihood)")
        if abs(score) < SCORE_TOL:
            # a couple of extra full steps push beta to its float fixed
            # point, which keeps label-swap antisymmetry at round-off level
            in_tol += 1
            if in_tol >= 3 or step == 0.0:
                converged = True
                break
        else:
            in_tol = 0
    if not converged:
        return FitResult(math.nan, math.nan, n_events, False, iterations,
                         "no convergence within iteration limit")
    return FitResult(beta, 1.0 / math.sqrt(info), n_events, True, iterations)


# ---------------------------------------------------------------------------
# model fits
# ---------------------------------------------------------------------------

def fit_cox(data: TrialData) -> FitResult:
    """Cause-specific hazard-ratio fit for the primary event.

    Competing events and administrative censoring both leave the risk set
    as censoring.  Newton-Raphson with step-halving, convergence at
    |score| < 1e-8, at most 50 iterations; non-convergence (no events,
    single-arm events, runaway estimate) is reported, never raised.
    """
    return _maximize(*_risk_aggregates(data, weighted=False))


def fit_fine_gray(data: TrialData) -> FitResult:
    """Subdistribution hazard-ratio fit for the primary event.

    Subjects stay in the risk set after a competing event with weight
    G(t-)/G(T_j-), G the Kaplan-Meier censoring survival; censored
    subjects leave with weight 1.  With no competing events the weighted
    risk sets equal the cause-specific ones and the fit reduces to
    ``fit_cox`` exactly.  The reported standard error comes from the
    inverse weighted observed information and ignores the sampling
    variability of the estimated weights.
    """
    return _maximize(*_risk_aggregates(data, weighted=True))


def cox_partial_loglik(data: TrialData, beta: float):
    """(loglik, score, information) of the cause-specific partial likelihood."""
    return _loglik_terms(*_risk_aggregates(data, weighted=False), beta)


def fine_gray_partial_loglik(data: TrialData, beta: float):
    """(loglik, score, information) of the weighted subdistribution likelihood."""
    return _loglik_terms(*_risk_aggregates(data, weighted=True), beta)


# ---------------------------------------------------------------------------
# nonparametric curves
# ---------------------------------------------------------------------------

def _product_limit(data: TrialData, is_event) -> StepFunction:
    t, c, _ = _sorted_columns(data)
    n = t.shape[0]
    gidx, first = _tie_groups(t)
    at_risk = (n - first).astype(np.float64)
    d = np.bincount(gidx, weights=is_event(c).astype(np.float64), minlength=first.size)
    surv = np.cumprod(1.0 - d / at_risk)
    drops = d > 0
    return StepFunction(t[first][drops], np.concatenate(([1.0], surv[drops])))


def km_survival(data: TrialData) -> StepFunction:
    """All-cause Kaplan-Meier survival (event = primary or competing)."""
    return _product_limit(data, lambda c: c != Cause.CENSORED)


def km_censoring(data: TrialData) -> StepFunction:
    """Kaplan-Meier survival of the censoring time.

    Censoring is the 'event' here; primary and competing events censor it.
    Evaluate with ``left_limit`` wherever a G(t-) convention is required.
    """
    return _product_limit(data, lambda c: c == Cause.CENSORED)


def aalen_johansen(data: TrialData, cause: Cause) -> StepFunction:
    """Cumulative incidence of one cause in the presence of the other.

    CIF_k(t) = sum over event times t_j <= t of S(t_j-) * d_kj / n_j with
    S the all-cause Kaplan-Meier survival; shares its arithmetic with
    ``km_survival`` so that S + CIF_primary + CIF_competing = 1 holds at
    every event time up to round-off.
    """
    if cause not in (Cause.PRIMARY, Cause.COMPETING):
        raise ValueError("cumulative incidence is defined for PRIMARY or COMPETING")
    t, c, _ = _sorted_columns(data)
    n = t.shape[0]
    gidx, first = _tie_groups(t)
    at_risk = (n - first).astype(np.float64)
    d_all = np.bincount(gidx, weights=(c != Cause.CENSORED).astype(np.float64),
                        minlength=first.size)
    d_k = np.bincount(gidx, weights=(c == cause).astype(np.float64), minlength=first.size)
    surv = np.cumprod(1.0 - d_all / at_risk)
    surv_before = np.concatenate(([1.0], surv[:-1]))
    cif = np.cumsum(surv_before * d_k / at_risk)
    jumps = d_k > 0
    return StepFunction(t[first][jumps], np.concatenate(([0.0], cif[jumps])))
