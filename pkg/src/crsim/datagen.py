"""Simulated two-cause trial data with copula-coupled event times.

Each simulated subject carries a latent primary event time and a latent
competing event time whose joint law is a Gumbel-Hougaard copula with
exponential margins; the treatment arm scales each margin's rate by its
own hazard ratio.  Administrative censoring is uniform on a fixed window,
and the observed record is whichever of the three happens first.

All randomness flows through a ``numpy.random.Generator`` built from
(master seed, scenario parameters, replication index), so any trial can
be regenerated bit-for-bit regardless of execution order or worker count.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from enum import IntEnum
from typing import Iterator, NamedTuple

import numpy as np

__all__ = [
    "Arm",
    "Cause",
    "Scenario",
    "Subject",
    "TrialData",
    "generate_trial",
    "joint_survival",
    "kendall_tau_from_alpha",
    "observe_outcomes",
    "sample_gumbel_pair",
    "sample_gumbel_pairs",
    "sample_positive_stable",
    "transform_to_event_times",
    "trial_rng",
]

DEFAULT_MASTER_SEED = 12345


class Cause(IntEnum):
    """Observed outcome of one subject."""

    CENSORED = 0
    PRIMARY = 1
    COMPETING = 2


class Arm(IntEnum):
    CONTROL = 0
    TREATMENT = 1


class Subject(NamedTuple):
    time: float
    cause: Cause
    arm: Arm


@dataclass(frozen=True)
class Scenario:
    """One cell of the simulation grid.

    Parameters
    ----------
    alpha : float
        Copula dependence parameter, >= 1.  Kendall's tau between the two
        latent event times is 1 - 1/alpha; alpha = 1 is independence.
    lambda2 : float
        Baseline competing-event rate (events per patient-year).
    theta2 : float
        Treatment hazard ratio on the competing event.
    lambda1, theta1 : float
        Baseline primary-event rate and treatment hazard ratio on the
        primary event.
    n_subjects : int
        Patients per simulated trial.
    censor_lo, censor_hi : float
        Administrative-censoring window in years; censoring times are
        uniform on [censor_lo, censor_hi].
    n_reps : int
        Monte Carlo replications per cell.
    master_seed : int
        64-bit seed from which every replication stream is derived.
    """

    alpha: float
    lambda2: float
    theta2: float = 1.0
    lambda1: float = 0.035
    theta1: float = 0.80
    n_subjects: int = 500
    censor_lo: float = 3.0
    censor_hi: float = 5.0
    n_reps: int = 2000
    master_seed: int = DEFAULT_MASTER_SEED

    def __post_init__(self):
        if not self.alpha >= 1.0:
            raise ValueError(f"alpha must be >= 1 (got {self.alpha})")
        for name in ("lambda1", "lambda2", "theta1", "theta2"):
            if not getattr(self, name) > 0.0:
                raise ValueError(f"{name} must be > 0 (got {getattr(self, name)})")
        if self.n_subjects < 1:
            raise ValueError(f"n_subjects must be >= 1 (got {self.n_subjects})")
        if not 0.0 < self.censor_lo <= self.censor_hi:
            raise ValueError(
                f"censoring window must satisfy 0 < lo <= hi "
                f"(got [{self.censor_lo}, {self.censor_hi}])"
            )
        if self.n_reps < 1:
            raise ValueError(f"n_reps must be >= 1 (got {self.n_reps})")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must fit in 64 unsigned bits")

    def stream_words(self) -> tuple[int, int]:
        """128-bit fingerprint of the data-generating parameters.

        Hashes the canonical repr of every parameter that affects a single
        trial's law (not n_reps or master_seed), so distinct scenarios get
        disjoint random streams.
        """
        key = repr((
            "gumbel-exponential",
            self.alpha, self.lambda1, self.lambda2, self.theta1, self.theta2,
            self.n_subjects, self.censor_lo, self.censor_hi,
        ))
        digest = hashlib.sha256(key.encode("ascii")).digest()
        return (
            int.from_bytes(digest[:8], "little"),
            int.from_bytes(digest[8:16], "little"),
        )


@dataclass(frozen=True)
class TrialData:
    """Columnar record of one simulated (or imported) trial.

    time, cause and arm are parallel arrays, one entry per subject; cause
    uses the ``Cause`` coding (0 censored, 1 primary, 2 competing) and arm
    is 0 control / 1 treatment.
    """

    time: np.ndarray
    cause: np.ndarray
    arm: np.ndarray

    def __post_init__(self):
        time = np.ascontiguousarray(self.time, dtype=np.float64)
        cause = np.ascontiguousarray(self.cause, dtype=np.int8)
        arm = np.ascontiguousarray(self.arm, dtype=np.int8)
        if time.ndim != 1 or time.shape != cause.shape or time.shape != arm.shape:
            raise ValueError("time, cause and arm must be 1-d arrays of equal length")
        if time.size == 0:
            raise ValueError("a trial must contain at least one subject")
        if not np.all(time > 0.0):
            raise ValueError("all observed times must be > 0")
        if not np.all((cause >= 0) & (cause <= 2)):
            raise ValueError("cause codes must be 0 (censored), 1 (primary) or 2 (competing)")
        if not np.all((arm == 0) | (arm == 1)):
            raise ValueError("arm codes must be 0 (control) or 1 (treatment)")
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "cause", cause)
        object.__setattr__(self, "arm", arm)

    def __len__(self) -> int:
        return self.time.shape[0]

    def __iter__(self) -> Iterator[Subject]:
        for t, c, a in zip(self.time, self.cause, self.arm):
            yield Subject(float(t), Cause(int(c)), Arm(int(a)))

    def event_counts(self) -> tuple[int, int, int]:
        """(primary, competing, censored) counts."""
        return (
            int(np.count_nonzero(self.cause == Cause.PRIMARY)),
            int(np.count_nonzero(self.cause == Cause.COMPETING)),
            int(np.count_nonzero(self.cause == Cause.CENSORED)),
        )


def kendall_tau_from_alpha(alpha: float) -> float:
    """Kendall's tau implied by the copula dependence parameter: 1 - 1/alpha."""
    if not alpha >= 1.0:
        raise ValueError(f"alpha must be >= 1 (got {alpha})")
    return 1.0 - 1.0 / alpha


def sample_positive_stable(index: float, size: int, rng: np.random.Generator) -> np.ndarray:
    """Positive stable deviates via the Chambers-Mallows-Stuck transform.

    Returns S > 0 with Laplace transform E[exp(-t S)] = exp(-t**index)
    for 0 < index < 1 (Kanter's form of the CMS algorithm).
    """
    if not 0.0 < index < 1.0:
        raise ValueError(f"stable index must lie in (0, 1) (got {index})")
    theta = rng.uniform(0.0, np.pi, size)
    w = rng.exponential(1.0, size)
    ratio = (1.0 - index) / index
    return (np.sin((1.0 - index) * theta) / w) ** ratio * np.sin(index * theta) / np.sin(theta) ** (1.0 / index)


def sample_gumbel_pairs(
    alpha: float, size: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """Draw pairs (u1, u2) from the Gumbel-Hougaard copula.

    Uses the Marshall-Olkin mixture construction: with S positive stable
    of index 1/alpha and E1, E2 unit exponentials, u_i = exp(-(E_i/S)**(1/alpha))
    has uniform margins and copula C(u, v) = exp(-[(-ln u)**alpha + (-ln v)**alpha]**(1/alpha)).
    alpha = 1 falls back to independent uniforms (the stable law degenerates).
    Draws that round to exactly 0 or 1 in double precision are resampled.
    """
    if not alpha >= 1.0:
        raise ValueError(f"alpha must be >= 1 (got {alpha})")

    def draw(m: int) -> tuple[np.ndarray, np.ndarray]:
        if alpha == 1.0:
            return rng.random(m), rng.random(m)
        s = sample_positive_stable(1.0 / alpha, m, rng)
        e1 = rng.exponential(1.0, m)
        e2 = rng.exponential(1.0, m)
        u1 = np.exp(-((e1 / s) ** (1.0 / alpha)))
        u2 = np.exp(-((e2 / s) ** (1.0 / alpha)))
        return u1, u2

    u1, u2 = draw(size)
    bad = (u1 <= 0.0) | (u1 >= 1.0) | (u2 <= 0.0) | (u2 >= 1.0)
    while np.any(bad):
        n_bad = int(np.count_nonzero(bad))
        r1, r2 = draw(n_bad)
        u1[bad] = r1
        u2[bad] = r2
        bad = (u1 <= 0.0) | (u1 >= 1.0) | (u2 <= 0.0) | (u2 >= 1.0)
    return u1, u2


def sample_gumbel_pair(alpha: float, rng: np.random.Generator) -> tuple[float, float]:
    """Single copula pair; see sample_gumbel_pairs."""
    u1, u2 = sample_gumbel_pairs(alpha, 1, rng)
    return float(u1[0]), float(u2[0])


def transform_to_event_times(u1, u2, scenario: Scenario, arm):
    """Inverse-CDF map from copula uniforms to latent exponential event times.

    t1 = -ln(u1) / (lambda1 * theta1**z) and t2 = -ln(u2) / (lambda2 * theta2**z)
    with z = 1 on treatment and 0 on control.  Inputs must lie strictly
    inside (0, 1); boundary draws are resampled upstream and never reach here.
    """
    u1 = np.asarray(u1, dtype=np.float64)
    u2 = np.asarray(u2, dtype=np.float64)
    if np.any((u1 <= 0.0) | (u1 >= 1.0)) or np.any((u2 <= 0.0) | (u2 >= 1.0)):
        raise ValueError("uniform inputs must lie strictly inside (0, 1)")
    z = np.asarray(arm, dtype=np.float64)
    rate1 = scenario.lambda1 * scenario.theta1**z
    rate2 = scenario.lambda2 * scenario.theta2**z
    return -np.log(u1) / rate1, -np.log(u2) / rate2


def joint_survival(t1, t2, scenario: Scenario, arm) -> np.ndarray:
    """Closed-form P(T1 > t1, T2 > t2 | arm) of the latent pair.

    exp(-[(theta1**z lambda1 t1)**alpha + (theta2**z lambda2 t2)**alpha]**(1/alpha)).
    """
    z = np.asarray(arm, dtype=np.float64)
    a = scenario.alpha
    x1 = (scenario.theta1**z * scenario.lambda1 * np.asarray(t1, dtype=np.float64)) ** a
    x2 = (scenario.theta2**z * scenario.lambda2 * np.asarray(t2, dtype=np.float64)) ** a
    return np.exp(-((x1 + x2) ** (1.0 / a)))


def observe_outcomes(t1, t2, censor) -> tuple[np.ndarray, np.ndarray]:
    """Resolve latent times against censoring into (observed time, cause).

    Primary at t1 if t1 < min(t2, c); else competing at t2 if t2 < c;
    else censored at c.
    """
    t1 = np.asarray(t1, dtype=np.float64)
    t2 = np.asarray(t2, dtype=np.float64)
    censor = np.asarray(censor, dtype=np.float64)
    primary = t1 < np.minimum(t2, censor)
    competing = ~primary & (t2 < censor)
    time = np.where(primary, t1, np.where(competing, t2, censor))
    cause = np.where(
        primary, int(Cause.PRIMARY), np.where(competing, int(Cause.COMPETING), int(Cause.CENSORED))
    ).astype(np.int8)
    return time, cause


def trial_rng(scenario: Scenario, rep_index: int) -> np.random.Generator:
    """Random stream for one replication.

    Seeds a fresh generator from SeedSequence([master_seed, w0, w1, rep_index])
    where (w0, w1) fingerprint the scenario parameters, so streams never
    collide across cells or replications and no call order can change them.
    """
    if rep_index < 0:
        raise ValueError(f"rep_index must be >= 0 (got {rep_index})")
    w0, w1 = scenario.stream_words()
    seq = np.random.SeedSequence([scenario.master_seed, w0, w1, rep_index])
    return np.random.default_rng(seq)


def generate_trial(scenario: Scenario, rep_index: int) -> TrialData:
    """Simulate one trial dataset.

    Per subject: arm from Bernoulli(0.5) (no forced balance), a copula
    pair transformed to latent event times, a uniform censoring time, and
    the first-thing-happens outcome rule.  Draw order within the stream is
    fixed (arms, copula pairs, censoring) and part of the reproducibility
    contract.
    """
    if rep_index >= scenario.n_reps:
        raise ValueError(f"rep_index {rep_index} out of range for n_reps {scenario.n_reps}")
    rng = trial_rng(scenario, rep_index)
    n = scenario.n_subjects
    arm = (rng.random(n) < 0.5).astype(np.int8)
    u1, u2 = sample_gumbel_pairs(scenario.alpha, n, rng)
    t1, t2 = transform_to_event_times(u1, u2, scenario, arm)
    censor = rng.uniform(scenario.censor_lo, scenario.censor_hi, n)
    time, cause = observe_outcomes(t1, t2, censor)
    return TrialData(time, cause, arm)
