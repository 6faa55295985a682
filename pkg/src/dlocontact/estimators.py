"""Per-tick contact indicators.

CciEstimator and DerivativeBaseline share one z-score machinery: a
value is predicted to follow N(mean, sigma^2) of everything accepted so
far; after warm-up a value outside mean +/- z*sigma is an out-of-interval
sample and is never folded into the statistics.
"""
from .signal import (
    DEFAULT_DEN_EPSILON,
    DEFAULT_MIN_SIGMA,
    CumulativeStats,
    guarded_ratio_diff,
)

NONE = ""
ESTABLISHED = "established"
DETACHED = "detached"
RE_ESTABLISHED = "re_established"

WARMING = "warming"
STABLE = "stable"

DEFAULT_Z = 2.807
DEFAULT_E = 0.75
DEFAULT_WARMUP = 100


class _ZScoreChangeDetector:
    """warming -> stable -> detached -> re_established, one edge per tick."""

    def __init__(self, z=DEFAULT_Z, warmup_min=DEFAULT_WARMUP, min_sigma=DEFAULT_MIN_SIGMA):
        self.z = z
        self.warmup_min = warmup_min
        self.stats = CumulativeStats(min_sigma)
        self.state = WARMING
        self.value = None

    def reset(self):
        self.stats.reset()
        self.state = WARMING
        self.value = None

    @property
    def mu(self):
        return self.stats.mean

    @property
    def sigma(self):
        return self.stats.sigma

    def bounds(self):
        half = self.z * self.stats.sd
        return self.stats.mean - half, self.stats.mean + half

    def _test(self, value):
        self.value = value
        stats = self.stats
        state = self.state
        if state == WARMING:
            stats.update(value)
            if stats.count >= self.warmup_min:
                self.state = STABLE
            return NONE
        if state == RE_ESTABLISHED:
            return NONE
        half = self.z * stats.sd
        if value < stats.mean - half:
            if state == STABLE:
                self.state = DETACHED
                return DETACHED
            return NONE
        if value > stats.mean + half:
            if state == DETACHED:
                self.state = RE_ESTABLISHED
                return RE_ESTABLISHED
            return NONE
        stats.update(value)
        return NONE


class CciEstimator(_ZScoreChangeDetector):
    """Contact change from rho_c = d f_c / d f_push over one-tick increments.

    Meant for the insertion primitive where f_push rises.  Ticks where the
    push increment is below ``den_epsilon`` produce no sample.
    """

    def __init__(self, z=DEFAULT_Z, warmup_min=DEFAULT_WARMUP,
                 min_sigma=DEFAULT_MIN_SIGMA, den_epsilon=DEFAULT_DEN_EPSILON):
        super().__init__(z, warmup_min, min_sigma)
        self.den_epsilon = den_epsilon
        self.last_f_c = None
        self.last_f_push = None

    def reset(self):
        super().reset()
        self.last_f_c = None
        self.last_f_push = None

    def update(self, f_c_smoothed, f_push):
        last_c = self.last_f_c
        last_p = self.last_f_push
        self.last_f_c = f_c_smoothed
        self.last_f_push = f_push
        self.value = None
        if last_c is None:
            return NONE
        rho = guarded_ratio_diff(f_c_smoothed - last_c, f_push - last_p, self.den_epsilon)
        if rho is None:
            return NONE
        return self._test(rho)


class CeiEstimator:
    """Contact establishment once rho_e = f_c / f_push exceeds ``threshold``."""

    def __init__(self, threshold=DEFAULT_E, den_epsilon=DEFAULT_DEN_EPSILON):
        self.threshold = threshold
        self.den_epsilon = den_epsilon
        self.established = False
        self.value = None

    def reset(self):
        self.established = False
        self.value = None

    def update(self, f_c_smoothed, f_push):
        if f_push < self.den_epsilon:
            self.value = None
            return NONE
        self.value = rho = f_c_smoothed / f_push
        if not self.established and rho > self.threshold:
            self.established = True
            return ESTABLISHED
        return NONE


class ThresholdBaseline:
    """Constant force threshold: armed above f_threshold, detached on the
    first fall back below it."""

    def __init__(self, f_threshold=3.0):
        self.f_threshold = f_threshold
        self.armed = False
        self.fired = False

    def reset(self):
        self.armed = False
        self.fired = False

    def update(self, f_c_smoothed):
        if self.fired:
            return NONE
        if f_c_smoothed > self.f_threshold:
            self.armed = True
        elif self.armed and f_c_smoothed < self.f_threshold:
            self.fired = True
            return DETACHED
        return NONE


class DerivativeBaseline(_ZScoreChangeDetector):
    """Same z-score test applied to d f_c / dt (N/s)."""

    def __init__(self, z=DEFAULT_Z, warmup_min=DEFAULT_WARMUP, min_sigma=DEFAULT_MIN_SIGMA):
        super().__init__(z, warmup_min, min_sigma)
        self.last_f_c = None

    def reset(self):
        super().reset()
        self.last_f_c = None

    def update(self, f_c_smoothed, dt=1e-3):
        last = self.last_f_c
        self.last_f_c = f_c_smoothed
        self.value = None
        if last is None:
            return NONE
        return self._test((f_c_smoothed - last) / dt)


def cci_update(est, f_c_smoothed, f_push):
    return est.update(f_c_smoothed, f_push)


def cei_update(est, f_c_smoothed, f_push):
    return est.update(f_c_smoothed, f_push)


def baseline_threshold_update(est, f_c_smoothed):
    return est.update(f_c_smoothed)


def baseline_derivative_update(est, f_c_smoothed, dt=1e-3):
    return est.update(f_c_smoothed, dt)
