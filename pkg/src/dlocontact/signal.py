"""Fixed-memory streaming primitives: triangular smoothing, running
mean/std, and a guarded ratio of increments.

Everything here is updated once per control tick and keeps O(1) state
beyond the smoothing ring buffers.
"""
import math

DEFAULT_MIN_SIGMA = 1e-4
DEFAULT_DEN_EPSILON = 1e-6


def bartlett_weights(length):
    """Normalized triangular weights, index 0 = newest sample.

    w_k = 1 - |k - (L-1)/2| / ((L-1)/2), scaled to sum to 1.  Lengths 1
    and 2 have no interior taps and fall back to a flat average.
    """
    if length < 1:
        raise ValueError("window length must be >= 1")
    if length <= 2:
        return [1.0 / length] * length
    half = (length - 1) / 2.0
    raw = [1.0 - abs(k - half) / half for k in range(length)]
    total = math.fsum(raw)
    return [w / total for w in raw]


class SmoothingWindow:
    """Streaming Bartlett (triangular) moving average.

    A triangle with zero end taps is the convolution of two boxcars of
    lengths a and b (a + b = L - 1) delayed by one sample, so once the
    window is full the output is a pair of running sums.  The sums are
    re-accumulated from their buffers every wrap to stop rounding drift.
    Before the window fills, the weights over the available samples are
    renormalized (no zero padding).
    """

    def __init__(self, length=50):
        self.length = int(length)
        self.weights = bartlett_weights(self.length)
        self.count = 0
        # raw history for the startup path and for length <= 2
        self._hist = [0.0] * self.length
        self._hpos = 0
        self._cascade = self.length >= 3
        if self._cascade:
            self._a = (self.length - 1) // 2
            self._b = self.length - 1 - self._a
            self._scale = 1.0 / (self._a * self._b)
            self._xbuf = [0.0] * self._a
            self._xpos = 0
            self._s = 0.0
            self._sbuf = [0.0] * self._b
            self._spos = 0
            self._t = 0.0

    def reset(self):
        # in place, so a reset mid-loop does not allocate
        self.count = 0
        self._hpos = 0
        hist = self._hist
        for i in range(self.length):
            hist[i] = 0.0
        if self._cascade:
            for i in range(self._a):
                self._xbuf[i] = 0.0
            for i in range(self._b):
                self._sbuf[i] = 0.0
            self._xpos = self._spos = 0
            self._s = self._t = 0.0

    def _direct(self):
        # weighted average over what is buffered, newest first
        n = min(self.count, self.length)
        w = self.weights
        hist = self._hist
        pos = self._hpos
        L = self.length
        acc = 0.0
        wsum = 0.0
        for k in range(n):
            wk = w[k]
            acc += wk * hist[(pos - k) % L]
            wsum += wk
        if wsum == 0.0:
            return hist[pos]
        return acc / wsum

    def update(self, raw):
        """Push one raw sample, return the smoothed value for this tick."""
        L = self.length
        self._hpos = pos = (self._hpos + 1) % L
        self._hist[pos] = raw
        self.count += 1

        if not self._cascade:
            return self._direct()

        # output uses S_{t-1} .. S_{t-b}, all already in the second buffer
        out = self._t * self._scale

        # S_t = S_{t-1} + x_t - x_{t-a}
        xp = self._xpos
        self._s += raw - self._xbuf[xp]
        self._xbuf[xp] = raw
        xp += 1
        if xp == self._a:
            xp = 0
            self._s = math.fsum(self._xbuf)
        self._xpos = xp

        sp = self._spos
        self._t += self._s - self._sbuf[sp]
        self._sbuf[sp] = self._s
        sp += 1
        if sp == self._b:
            sp = 0
            self._t = math.fsum(self._sbuf)
        self._spos = sp

        if self.count < L:
            return self._direct()
        return out

    def window(self):
        """Buffered raw samples, newest first (diagnostics and tests)."""
        n = min(self.count, self.length)
        return [self._hist[(self._hpos - k) % self.length] for k in range(n)]


def smooth(window, raw):
    return window.update(raw)


class CumulativeStats:
    """Welford running mean and sample standard deviation.

    ``sigma`` never reports below ``min_sigma``; with fewer than two
    samples it reports exactly ``min_sigma``.
    """

    __slots__ = ("count", "mean", "m2", "min_sigma", "sd")

    def __init__(self, min_sigma=DEFAULT_MIN_SIGMA):
        self.min_sigma = min_sigma
        self.reset()

    def reset(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0
        self.sd = self.min_sigma

    @property
    def sigma(self):
        return self.sd

    def update(self, value):
        n = self.count = self.count + 1
        delta = value - self.mean
        self.mean += delta / n
        self.m2 += delta * (value - self.mean)
        if n >= 2:
            s = math.sqrt(self.m2 / (n - 1))
            self.sd = s if s > self.min_sigma else self.min_sigma
        return self.mean, self.sd


def stats_update(stats, value):
    return stats.update(value)


def guarded_ratio_diff(df_num, df_den, den_epsilon=DEFAULT_DEN_EPSILON):
    """df_num / df_den, or None when |df_den| < den_epsilon."""
    if abs(df_den) < den_epsilon:
        return None
    return df_num / df_den
