"""Quasi-static 1-D simulation of a stretched cable pushed into an elastic clip.

Units are SI throughout (m, s, N, kg) except push-profile time, which is
in milliseconds to match the 1 kHz tick index.
"""
import enum
import math
from dataclasses import dataclass, replace

import numpy as np

DT = 1e-3
DEFAULT_DAMPING = 60.0


@dataclass(frozen=True)
class ClipModel:
    """Clip geometry and contact parameters.

    The ramp [x_contact, x_in) opens the clip linearly up to h_max; at
    x_in the cable snaps in and the deformation is released.  From x_rear
    on the rear wall pushes back with stiffness k_rear.

    z_lo/z_hi bound the cable height (relative to the clip's true z) at
    which it meets the clip lip: above z_hi it passes over the clip, below
    z_lo it runs into the fixture base.
    """

    k_clip: float = 2500.0
    h_max: float = 4e-3
    x_contact: float = 5e-3
    x_in: float = 10e-3
    x_rear: float = 13e-3
    mu: float = 0.3
    psi: float = 1.2
    k_rear: float = 12500.0
    z_lo: float = -2e-3
    z_hi: float = 4e-3
    k_base: float = 50000.0

    def __post_init__(self):
        if not (0.0 <= self.x_contact < self.x_in < self.x_rear):
            raise ValueError("need 0 <= x_contact < x_in < x_rear")
        if self.k_clip <= 0 or self.h_max <= 0:
            raise ValueError("k_clip and h_max must be positive")
        if not (0.0 <= self.mu < 1.0):
            raise ValueError("mu must lie in [0, 1)")
        if not (0.0 < self.psi <= math.pi / 2):
            raise ValueError("psi must lie in (0, pi/2]")
        if self.z_lo > self.z_hi:
            raise ValueError("z_lo must not exceed z_hi")

    @property
    def projection(self):
        return 2.0 * self.mu * math.cos(self.psi) + (1.0 - self.mu * self.mu) * math.sin(self.psi)

    @property
    def peak_force(self):
        """Largest y-force the lip can resist before the cable snaps in."""
        return self.k_clip * self.h_max * self.projection


class Engagement(enum.Enum):
    CLIP = "clip"  # cable meets the clip opening
    MISS = "miss"  # cable passes over the clip
    BASE = "base"  # cable runs into the fixture base


def engagement_for_height(clip, rel_z):
    """Which part of the fixture a cable at height rel_z (m) runs into."""
    if rel_z > clip.z_hi:
        return Engagement.MISS
    if rel_z < clip.z_lo:
        return Engagement.BASE
    return Engagement.CLIP


@dataclass
class DloState:
    x: float = 0.0
    v: float = 0.0
    m: float = 0.5
    m_e: float = 0.1
    theta: float = 0.0
    f_s: float = 15.0


@dataclass(frozen=True)
class PushProfile:
    """Feedforward push f_push(t), t in ms.

    Rising shapes start at 0, increase strictly on (0, t_rise] and hold
    f_max afterwards.  ``beta`` and ``gamma`` (1/ms) set the curvature of
    the log and exp shapes.
    """

    shape: str = "linear"
    f_max: float = 20.0
    t_rise: float = 3000.0
    f_const: float = 6.0
    beta: float = 0.01
    gamma: float = 0.001

    SHAPES = ("constant", "linear", "log", "exp")

    def __post_init__(self):
        if self.shape not in self.SHAPES:
            raise ValueError(f"unknown push shape {self.shape!r}")
        if self.shape != "constant" and self.t_rise <= 0:
            raise ValueError("t_rise must be positive")

    def __call__(self, t):
        return eval_push(self, t)


def eval_push(profile, t):
    shape = profile.shape
    if shape == "constant":
        return profile.f_const
    if t >= profile.t_rise:
        return profile.f_max
    if t <= 0.0:
        return 0.0
    T = profile.t_rise
    if shape == "linear":
        return profile.f_max * t / T
    if shape == "log":
        b = profile.beta
        return profile.f_max * math.log1p(b * t) / math.log1p(b * T)
    g = profile.gamma
    return profile.f_max * math.expm1(g * t) / math.expm1(g * T)


@dataclass(frozen=True)
class SensorModel:
    noise_sigma: float = 0.05
    seed: int = 0
    bias: float = 0.0


class NoiseStream:
    """Seeded standard-normal draws, generated in blocks."""

    BLOCK = 4096

    def __init__(self, seed):
        self._rng = np.random.default_rng(seed)
        self._buf = self._rng.standard_normal(self.BLOCK).tolist()
        self._pos = 0

    def next(self):
        pos = self._pos
        if pos == self.BLOCK:
            self._buf = self._rng.standard_normal(self.BLOCK).tolist()
            pos = 0
        self._pos = pos + 1
        return self._buf[pos]


def clip_deformation(clip, x):
    if x < clip.x_contact or x >= clip.x_in:
        return 0.0
    return clip.h_max * (x - clip.x_contact) / (clip.x_in - clip.x_contact)


def clip_elastic_force(clip, x):
    f = clip.k_clip * clip_deformation(clip, x)
    if x >= clip.x_rear:
        f += clip.k_rear * (x - clip.x_rear)
    return f


def contact_force_y(f_d, mu, psi):
    return f_d * (2.0 * mu * math.cos(psi) + (1.0 - mu * mu) * math.sin(psi))


def tension_transmission(f_s, theta):
    """Lateral force a cable under per-arm tension f_s passes to its middle."""
    return 2.0 * f_s * math.sin(theta)


def deflection_angle(f_push, f_s, max_sin=0.99):
    """Cable angle at which tension transmission balances f_push."""
    s = f_push / (2.0 * f_s)
    return math.asin(min(max(s, 0.0), max_sin))


def contact_force(clip, x, engagement=Engagement.CLIP):
    """True y contact force on the cable at displacement x."""
    if engagement is Engagement.MISS:
        return 0.0
    if engagement is Engagement.BASE:
        if x <= clip.x_contact:
            return 0.0
        return contact_force_y(clip.k_base * (x - clip.x_contact), clip.mu, clip.psi)
    return contact_force_y(clip_elastic_force(clip, x), clip.mu, clip.psi)


def _advance(x, v, f_push, f_c, m, damping, dt):
    # semi-implicit Euler; the cable never moves backwards
    a = (f_push - f_c - damping * v) / m
    v_new = v + a * dt
    if v_new < 0.0:
        v_new = 0.0
    return x + v_new * dt, v_new, (v_new - v) / dt


def step_dynamics(state, clip, f_push, dt=DT, damping=DEFAULT_DAMPING, engagement=Engagement.CLIP):
    """One tick of m*a = f_push - f_c(x) - c*v; returns a new DloState."""
    f_c = contact_force(clip, state.x, engagement)
    x, v, _ = _advance(state.x, state.v, f_push, f_c, state.m, damping, dt)
    return replace(state, x=x, v=v)


def measure_force(state, f_c, a, sensor, noise=None):
    """f_c + m_e*a + bias + noise.  ``noise`` is a NoiseStream for sensor.seed."""
    f = f_c + state.m_e * a + sensor.bias
    if sensor.noise_sigma > 0.0:
        if noise is None:
            noise = NoiseStream(sensor.seed)
        f += sensor.noise_sigma * noise.next()
    return f


class Simulator:
    """Stateful tick loop around step_dynamics and measure_force.

    After each ``step`` the attributes ``f_c`` (true contact force at the
    new position), ``a`` (realized acceleration) and ``f_meas`` hold the
    tick's outputs.
    """

    def __init__(self, clip, dlo=None, sensor=None, engagement=Engagement.CLIP,
                 damping=DEFAULT_DAMPING, dt=DT):
        self.clip = clip
        self.state = dlo if dlo is not None else DloState()
        self.sensor = sensor if sensor is not None else SensorModel()
        self.engagement = engagement
        self.damping = damping
        self.dt = dt
        self.noise = NoiseStream(self.sensor.seed)
        self._sigma = self.sensor.noise_sigma
        self._bias = self.sensor.bias
        self._x_contact = clip.x_contact
        self._x_in = clip.x_in
        self._x_rear = clip.x_rear
        self._ramp = clip.x_in - clip.x_contact
        self._h_max = clip.h_max
        self._k_clip = clip.k_clip
        self._k_rear = clip.k_rear
        self._proj = 2.0 * clip.mu * math.cos(clip.psi) + (1.0 - clip.mu * clip.mu) * math.sin(clip.psi)
        self.tick = 0
        self.a = 0.0
        self.f_c = contact_force(clip, self.state.x, engagement)
        self.f_meas = self.f_c

    def step(self, f_push):
        # same arithmetic as _advance / contact_force / measure_force, inlined
        # with the clip constants hoisted; this is the 1 kHz hot path
        st = self.state
        v0 = st.v
        dt = self.dt
        a = (f_push - self.f_c - self.damping * v0) / st.m
        v = v0 + a * dt
        if v < 0.0:
            v = 0.0
        x = st.x + v * dt
        a = (v - v0) / dt
        st.x = x
        st.v = v
        self.a = a
        self.f_c = f_c = self._force(x)
        f = f_c + st.m_e * a + self._bias
        if self._sigma > 0.0:
            f += self._sigma * self.noise.next()
        self.f_meas = f
        self.tick += 1
        return f

    def _force(self, x):
        eng = self.engagement
        if eng is Engagement.CLIP:
            if x < self._x_contact:
                return 0.0
            f = 0.0
            if x < self._x_in:
                f = self._k_clip * (self._h_max * (x - self._x_contact) / self._ramp)
            if x >= self._x_rear:
                f += self._k_rear * (x - self._x_rear)
            return f * self._proj
        return contact_force(self.clip, x, eng)

    def place(self, x, v=0.0):
        """Teleport the cable (between bench cycles); the tick count continues."""
        self.state.x = x
        self.state.v = v
        self.a = 0.0
        self.f_c = contact_force(self.clip, x, self.engagement)
