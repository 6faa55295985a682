"""Clip-fixing skill: stretch -> contact -> pause -> insertion -> fixed.

Every primitive is a feedforward force plus an exit condition.  The
contact primitive pushes with a constant force and watches the
establishment indicator; the insertion primitive ramps the push from the
contact level and watches the change indicator.  The resulting 0/1
contact-state sequence decides the outcome.
"""
import enum
from dataclasses import dataclass, field

from .contact_model import (
    DEFAULT_DAMPING,
    ClipModel,
    DloState,
    PushProfile,
    SensorModel,
    Simulator,
    deflection_angle,
    engagement_for_height,
)
from .estimators import (
    DEFAULT_E,
    DEFAULT_WARMUP,
    DEFAULT_Z,
    DETACHED,
    ESTABLISHED,
    NONE,
    RE_ESTABLISHED,
    CciEstimator,
    CeiEstimator,
)
from .signal import SmoothingWindow

TRACE_COLUMNS = (
    "tick", "f_push", "f_c_true", "f_c_ext", "f_c_smoothed", "rho_e", "rho_c",
    "mu", "sigma", "x", "v", "contact_state", "verdict_event",
)
TRACE_SCHEMA = "dlocontact-trace v1"

NAN = float("nan")


class AnomalyVerdict(str, enum.Enum):
    SUCCESS = "success"
    MISSED_CONTACT = "missed_contact"
    ENTRY_BLOCKAGE = "entry_blockage"
    OVERFORCE = "overforce"


IDEAL_SEQUENCE = (0, 1, 0)


@dataclass(frozen=True)
class ExitCondition:
    max_time: float  # ms
    max_displacement: float  # m


@dataclass(frozen=True)
class ManipulationPrimitive:
    name: str
    push: PushProfile
    stretch_force: float
    exit: ExitCondition
    offset: float = 0.0  # push level the profile is added to


@dataclass(frozen=True)
class MpParams:
    """Sampled skill parameters plus the fixed push settings they ride on.

    ``x_h_z`` is the commanded approach height (m) relative to the assumed
    fixture plane, ``F_push`` the insertion push reached after ``t_push`` ms.
    ``removal_delay`` keeps the insertion push rising for that many ms after
    a detachment, which is how an overforce movement is provoked.
    """

    x_h_z: float = 0.0
    F_push: float = 20.0
    contact_push: float = 6.0
    shape: str = "linear"
    t_push: float = 3000.0
    removal_delay: float = 0.0


@dataclass(frozen=True)
class SkillConfig:
    window: int = 50
    z: float = DEFAULT_Z
    e_threshold: float = DEFAULT_E
    warmup_min: int = DEFAULT_WARMUP
    v_eps: float = 1e-3
    damping: float = DEFAULT_DAMPING
    stretch_force: float = 15.0
    contact_max_time: float = 2000.0
    pause_max_time: float = 1000.0
    fixed_ticks: int = 100
    beta: float = 0.01
    gamma: float = 0.001


class ContactStateSeq:
    """Alternating 0/1 contact history, starting from 0 at tick 0."""

    def __init__(self):
        self.states = [0]
        self.transition_ticks = [0]

    def append(self, state, tick):
        if state not in (0, 1):
            raise ValueError("contact state must be 0 or 1")
        if state == self.states[-1]:
            raise ValueError("contact states must alternate")
        self.states.append(state)
        self.transition_ticks.append(tick)

    @property
    def current(self):
        return self.states[-1]

    def __eq__(self, other):
        return list(self.states) == list(other)

    def __len__(self):
        return len(self.states)

    def __repr__(self):
        return f"ContactStateSeq({self.states})"


def validate_sequence(states):
    states = list(states)
    if not states or states[0] != 0:
        raise ValueError("contact-state sequence must start with 0")
    for a, b in zip(states, states[1:]):
        if a == b or b not in (0, 1):
            raise ValueError(f"sequence {states} does not alternate")
    return states


def classify(seq, exited_by_limit=False, x=None, clip=None):
    """Map a finished contact-state sequence to a verdict.

    The four canonical patterns map directly.  Longer sequences (noise
    can add spurious edges) fall back to the final position: ending in 0
    inside [x_in, x_rear) is a success; ending in 1 is overforce past
    x_rear and entry blockage otherwise.
    """
    states = validate_sequence(getattr(seq, "states", seq))
    n = len(states)
    if n == 1:
        return AnomalyVerdict.MISSED_CONTACT
    if n == 2:
        return AnomalyVerdict.ENTRY_BLOCKAGE
    if n == 3:
        return AnomalyVerdict.SUCCESS
    if n == 4:
        return AnomalyVerdict.OVERFORCE
    if x is None or clip is None:
        raise ValueError("sequences longer than 4 states need the final x and clip")
    if states[-1] == 0:
        if clip.x_in <= x < clip.x_rear:
            return AnomalyVerdict.SUCCESS
        return AnomalyVerdict.OVERFORCE if x >= clip.x_rear else AnomalyVerdict.ENTRY_BLOCKAGE
    return AnomalyVerdict.OVERFORCE if x >= clip.x_rear else AnomalyVerdict.ENTRY_BLOCKAGE


def insertion_profile(params, config=None):
    """Rising part of the insertion push, added on top of the contact push."""
    config = config or SkillConfig()
    rise = params.F_push - params.contact_push
    if rise <= 0.0:
        return PushProfile("constant", f_const=0.0)
    return PushProfile(params.shape, f_max=rise, t_rise=params.t_push,
                       beta=config.beta, gamma=config.gamma)


def build_primitives(clip, params, config=None):
    config = config or SkillConfig()
    hold = params.contact_push
    limit_x = 2.0 * clip.x_rear
    return {
        "stretch": ManipulationPrimitive(
            "stretch", PushProfile("constant", f_const=0.0), config.stretch_force,
            ExitCondition(0.0, limit_x)),
        "contact": ManipulationPrimitive(
            "contact", PushProfile("constant", f_const=hold), config.stretch_force,
            ExitCondition(config.contact_max_time, limit_x)),
        "pause": ManipulationPrimitive(
            "pause", PushProfile("constant", f_const=hold), config.stretch_force,
            ExitCondition(config.pause_max_time, limit_x)),
        "insertion": ManipulationPrimitive(
            "insertion", insertion_profile(params, config), config.stretch_force,
            ExitCondition(2.0 * params.t_push, limit_x), offset=hold),
        "fixed": ManipulationPrimitive(
            "fixed", PushProfile("constant", f_const=0.0), config.stretch_force,
            ExitCondition(float(config.fixed_ticks), limit_x)),
    }


@dataclass
class FixingResult:
    seq: ContactStateSeq
    verdict: AnomalyVerdict
    trace: list = field(repr=False)
    exited_by_limit: bool
    x_final: float
    f_c_final: float
    ticks: int
    events: list
    true_detach_tick: int = -1
    true_rear_tick: int = -1


class _Run:
    """Shared per-tick plumbing for one fixing iteration."""

    def __init__(self, sim, config, record):
        self.sim = sim
        self.config = config
        self.window = SmoothingWindow(config.window)
        self.seq = ContactStateSeq()
        self.trace = [] if record else None
        self.events = []
        self.smoothed = 0.0
        self.true_detach_tick = -1
        self.true_rear_tick = -1

    def tick(self, f_push):
        sim = self.sim
        was_in = sim.state.x >= sim.clip.x_in
        was_rear = sim.state.x >= sim.clip.x_rear
        f_meas = sim.step(f_push)
        x = sim.state.x
        if self.true_detach_tick < 0 and not was_in and x >= sim.clip.x_in:
            self.true_detach_tick = sim.tick
        if self.true_rear_tick < 0 and not was_rear and x >= sim.clip.x_rear:
            self.true_rear_tick = sim.tick
        self.smoothed = self.window.update(f_meas)
        return self.smoothed

    def record(self, f_push, rho_e, rho_c, mu, sigma, event):
        if event:
            self.events.append((self.sim.tick, event))
        if self.trace is None:
            return
        sim = self.sim
        self.trace.append((
            sim.tick, f_push, sim.f_c, sim.f_meas, self.smoothed, rho_e, rho_c,
            mu, sigma, sim.state.x, sim.state.v, self.seq.current, event,
        ))


def run_fixing_iteration(clip, dlo=None, params=None, sensor=None, *, delta_z=0.0,
                         config=None, record=True):
    """Run one clip-fixing attempt in simulation.

    ``delta_z`` is the fixture's true height offset; only the simulator
    sees it, through the cable's height relative to the clip.
    """
    clip = clip or ClipModel()
    params = params or MpParams()
    sensor = sensor or SensorModel()
    config = config or SkillConfig()
    dlo = DloState(**vars(dlo)) if dlo is not None else DloState()
    dlo.f_s = config.stretch_force

    engagement = engagement_for_height(clip, params.x_h_z - delta_z)
    sim = Simulator(clip, dlo, sensor, engagement, damping=config.damping)
    run = _Run(sim, config, record)
    mps = build_primitives(clip, params, config)
    seq = run.seq
    exited_by_limit = False

    # stretch: tension is set instantly, the cable is straight
    dlo.theta = 0.0

    # contact: constant push, establishment indicator
    mp = mps["contact"]
    cei = CeiEstimator(config.e_threshold)
    f_push = mp.push(0.0)
    start = sim.tick
    established = False
    while True:
        fs = run.tick(f_push)
        ev = cei.update(fs, f_push)
        if ev == ESTABLISHED:
            seq.append(1, sim.tick)
            dlo.theta = deflection_angle(f_push, dlo.f_s)
            established = True
        run.record(f_push, cei.value if cei.value is not None else NAN, NAN, NAN, NAN, ev)
        if established:
            break
        if sim.tick - start >= mp.exit.max_time or dlo.x >= mp.exit.max_displacement:
            exited_by_limit = True
            break

    if established:
        # pause: hold the push until the cable has settled
        mp = mps["pause"]

        def hold(f):
            run.tick(f)
            run.record(f, NAN, NAN, NAN, NAN, NONE)

        _, settled = pause_until_settled(sim, mp.push(0.0), config.v_eps,
                                         mp.exit.max_time, step=hold)
        if not settled:
            exited_by_limit = True
        else:
            exited_by_limit = _insert(run, mps["insertion"], params, config)

    # fixed: drop the push and let the cable come to rest
    mp = mps["fixed"]
    for _ in range(int(mp.exit.max_time)):
        run.tick(0.0)
        run.record(0.0, NAN, NAN, NAN, NAN, NONE)

    verdict = classify(seq, exited_by_limit, dlo.x, clip)
    return FixingResult(
        seq=seq, verdict=verdict, trace=run.trace, exited_by_limit=exited_by_limit,
        x_final=dlo.x, f_c_final=sim.f_c, ticks=sim.tick, events=run.events,
        true_detach_tick=run.true_detach_tick, true_rear_tick=run.true_rear_tick,
    )


def pause_until_settled(sim, hold_push, v_eps=1e-3, max_time=1000, step=None):
    """Hold a constant push until |v| < v_eps or max_time ticks pass.

    ``step`` replaces ``sim.step`` when the caller wants to observe each
    tick.  Returns (state, settled).
    """
    step = step or sim.step
    dlo = sim.state
    for _ in range(int(max_time)):
        if abs(dlo.v) < v_eps:
            return dlo, True
        step(hold_push)
    return dlo, abs(dlo.v) < v_eps


def _insert(run, mp, params, config):
    """Insertion primitive; returns True when it ended on its exit limit."""
    sim = run.sim
    dlo = sim.state
    seq = run.seq
    cci = CciEstimator(config.z, config.warmup_min)
    profile = mp.push
    start = sim.tick
    detach_tick = None
    while True:
        t = float(sim.tick - start)
        f_push = mp.offset + profile(t)
        fs = run.tick(f_push)
        ev = cci.update(fs, f_push)
        if ev == DETACHED:
            seq.append(0, sim.tick)
            detach_tick = sim.tick
        elif ev == RE_ESTABLISHED:
            seq.append(1, sim.tick)
        rho = cci.value if cci.value is not None else NAN
        run.record(f_push, NAN, rho, cci.mu, cci.sigma, ev)
        if ev == RE_ESTABLISHED:
            return False
        if detach_tick is not None and sim.tick - detach_tick >= params.removal_delay:
            return False
        if t + 1.0 >= mp.exit.max_time or dlo.x >= mp.exit.max_displacement:
            return True
