"""Adaptive shape control over a board of clip fixtures.

The controller visits each fixture, runs clip-fixing iterations, and after
every anomaly narrows the uniform ranges it samples the approach height
and insertion push from.  It only ever sees verdicts; fixture offsets stay
inside the simulator behind ``FixingSite``.
"""
from dataclasses import dataclass, field, replace

import numpy as np

from .contact_model import ClipModel, DloState, SensorModel
from .skill import AnomalyVerdict, MpParams, SkillConfig, run_fixing_iteration

SAFE_Z = (-0.02, 0.02)  # m
SAFE_F = (0.0, 40.0)  # N


@dataclass(frozen=True)
class Fixture:
    clip: ClipModel
    delta_z: float = 0.0
    name: str = ""


@dataclass(frozen=True)
class FixtureBoard:
    fixtures: tuple
    assumed_plane_z: float = 0.0


@dataclass(frozen=True)
class ParamRanges:
    z_lo: float = -0.015
    z_hi: float = 0.015
    f_lo: float = 12.0
    f_hi: float = 28.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.z_lo > self.z_hi or self.f_lo > self.f_hi:
            raise ValueError("parameter range with lo > hi")

    def clamped(self):
        z_lo = min(max(self.z_lo, SAFE_Z[0]), SAFE_Z[1])
        z_hi = min(max(self.z_hi, SAFE_Z[0]), SAFE_Z[1])
        f_lo = min(max(self.f_lo, SAFE_F[0]), SAFE_F[1])
        f_hi = min(max(self.f_hi, SAFE_F[0]), SAFE_F[1])
        return replace(self, z_lo=z_lo, z_hi=z_hi, f_lo=f_lo, f_hi=f_hi)


def sample_params(ranges, rng=None, base=None):
    """Uniform draw of (x_h_z, F_push); the rest is copied from ``base``."""
    if rng is None:
        rng = np.random.default_rng(ranges.rng_seed)
    base = base or MpParams()
    z = float(rng.uniform(ranges.z_lo, ranges.z_hi))
    f = float(rng.uniform(ranges.f_lo, ranges.f_hi))
    return replace(base, x_h_z=z, F_push=f)


def _ordered(lo, hi):
    if lo <= hi:
        return lo, hi
    mid = 0.5 * (lo + hi)
    return mid, mid


def update_ranges(ranges, verdict, used):
    """Narrow the sampling ranges in the direction the anomaly points.

    missed contact: the cable passed over, so search lower.
    entry blockage: it hit the base or could not open the clip, so search
    higher and push harder.
    overforce: cap the push.
    """
    verdict = AnomalyVerdict(verdict)
    if verdict is AnomalyVerdict.SUCCESS:
        raise ValueError("ranges are only updated after an anomaly")
    z_lo, z_hi, f_lo, f_hi = ranges.z_lo, ranges.z_hi, ranges.f_lo, ranges.f_hi
    if verdict is AnomalyVerdict.MISSED_CONTACT:
        z_hi = used.x_h_z
    elif verdict is AnomalyVerdict.ENTRY_BLOCKAGE:
        z_lo = used.x_h_z
        f_lo = max(f_lo, used.F_push)
    else:
        f_hi = used.F_push
    z_lo, z_hi = _ordered(z_lo, z_hi)
    f_lo, f_hi = _ordered(f_lo, f_hi)
    return replace(ranges, z_lo=z_lo, z_hi=z_hi, f_lo=f_lo, f_hi=f_hi).clamped()


class FixingSite:
    """A fixture as the controller sees it: attempt(params) -> result.

    The true offset is held privately and only handed to the simulator.
    """

    def __init__(self, fixture, dlo=None, noise_sigma=0.05, config=None, seed=0):
        self._fixture = fixture
        self._dlo = dlo if dlo is not None else DloState()
        self._noise_sigma = noise_sigma
        self._config = config or SkillConfig()
        self._seed = seed
        self.attempts = 0

    @property
    def name(self):
        return self._fixture.name

    def attempt(self, params):
        sensor = SensorModel(self._noise_sigma, seed=self._seed * 1000 + self.attempts)
        self.attempts += 1
        res = run_fixing_iteration(
            self._fixture.clip, self._dlo, params, sensor,
            delta_z=self._fixture.delta_z, config=self._config, record=False)
        # ground truth for reporting only; the controller never branches on it
        res.truth_success = (
            self._fixture.clip.x_in <= res.x_final < self._fixture.clip.x_rear
            and res.f_c_final == 0.0)
        return res


@dataclass
class IterationRecord:
    fixture: str
    iteration: int
    x_h_z: float
    F_push: float
    verdict: str
    ticks: int
    truth_success: bool


@dataclass
class FixtureOutcome:
    fixture: str
    iterations: int
    verdicts: list
    final_params: MpParams
    resolved: bool
    truth_success: bool


@dataclass
class BoardReport:
    records: list = field(default_factory=list)
    outcomes: list = field(default_factory=list)

    @property
    def all_resolved(self):
        return all(o.resolved for o in self.outcomes)

    @property
    def all_truly_fixed(self):
        return all(o.truth_success for o in self.outcomes)

    def summary(self):
        lines = []
        for o in self.outcomes:
            state = "resolved" if o.resolved else "UNRESOLVED"
            lines.append(f"{o.fixture}: {state} after {o.iterations} iteration(s); "
                         f"verdicts {' -> '.join(o.verdicts)}")
        return "\n".join(lines)


def control_fixture(site, max_iters, rng, ranges=None, adaptive=True, naive=None, base=None):
    """Fixing iterations at one fixture until success or the cap."""
    ranges = (ranges or ParamRanges()).clamped()
    base = base or MpParams()
    records = []
    verdicts = []
    params = naive or base
    truth = False
    n_iter = 1 if not adaptive else max_iters
    for it in range(n_iter):
        if adaptive:
            params = sample_params(ranges, rng, base)
        res = site.attempt(params)
        verdicts.append(res.verdict.value)
        truth = res.truth_success
        records.append(IterationRecord(site.name, it, params.x_h_z, params.F_push,
                                       res.verdict.value, res.ticks, truth))
        if res.verdict is AnomalyVerdict.SUCCESS:
            break
        if adaptive:
            ranges = update_ranges(ranges, res.verdict, params)
    outcome = FixtureOutcome(site.name, len(records), verdicts, params,
                             verdicts[-1] == AnomalyVerdict.SUCCESS.value, truth)
    return outcome, records


def run_board(board, max_iters_per_fixture=15, seed=0, *, ranges=None, adaptive=True,
              naive=None, base=None, dlo=None, noise_sigma=0.05, config=None):
    """Visit every fixture in order (moving between them is instantaneous).

    Ranges restart from ``ranges`` at each fixture.
    """
    if not board.fixtures:
        raise ValueError("board has no fixtures")
    rng = np.random.default_rng(seed)
    report = BoardReport()
    for i, fixture in enumerate(board.fixtures):
        site = FixingSite(fixture, dlo, noise_sigma, config, seed=seed * 1000 + i)
        outcome, records = control_fixture(site, max_iters_per_fixture, rng, ranges,
                                           adaptive, naive, base)
        report.outcomes.append(outcome)
        report.records.extend(records)
    return report
