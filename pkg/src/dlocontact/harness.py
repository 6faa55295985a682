"""Experiment runners behind the CLI: indicator comparison sweeps, single
traces, board runs and the tick-budget bench.

Scoring only ever uses simulator-internal events (the tick the cable
crosses x_in, the tick the true contact force reaches the establishment
level), never an estimator's own output.
"""
import csv
import hashlib
import json
import math
import time
import tracemalloc
from array import array
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .contact_model import SensorModel, Simulator, eval_push
from .estimators import (
    DETACHED,
    ESTABLISHED,
    CciEstimator,
    CeiEstimator,
    DerivativeBaseline,
    ThresholdBaseline,
)
from .presets import make_config, make_clip, make_dlo, parse_config
from .scenario import ConfigError, Scenario
from .shape_control import Fixture, FixtureBoard, ParamRanges, run_board
from .signal import SmoothingWindow
from .skill import (
    TRACE_COLUMNS,
    TRACE_SCHEMA,
    MpParams,
    SkillConfig,
    insertion_profile,
    pause_until_settled,
    run_fixing_iteration,
)

CHANGE_INDICATORS = ("F_c", "df_c/dt", "rho_c")
INDICATORS = CHANGE_INDICATORS + ("rho_e",)

COMPARE_SCHEMA = "dlocontact-compare v1"
COMPARE_SUMMARY_SCHEMA = "dlocontact-compare-summary v1"
BOARD_SCHEMA = "dlocontact-board v1"
BENCH_SCHEMA = "dlocontact-bench v1"

COMPARE_COLUMNS = ("pattern", "config", "seed", "indicator", "true_tick", "detect_tick",
                   "success", "latency")
BOARD_COLUMNS = ("seed", "mode", "fixture", "iteration", "x_h_z", "F_push", "verdict",
                 "ticks", "truth_success")


# ---------------------------------------------------------------- scenario -> models

def skill_config(sc):
    return SkillConfig(
        window=sc["skill.window"], z=sc["skill.z"], e_threshold=sc["skill.e_threshold"],
        warmup_min=sc["skill.warmup_min"], v_eps=sc["skill.v_eps"],
        damping=sc["skill.damping"], stretch_force=sc["skill.stretch_force"],
        contact_max_time=sc["skill.contact_max_time"],
        pause_max_time=sc["skill.pause_max_time"], fixed_ticks=sc["skill.fixed_ticks"],
        beta=sc["push.beta"], gamma=sc["push.gamma"])


def mp_params(sc, shape=None):
    return MpParams(
        x_h_z=sc["params.x_h_z"], F_push=sc["push.F_push"],
        contact_push=sc["push.contact_push"], shape=shape or sc["push.shape"],
        t_push=sc["push.t_push"], removal_delay=sc["params.removal_delay"])


def models_for(sc, config_name=None):
    """(clip, dlo) for a preset name with the scenario's clip./cable. overrides."""
    name = config_name or sc["config"]
    try:
        clip, dlo = make_config(name, **sc.section("clip"))
    except KeyError as e:
        raise ConfigError(str(e.args[0])) from None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"config {name!r}: {e}") from None
    cable = sc.section("cable")
    if cable:
        dlo = replace(dlo, **cable)
    return clip, dlo


def sensor_for(sc, seed):
    return SensorModel(sc["sensor.noise_sigma"], seed=seed, bias=sc["sensor.bias"])


def parse_fixture(text, cable, clip_overrides=None):
    """'C3@+5' -> Fixture(C3 clip for ``cable``, delta_z = 5 mm)."""
    name, sep, dz = text.partition("@")
    try:
        delta_z = float(dz) * 1e-3 if sep else 0.0
        clip = make_clip(name.strip(), cable, **(clip_overrides or {}))
    except KeyError as e:
        raise ConfigError(f"fixture {text!r}: unknown preset {e.args[0]!r}") from None
    except ValueError as e:
        raise ConfigError(f"fixture {text!r}: {e}") from None
    return Fixture(clip, delta_z, f"{name.strip()}@{delta_z * 1e3:+g}mm")


def validate(sc):
    """Build everything a run needs once so bad scenarios fail before any work."""
    try:
        cfg = skill_config(sc)
        if cfg.window < 1 or cfg.warmup_min < 1:
            raise ConfigError("skill.window and skill.warmup_min must be >= 1")
        shapes = sc["compare.patterns"] if sc.kind == "indicator_compare" else [sc["push.shape"]]
        for shape in shapes:
            insertion_profile(mp_params(sc, shape), cfg)
        if sc.kind == "indicator_compare":
            for name in sc["compare.configs"]:
                models_for(sc, name)
            if not shapes or not sc["compare.configs"]:
                raise ConfigError("compare.patterns and compare.configs must be non-empty")
        elif sc.kind == "board_run":
            try:
                parse_config("C1/" + sc["board.cable"])
            except KeyError as e:
                raise ConfigError(str(e.args[0])) from None
            if not sc["board.fixtures"]:
                raise ConfigError("board.fixtures is empty")
            for f in sc["board.fixtures"]:
                parse_fixture(f, sc["board.cable"], sc.section("clip"))
            ParamRanges(sc["ranges.z_lo"], sc["ranges.z_hi"], sc["ranges.f_lo"], sc["ranges.f_hi"])
        else:
            models_for(sc)
        if sc.kind == "bench" and sc["bench.ticks"] < 1:
            raise ConfigError("bench.ticks must be >= 1")
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from None


# ---------------------------------------------------------------- csv helpers

def fmt(v):
    """Stable text for CSV cells: shortest round-trip floats, blank for NaN."""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return repr(v)
    if v is None:
        return ""
    return str(v)


def write_csv(path, schema, columns, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {schema}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(out_dir, sc, seeds, command, outputs, extra=None):
    """manifest.json next to the outputs: scenario hash, seeds, version."""
    out_dir = Path(out_dir)
    data = {
        "tool": "dlocontact",
        "version": __version__,
        "command": command,
        "scenario_source": sc.source,
        "scenario_sha256": sc.digest(),
        "scenario": sc.canonical().splitlines(),
        "seeds": list(seeds),
        "outputs": {Path(p).name: file_sha256(p) for p in outputs},
    }
    if extra:
        data.update(extra)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return path


# ---------------------------------------------------------------- comparison

@dataclass
class TrialOutcome:
    true_detach: int
    true_establish: int
    detections: dict  # indicator -> tick or -1


def comparison_trial(clip, dlo, sensor, shape, config=None, F_push=20.0, hold=6.0,
                     f_threshold=3.0, post_ticks=300, t_push=3000.0):
    """One overforce-style insertion with every indicator watching.

    The cable starts at the clip lip.  A constant push (capped at half the
    clip's peak force so the contact phase cannot break through) brings it
    into contact and is held until it settles; then the push rises to
    F_push and stays on after the cable snaps in, so it runs into the rear
    wall.  The run ends ``post_ticks`` after the true detachment.
    """
    config = config or SkillConfig()
    hold = min(hold, 0.5 * clip.peak_force)
    dlo = replace(dlo, x=clip.x_contact, v=0.0, f_s=config.stretch_force)
    sim = Simulator(clip, dlo, sensor, damping=config.damping)
    win = SmoothingWindow(config.window)
    cei = CeiEstimator(config.e_threshold)
    first = {}
    true_est = -1

    # contact: hold push until CEI fires or the contact limit
    for _ in range(int(config.contact_max_time)):
        fs = win.update(sim.step(hold))
        if true_est < 0 and sim.f_c >= config.e_threshold * hold:
            true_est = sim.tick
        if cei.update(fs, hold) == ESTABLISHED:
            first["rho_e"] = sim.tick
            break

    def settle_step(f):
        nonlocal true_est
        win.update(sim.step(f))
        if true_est < 0 and sim.f_c >= config.e_threshold * hold:
            true_est = sim.tick

    pause_until_settled(sim, hold, config.v_eps, config.pause_max_time, step=settle_step)

    params = MpParams(F_push=F_push, contact_push=hold, shape=shape, t_push=t_push)
    prof = insertion_profile(params, config)
    cci = CciEstimator(config.z, config.warmup_min)
    der = DerivativeBaseline(config.z, config.warmup_min)
    thr = ThresholdBaseline(f_threshold)
    truth = -1
    x_in = clip.x_in
    limit = int(2 * t_push)
    for k in range(limit):
        f = hold + prof(float(k))
        was_in = dlo.x >= x_in
        fs = win.update(sim.step(f))
        if truth < 0 and not was_in and dlo.x >= x_in:
            truth = sim.tick
        if "rho_c" not in first and cci.update(fs, f) == DETACHED:
            first["rho_c"] = sim.tick
        if "df_c/dt" not in first and der.update(fs, sim.dt) == DETACHED:
            first["df_c/dt"] = sim.tick
        if "F_c" not in first and thr.update(fs) == DETACHED:
            first["F_c"] = sim.tick
        if truth >= 0 and sim.tick >= truth + post_ticks:
            break
        if dlo.x >= 2.0 * clip.x_rear:
            break
    return TrialOutcome(truth, true_est,
                        {name: first.get(name, -1) for name in INDICATORS})


def score(true_tick, detect_tick, tol_early=10, tol_late=100):
    """Detection counts when it lands in [truth - tol_early, truth + tol_late]."""
    if true_tick < 0 or detect_tick < 0:
        return False
    return true_tick - tol_early <= detect_tick <= true_tick + tol_late


def _cell_rows(raw, source, pattern, config_name, seeds):
    sc = Scenario(raw, source)
    cfg = skill_config(sc)
    clip, dlo = models_for(sc, config_name)
    tol_e, tol_l = sc["compare.tol_early"], sc["compare.tol_late"]
    rows = []
    for seed in seeds:
        out = comparison_trial(clip, dlo, sensor_for(sc, seed), pattern, cfg,
                               F_push=sc["push.F_push"], hold=sc["compare.hold"],
                               f_threshold=sc["compare.f_threshold"],
                               post_ticks=sc["compare.post_ticks"], t_push=sc["push.t_push"])
        for name in INDICATORS:
            truth = out.true_establish if name == "rho_e" else out.true_detach
            det = out.detections[name]
            ok = score(truth, det, tol_e, tol_l)
            rows.append((pattern, config_name, seed, name, truth, det, ok,
                         det - truth if ok else ""))
    return rows


@dataclass
class ComparisonReport:
    patterns: list
    configs: list
    seeds: list
    rows: list = field(default_factory=list)

    def cell(self, indicator, pattern=None, config=None):
        """(successes, trials, mean latency of successes or None)."""
        hits = n = 0
        lat = []
        for r in self.rows:
            if r[3] != indicator:
                continue
            if pattern is not None and r[0] != pattern:
                continue
            if config is not None and r[1] != config:
                continue
            n += 1
            if r[6]:
                hits += 1
                lat.append(r[7])
        return hits, n, (sum(lat) / len(lat) if lat else None)

    def rate(self, indicator, pattern=None, config=None):
        hits, n, _ = self.cell(indicator, pattern, config)
        return hits / n if n else 0.0

    def summary_rows(self):
        out = []
        for ind in INDICATORS:
            for p in self.patterns:
                for c in self.configs:
                    hits, n, lat = self.cell(ind, p, c)
                    out.append((ind, p, c, hits, n, round(lat, 3) if lat is not None else ""))
        return out

    def table(self):
        """Counts per rising pattern (rows) x indicator / config (columns)."""
        head = ["pattern"] + [f"{ind}:{c}" for ind in CHANGE_INDICATORS for c in self.configs]
        lines = ["  ".join(f"{h:>12}" for h in head)]
        for p in self.patterns:
            cells = [p] + [f"{self.cell(ind, p, c)[0]}/{self.cell(ind, p, c)[1]}"
                           for ind in CHANGE_INDICATORS for c in self.configs]
            lines.append("  ".join(f"{v:>12}" for v in cells))
        rates = ", ".join(f"{ind} {self.rate(ind):.3f}" for ind in INDICATORS)
        lines.append(f"overall: {rates}")
        return "\n".join(lines)


def run_indicator_comparison(sc, seeds=None, workers=None):
    if sc.kind != "indicator_compare":
        raise ConfigError(f"scenario kind is {sc.kind!r}, expected indicator_compare")
    validate(sc)
    seeds = list(seeds if seeds is not None else sc.seeds)
    workers = workers or sc["workers"]
    patterns, configs = sc["compare.patterns"], sc["compare.configs"]
    jobs = [(sc.raw, sc.source, p, c, seeds) for p in patterns for c in configs]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_cell_rows_star, jobs))
    else:
        parts = [_cell_rows(*j) for j in jobs]
    report = ComparisonReport(list(patterns), list(configs), seeds)
    for part in parts:
        report.rows.extend(part)
    return report


def _cell_rows_star(args):
    return _cell_rows(*args)


def check_comparison(report, sc):
    """(name, ok, detail) for the per-pattern dominance and overall rate."""
    out = []
    for p in report.patterns:
        cci = report.rate("rho_c", p)
        for base in ("F_c", "df_c/dt"):
            b = report.rate(base, p)
            out.append((f"rho_c >= {base} ({p})", cci >= b, f"{cci:.3f} vs {b:.3f}"))
    overall = report.rate("rho_c")
    out.append(("rho_c overall", overall >= sc["check.min_rate"],
                f"{overall:.3f} >= {sc['check.min_rate']}"))
    return out


# ---------------------------------------------------------------- single trace

def run_single_trace(sc, seed=None):
    if sc.kind != "single_trace":
        raise ConfigError(f"scenario kind is {sc.kind!r}, expected single_trace")
    validate(sc)
    seed = sc.seeds[0] if seed is None else seed
    clip, dlo = models_for(sc)
    return run_fixing_iteration(clip, dlo, mp_params(sc), sensor_for(sc, seed),
                                delta_z=sc["params.delta_z"], config=skill_config(sc))


def write_trace(result, path):
    return write_csv(path, TRACE_SCHEMA, TRACE_COLUMNS, result.trace)


def check_trace(results, sc):
    want = sc["check.sequence"]
    if want is None:
        return []
    want = [int(v) for v in want.replace(" ", "").split(",")]
    return [(f"seed {seed} sequence", res.seq == want, f"{res.seq.states} vs {want}")
            for seed, res in results]


# ---------------------------------------------------------------- board

def board_from(sc):
    cable = sc["board.cable"]
    fixtures = tuple(parse_fixture(f, cable, sc.section("clip")) for f in sc["board.fixtures"])
    dlo = make_dlo(cable)
    if sc.section("cable"):
        dlo = replace(dlo, **sc.section("cable"))
    return FixtureBoard(fixtures), dlo


@dataclass
class BoardRun:
    seed: int
    naive: object  # BoardReport
    adaptive: object  # BoardReport or None


def _board_seed(raw, source, seed):
    sc = Scenario(raw, source)
    board, dlo = board_from(sc)
    cfg = skill_config(sc)
    base = mp_params(sc)
    kw = dict(dlo=dlo, noise_sigma=sc["sensor.noise_sigma"], config=cfg, base=base)
    naive = run_board(board, 1, seed, adaptive=False,
                      naive=replace(base, x_h_z=sc["board.naive_x_h_z"],
                                    F_push=sc["board.naive_F_push"]), **kw)
    adaptive = None
    if sc["board.adaptive"]:
        ranges = ParamRanges(sc["ranges.z_lo"], sc["ranges.z_hi"],
                             sc["ranges.f_lo"], sc["ranges.f_hi"])
        adaptive = run_board(board, sc["board.max_iters"], seed, ranges=ranges, **kw)
    return BoardRun(seed, naive, adaptive)


def _board_seed_star(args):
    return _board_seed(*args)


def run_board_experiment(sc, seeds=None, workers=None):
    """Naive fixed-parameter pass plus (optionally) the adaptive controller, per seed."""
    if sc.kind != "board_run":
        raise ConfigError(f"scenario kind is {sc.kind!r}, expected board_run")
    validate(sc)
    seeds = list(seeds if seeds is not None else sc.seeds)
    workers = workers or sc["workers"]
    jobs = [(sc.raw, sc.source, s) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_board_seed_star, jobs))
    return [_board_seed(*j) for j in jobs]


def board_rows(runs):
    rows = []
    for run in runs:
        for mode, rep in (("naive", run.naive), ("adaptive", run.adaptive)):
            if rep is None:
                continue
            for r in rep.records:
                rows.append((run.seed, mode, r.fixture, r.iteration, r.x_h_z, r.F_push,
                             r.verdict, r.ticks, r.truth_success))
    return rows


def board_summary(runs):
    lines = []
    if runs:
        first = runs[0].naive
        lines.append("naive (seed %d): %s" % (runs[0].seed, ", ".join(
            f"{o.fixture} {o.verdicts[0]}" for o in first.outcomes)))
    adaptive = [r for r in runs if r.adaptive is not None]
    if adaptive:
        ok = sum(r.adaptive.all_resolved for r in adaptive)
        truly = sum(r.adaptive.all_truly_fixed for r in adaptive)
        iters = [o.iterations for r in adaptive for o in r.adaptive.outcomes]
        lines.append(f"adaptive: {ok}/{len(adaptive)} seeds resolved every fixture "
                     f"({truly} confirmed by ground truth); iterations per fixture "
                     f"median {float(np.median(iters)):g}, max {max(iters)}")
    return "\n".join(lines)


def check_board(runs, sc):
    out = []
    want = sc["check.naive_verdicts"]
    if want is not None:
        for run in runs:
            got = [o.verdicts[0] for o in run.naive.outcomes]
            out.append((f"seed {run.seed} naive verdicts", got == want, f"{got}"))
    adaptive = [r for r in runs if r.adaptive is not None]
    if adaptive:
        frac = sum(r.adaptive.all_resolved and r.adaptive.all_truly_fixed
                   for r in adaptive) / len(adaptive)
        out.append(("adaptive resolved fraction", frac >= sc["check.min_resolved"],
                    f"{frac:.3f} >= {sc['check.min_resolved']}"))
    return out


# ---------------------------------------------------------------- bench

class Pipeline:
    """Dynamics, sensor, smoothing and all four indicators, one call per tick.

    The push repeats an insertion cycle (contact level plus the rising
    profile, then a short hold); at each cycle start the cable is put back
    on the clip lip and the indicators are reset.
    """

    def __init__(self, clip, dlo, sensor, params, config, f_threshold=3.0):
        self.clip = clip
        self.sim = Simulator(clip, replace(dlo, x=clip.x_contact, v=0.0), sensor,
                             damping=config.damping)
        self.window = SmoothingWindow(config.window)
        self.cei = CeiEstimator(config.e_threshold)
        self.cci = CciEstimator(config.z, config.warmup_min)
        self.der = DerivativeBaseline(config.z, config.warmup_min)
        self.thr = ThresholdBaseline(f_threshold)
        self.hold = params.contact_push
        self.profile = insertion_profile(params, config)
        self.cycle = int(params.t_push) + 500
        self.k = 0
        self.events = 0

    def restart(self):
        self.sim.place(self.clip.x_contact)
        self.window.reset()
        self.cei.reset()
        self.cci.reset()
        self.der.reset()
        self.thr.reset()
        self.k = 0

    def tick(self):
        if self.k == self.cycle:
            self.restart()
        f = self.hold + eval_push(self.profile, float(self.k))
        fs = self.window.update(self.sim.step(f))
        ev = (self.cei.update(fs, f), self.cci.update(fs, f),
              self.der.update(fs), self.thr.update(fs))
        if ev != ("", "", "", ""):
            self.events += 1
        self.k += 1


@dataclass
class BenchReport:
    ticks: int
    p50_us: float
    p99_us: float
    max_us: float
    mean_us: float
    realtime_ticks: int
    realtime_seconds: float
    speedup: float
    alloc_ticks: int
    alloc_growth_bytes: int

    def rows(self):
        return [(k, v) for k, v in vars(self).items()]

    def text(self):
        return (f"{self.ticks} ticks: p50 {self.p50_us:.2f} us, p99 {self.p99_us:.2f} us, "
                f"max {self.max_us:.1f} us\n"
                f"{self.realtime_ticks} ticks ({self.realtime_ticks / 1000:g} s simulated) in "
                f"{self.realtime_seconds:.4f} s wall: {self.speedup:.0f}x real time\n"
                f"heap growth over {self.alloc_ticks} ticks: {self.alloc_growth_bytes} bytes")


def _pipeline(sc, seed):
    clip, dlo = models_for(sc)
    return Pipeline(clip, dlo, sensor_for(sc, seed), mp_params(sc), skill_config(sc),
                    sc["compare.f_threshold"])


def run_bench(sc, seed=None, ticks=None):
    if sc.kind != "bench":
        raise ConfigError(f"scenario kind is {sc.kind!r}, expected bench")
    validate(sc)
    seed = sc.seeds[0] if seed is None else seed
    n = ticks or sc["bench.ticks"]

    # wall time of a plain run from a fresh pipeline, no per-tick timers;
    # best of three, as timeit does
    rt_ticks = sc["bench.realtime_ticks"]
    rt_wall = math.inf
    for _ in range(3):
        tick = _pipeline(sc, seed).tick
        t0 = time.perf_counter()
        for _ in range(rt_ticks):
            tick()
        rt_wall = min(rt_wall, time.perf_counter() - t0)

    # per-tick latency distribution
    pipe = _pipeline(sc, seed)
    tick = pipe.tick
    for _ in range(sc["bench.warmup"]):
        tick()
    samples = array("q", bytes(8 * n))
    clock = time.perf_counter_ns
    for i in range(n):
        t0 = clock()
        tick()
        samples[i] = clock() - t0
    dur = np.frombuffer(samples, dtype=np.int64) / 1000.0

    # heap growth once warm: a per-tick allocation that is kept shows up here
    # (traced from the start so buffers replaced later are seen being freed)
    tracemalloc.start()
    try:
        pipe = _pipeline(sc, seed)
        tick = pipe.tick
        for _ in range(pipe.cycle + sc["bench.warmup"]):
            tick()
        before = tracemalloc.get_traced_memory()[0]
        for _ in range(sc["bench.alloc_ticks"]):
            tick()
        growth = tracemalloc.get_traced_memory()[0] - before
    finally:
        tracemalloc.stop()

    return BenchReport(
        ticks=n,
        p50_us=float(np.percentile(dur, 50)),
        p99_us=float(np.percentile(dur, 99)),
        max_us=float(dur.max()),
        mean_us=float(dur.mean()),
        realtime_ticks=rt_ticks,
        realtime_seconds=rt_wall,
        speedup=(rt_ticks * 1e-3) / rt_wall if rt_wall > 0 else math.inf,
        alloc_ticks=sc["bench.alloc_ticks"],
        alloc_growth_bytes=int(growth),
    )


def check_bench(rep, sc):
    return [
        ("p99 per tick", rep.p99_us < sc["check.p99_ms"] * 1000.0,
         f"{rep.p99_us:.2f} us < {sc['check.p99_ms'] * 1000:g} us"),
        ("speedup over real time", rep.speedup >= sc["check.min_speedup"],
         f"{rep.speedup:.0f}x >= {sc['check.min_speedup']:g}x"),
        ("heap growth", rep.alloc_growth_bytes <= sc["check.max_alloc_bytes"],
         f"{rep.alloc_growth_bytes} <= {sc['check.max_alloc_bytes']} bytes"),
    ]
