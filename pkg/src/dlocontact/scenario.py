"""Scenario files: flat ``key = value`` lines typed by a fixed schema.

    # comment
    include = presets/cable_L.scn     (relative to this file)
    include = builtin:rising_patterns          (shipped with the package)
    kind = indicator_compare
    compare.patterns = linear, log, exp
    seeds = 0..29

Later assignments override earlier ones, includes are expanded in place,
and any key outside the schema is an error.
"""
import hashlib
from importlib import resources
from pathlib import Path


class ConfigError(ValueError):
    pass


KINDS = ("indicator_compare", "single_trace", "board_run", "bench")


def parse_seeds(text):
    """'30' -> 0..29, '3,5,9' -> [3, 5, 9], '10..19' -> 10..19, '7,' -> [7]."""
    text = str(text).strip()
    out = []
    try:
        if "," not in text and ".." not in text:
            n = int(text)
            if n < 1:
                raise ConfigError(f"seed count must be >= 1, got {n}")
            return list(range(n))
        for part in text.split(","):
            part = part.strip()
            if not part:
                continue
            if ".." in part:
                lo, hi = part.split("..")
                out.extend(range(int(lo), int(hi) + 1))
            else:
                out.append(int(part))
    except ValueError:
        raise ConfigError(f"bad seed list {text!r}") from None
    if not out:
        raise ConfigError("empty seed list")
    return out


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(text)


def _strlist(text):
    return [p.strip() for p in text.split(",") if p.strip()]


def _floatlist(text):
    return [float(p) for p in _strlist(text)]


_PARSERS = {
    "str": str.strip,
    "int": int,
    "float": float,
    "bool": _bool,
    "list[str]": _strlist,
    "list[float]": _floatlist,
    "seeds": parse_seeds,
}

# key -> (type, default); default None means "take it from the preset"
SCHEMA = {
    "kind": ("str", None),
    "seeds": ("seeds", "1"),
    "workers": ("int", 1),

    "config": ("str", "P1"),
    "clip.k_clip": ("float", None),
    "clip.h_max": ("float", None),
    "clip.x_contact": ("float", None),
    "clip.x_in": ("float", None),
    "clip.x_rear": ("float", None),
    "clip.mu": ("float", None),
    "clip.psi": ("float", None),
    "clip.k_rear": ("float", None),
    "clip.z_lo": ("float", None),
    "clip.z_hi": ("float", None),
    "clip.k_base": ("float", None),
    "cable.m": ("float", None),
    "cable.m_e": ("float", None),

    "sensor.noise_sigma": ("float", 0.05),
    "sensor.bias": ("float", 0.0),

    "push.shape": ("str", "linear"),
    "push.t_push": ("float", 3000.0),
    "push.F_push": ("float", 20.0),
    "push.contact_push": ("float", 6.0),
    "push.beta": ("float", 0.01),
    "push.gamma": ("float", 0.001),

    "params.x_h_z": ("float", 0.0),
    "params.delta_z": ("float", 0.0),
    "params.removal_delay": ("float", 0.0),

    "skill.window": ("int", 50),
    "skill.z": ("float", 2.807),
    "skill.e_threshold": ("float", 0.75),
    "skill.warmup_min": ("int", 100),
    "skill.v_eps": ("float", 1e-3),
    "skill.damping": ("float", 60.0),
    "skill.stretch_force": ("float", 15.0),
    "skill.contact_max_time": ("float", 2000.0),
    "skill.pause_max_time": ("float", 1000.0),
    "skill.fixed_ticks": ("int", 100),

    "compare.patterns": ("list[str]", "linear, log, exp"),
    "compare.configs": ("list[str]", "P1, P2, P3"),
    "compare.f_threshold": ("float", 3.0),
    "compare.hold": ("float", 6.0),
    "compare.tol_early": ("int", 10),
    "compare.tol_late": ("int", 100),
    "compare.post_ticks": ("int", 300),

    "board.fixtures": ("list[str]", "U1@-10, C1@3, C3@5, C3@0"),
    "board.cable": ("str", "L"),
    "board.max_iters": ("int", 15),
    "board.adaptive": ("bool", "true"),
    "board.naive_x_h_z": ("float", 0.0),
    "board.naive_F_push": ("float", 20.0),
    "ranges.z_lo": ("float", -0.015),
    "ranges.z_hi": ("float", 0.015),
    "ranges.f_lo": ("float", 12.0),
    "ranges.f_hi": ("float", 28.0),

    "bench.ticks": ("int", 1_000_000),
    "bench.warmup": ("int", 10_000),
    "bench.realtime_ticks": ("int", 10_000),
    "bench.alloc_ticks": ("int", 20_000),

    # used by --check
    "check.min_rate": ("float", 0.9),
    "check.sequence": ("str", None),
    "check.naive_verdicts": ("list[str]", None),
    "check.min_resolved": ("float", 0.95),
    "check.p99_ms": ("float", 1.0),
    "check.min_speedup": ("float", 100.0),
    "check.max_alloc_bytes": ("int", 65536),
}


def _coerce(key, raw):
    kind, _ = SCHEMA[key]
    try:
        return _PARSERS[kind](raw)
    except ConfigError:
        raise
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected {kind}, got {raw!r}") from None


def _read_lines(text, origin, base_dir, out, stack):
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key:
            raise ConfigError(f"{origin}:{lineno}: expected 'key = value'")
        if key == "include":
            _include(value, base_dir, out, stack, f"{origin}:{lineno}")
            continue
        if key not in SCHEMA:
            raise ConfigError(f"{origin}:{lineno}: unknown key {key!r}")
        out[key] = value


def builtin_dir():
    return Path(str(resources.files("dlocontact").joinpath("scenarios")))


def _include(ref, base_dir, out, stack, where):
    if ref.startswith("builtin:"):
        path = builtin_dir() / (ref[len("builtin:"):] + ".scn")
        if not path.is_file():
            raise ConfigError(f"{where}: no builtin scenario {ref!r}")
    else:
        path = Path(ref)
        if not path.is_absolute():
            if base_dir is None:
                raise ConfigError(f"{where}: relative include {ref!r} without a base directory")
            path = Path(base_dir) / path
        if not path.is_file():
            raise ConfigError(f"{where}: include not found: {path}")
    ident = str(path.resolve())
    if ident in stack:
        raise ConfigError(f"{where}: include cycle through {ref!r}")
    _read_lines(path.read_text(), ref, path.parent, out, stack + (ident,))


class Scenario:
    """Resolved scenario: every schema key has a typed value."""

    def __init__(self, raw, source="<text>"):
        self.source = source
        self.raw = dict(raw)
        self.values = {}
        for key, (_, default) in SCHEMA.items():
            if key in raw:
                self.values[key] = _coerce(key, raw[key])
            elif default is None:
                self.values[key] = None
            else:
                self.values[key] = _coerce(key, default) if isinstance(default, str) else default
        kind = self.values["kind"]
        if kind is None:
            raise ConfigError("scenario has no 'kind'")
        if kind not in KINDS:
            raise ConfigError(f"unknown kind {kind!r}; expected one of {', '.join(KINDS)}")

    @classmethod
    def from_text(cls, text, base_dir=None, source="<text>"):
        raw = {}
        _read_lines(text, source, base_dir, raw, ())
        return cls(raw, source)

    @classmethod
    def from_file(cls, path):
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"scenario file not found: {path}")
        return cls.from_text(path.read_text(), path.parent, str(path))

    @classmethod
    def builtin(cls, name):
        return cls.from_text(f"include = builtin:{name}\n", source=f"builtin:{name}")

    def __getitem__(self, key):
        return self.values[key]

    @property
    def kind(self):
        return self.values["kind"]

    @property
    def seeds(self):
        return self.values["seeds"]

    def section(self, prefix):
        """{'k_clip': 2500.0, ...} for keys 'prefix.*' that are set."""
        p = prefix + "."
        return {k[len(p):]: v for k, v in self.values.items()
                if k.startswith(p) and v is not None}

    def with_overrides(self, **items):
        raw = dict(self.raw)
        for key, value in items.items():
            key = key.replace("__", ".")
            if key not in SCHEMA:
                raise ConfigError(f"unknown key {key!r}")
            raw[key] = value if isinstance(value, str) else _format(value)
        return Scenario(raw, self.source)

    def canonical(self):
        return "\n".join(f"{k} = {self.raw[k]}" for k in sorted(self.raw)) + "\n"

    def digest(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()


def _format(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)
