"""Clip and cable presets.

Nothing here is a measured property of a real clip or cable.  A clip
preset fixes contact angle, friction and opening width; a cable preset
fixes diameter and masses.  The clip's peak deformation is the
interference between cable diameter and clip opening.
"""
from dataclasses import replace

from .contact_model import ClipModel, DloState

# opening (m) plus ClipModel overrides
CLIPS = {
    # fixture poses for the rising-pattern comparison
    "P1": dict(opening=3.0e-3, psi=1.2, mu=0.3),
    "P2": dict(opening=3.0e-3, psi=0.9, mu=0.2),
    "P3": dict(opening=3.0e-3, psi=1.45, mu=0.45),
    # clip types
    "C1": dict(opening=3.8e-3, psi=1.2, mu=0.3),
    "C2": dict(opening=3.6e-3, psi=1.1, mu=0.25),
    "C3": dict(opening=3.0e-3, psi=1.25, mu=0.3),
    "U1": dict(opening=4.595e-3, psi=1.3, mu=0.2),
}

CABLES = {
    "L": dict(diameter=9.0e-3, m=0.6, m_e=0.12),
    "M": dict(diameter=7.0e-3, m=0.5, m_e=0.1),
    "S": dict(diameter=4.6e-3, m=0.4, m_e=0.08),
}

DEFAULT_CABLE = "M"
MIN_INTERFERENCE = 1e-6


def make_clip(clip_name, cable_name=DEFAULT_CABLE, **overrides):
    spec = dict(CLIPS[clip_name])
    cable = CABLES[cable_name]
    opening = spec.pop("opening")
    h_max = max(cable["diameter"] - opening, MIN_INTERFERENCE)
    clip = ClipModel(h_max=h_max, **spec)
    return replace(clip, **overrides) if overrides else clip


def make_dlo(cable_name=DEFAULT_CABLE):
    c = CABLES[cable_name]
    return DloState(m=c["m"], m_e=c["m_e"])


def parse_config(name):
    """'P1' or 'C1/S' -> (clip preset, cable preset)."""
    clip, _, cable = name.partition("/")
    cable = cable or DEFAULT_CABLE
    if clip not in CLIPS:
        raise KeyError(f"unknown clip preset {clip!r}")
    if cable not in CABLES:
        raise KeyError(f"unknown cable preset {cable!r}")
    return clip, cable


def make_config(name, **clip_overrides):
    clip, cable = parse_config(name)
    return make_clip(clip, cable, **clip_overrides), make_dlo(cable)
