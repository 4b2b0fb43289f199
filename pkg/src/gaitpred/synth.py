"""Deterministic synthetic gait generator.

Produces trials with the same shape as the real corpus: six pressure
channels at 125 Hz, stance bumps ordered heel to forefoot, near-zero swing
phase. Every draw comes from the splitmix64 stream, so identical
(profile, duration, seed) yields byte-identical CSV output.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .data import N_CHANNELS, Trial
from .rng import SplitMix64, derive_seed

# Channel order follows the CSV layout fsr8..fsr13: the first three are
# forefoot analogs (peak late in stance), the last three heel analogs
# (peak early), mirroring heel-to-toe weight transfer.
_DEFAULT_AMPLITUDES = (0.9, 1.0, 0.8, 1.2, 1.1, 1.0)
_DEFAULT_PHASES = (0.34, 0.40, 0.46, 0.10, 0.15, 0.20)
_DEFAULT_WIDTHS = (0.17, 0.17, 0.17, 0.17, 0.17, 0.17)


@dataclass
class GaitProfile:
    """Shape parameters for one walker's pressure signature."""

    cadence_hz: float = 1.0
    stance_fraction: float = 0.6
    amplitudes: tuple = _DEFAULT_AMPLITUDES
    phase_offsets: tuple = _DEFAULT_PHASES
    bump_widths: tuple = _DEFAULT_WIDTHS
    noise_std: float = 0.01
    cadence_jitter: float = 0.02
    sample_rate_hz: float = 125.0

    def __post_init__(self):
        if not (0.0 < self.stance_fraction < 1.0):
            raise ValueError("stance_fraction must be in (0, 1)")
        if self.sample_rate_hz <= 0:
            raise ValueError("sample_rate_hz must be positive")
        if self.cadence_hz <= 0:
            raise ValueError("cadence_hz must be positive")
        if self.noise_std < 0 or self.cadence_jitter < 0:
            raise ValueError("noise_std and cadence_jitter must be >= 0")
        for name in ("amplitudes", "phase_offsets", "bump_widths"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != N_CHANNELS:
                raise ValueError(f"{name} must have {N_CHANNELS} entries")
            setattr(self, name, vals)
        if any(a < 0 for a in self.amplitudes):
            raise ValueError("amplitudes must be >= 0")


def _cycle_pressure(profile: GaitProfile, cycle_len: int) -> np.ndarray:
    """Noise-free pressure for one gait cycle: a raised-cosine bump per
    channel, centered at that channel's phase offset."""
    d = np.arange(cycle_len, dtype=np.float64)[:, None]
    centers = np.array(profile.phase_offsets) * cycle_len
    half_widths = np.maximum(np.array(profile.bump_widths) * cycle_len, 1.0)
    amps = np.array(profile.amplitudes)
    rel = (d - centers) / half_widths
    bump = np.where(np.abs(rel) <= 1.0, 0.5 * (1.0 + np.cos(np.pi * rel)), 0.0)
    return bump * amps


def generate_trial(profile: GaitProfile, duration_s: float, seed: int,
                   participant_id: str = "synth",
                   trial_id: str = "t0") -> Trial:
    """Generate one trial of round(duration_s * sample_rate) steps.

    Cycle lengths are jittered around sample_rate / cadence; with zero
    jitter and zero noise the output is exactly periodic.
    """
    base_len = profile.sample_rate_hz / profile.cadence_hz
    if duration_s * profile.sample_rate_hz < base_len:
        raise ValueError("duration must cover at least one full gait cycle")
    n_steps = round(duration_s * profile.sample_rate_hz)

    cycle_rng = SplitMix64(derive_seed(seed, "cycles"))
    values = np.zeros((n_steps, N_CHANNELS))
    pos = 0
    while pos < n_steps:
        jit = float(cycle_rng.normal(1)[0]) if profile.cadence_jitter > 0 else 0.0
        cycle_len = max(2, round(base_len * (1.0 + profile.cadence_jitter * jit)))
        chunk = _cycle_pressure(profile, cycle_len)[: n_steps - pos]
        values[pos:pos + len(chunk)] = chunk
        pos += cycle_len

    if profile.noise_std > 0:
        noise_rng = SplitMix64(derive_seed(seed, "noise"))
        noise = noise_rng.normal(n_steps * N_CHANNELS).reshape(n_steps, N_CHANNELS)
        values += profile.noise_std * noise
    np.maximum(values, 0.0, out=values)

    return Trial(
        participant_id=participant_id,
        trial_id=trial_id,
        values=values,
        sample_period_ms=1000.0 / profile.sample_rate_hz,
    )


def generate_participant(profile: GaitProfile, n_trials: int, base_seed: int,
                         duration_s: float = 10.0,
                         participant_id: str = "synth") -> list:
    """Generate n_trials (3..12) sharing one walking signature.

    Per-trial cadence and duration are jittered by cadence_jitter so trial
    lengths differ, the way repeated walks of a fixed distance would.
    """
    if not (3 <= n_trials <= 12):
        raise ValueError("n_trials must be in [3, 12]")
    rng = SplitMix64(derive_seed(base_seed, "trial-jitter"))
    jits = rng.normal(2 * n_trials)
    trials = []
    for i in range(n_trials):
        cadence = profile.cadence_hz * (1.0 + profile.cadence_jitter * float(jits[2 * i]))
        duration = duration_s * (1.0 + profile.cadence_jitter * float(jits[2 * i + 1]))
        duration = max(duration, 2.0 * profile.sample_rate_hz / cadence / profile.sample_rate_hz)
        trial_profile = replace(profile, cadence_hz=cadence)
        trials.append(
            generate_trial(
                trial_profile,
                duration,
                derive_seed(base_seed, "trial", i),
                participant_id=participant_id,
                trial_id=f"t{i:02d}",
            )
        )
    return trials


def sample_profile(base: GaitProfile, seed: int) -> GaitProfile:
    """Jitter a base profile into a participant-specific one (cadence,
    amplitudes, phases, widths), keeping the overall gait structure."""
    rng = SplitMix64(derive_seed(seed, "profile"))
    cadence = base.cadence_hz * float(rng.uniform_range(0.85, 1.15, 1)[0])
    amps = tuple(
        a * float(u) for a, u in zip(base.amplitudes, rng.uniform_range(0.7, 1.3, N_CHANNELS))
    )
    phases = tuple(
        max(0.02, p + float(u))
        for p, u in zip(base.phase_offsets, rng.uniform_range(-0.02, 0.02, N_CHANNELS))
    )
    widths = tuple(
        w * float(u) for w, u in zip(base.bump_widths, rng.uniform_range(0.9, 1.1, N_CHANNELS))
    )
    return replace(
        base,
        cadence_hz=cadence,
        amplitudes=amps,
        phase_offsets=phases,
        bump_widths=widths,
    )


# key=value serialization used by the CLI's --profile files

_PROFILE_SCALARS = (
    "cadence_hz", "stance_fraction", "noise_std", "cadence_jitter", "sample_rate_hz",
)
_PROFILE_VECTORS = ("amplitudes", "phase_offsets", "bump_widths")


def profile_to_config(profile: GaitProfile) -> str:
    lines = [f"{k}={getattr(profile, k)!r}" for k in _PROFILE_SCALARS]
    for k in _PROFILE_VECTORS:
        lines.append(f"{k}={','.join(repr(v) for v in getattr(profile, k))}")
    return "\n".join(lines) + "\n"


def profile_from_config(text: str) -> GaitProfile:
    kwargs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ValueError(f"bad profile line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        if key in _PROFILE_SCALARS:
            kwargs[key] = float(value)
        elif key in _PROFILE_VECTORS:
            kwargs[key] = tuple(float(v) for v in value.split(","))
        else:
            raise ValueError(f"unknown profile key {key!r} at line {lineno}")
    return GaitProfile(**kwargs)
