"""Finite-state trellis of a binary-input linear ISI channel.

Bits map to symbols as 0 -> +1 and 1 -> -1.  A state holds the last ``nu``
input bits, oldest bit in the most significant position, so state 0 is the
all-(+1) history and the next state after input bit ``b`` is
``((s << 1) | b) & mask``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

MAX_MEMORY = 16
LEVEL_TOL = 1e-6

PRESETS = {
    "CH-I": (0.7071, -0.7071),
    "CH-II": (0.408, 0.816, 0.408),
    "CH-III": (0.227, 0.46, 0.688, 0.46, 0.227),
}


class ChannelError(ValueError):
    pass


@dataclass(frozen=True)
class ChannelModel:
    taps: tuple[float, ...]
    name: str | None = None

    def __post_init__(self):
        if len(self.taps) == 0:
            raise ChannelError("channel needs at least one tap")
        object.__setattr__(self, "taps", tuple(float(t) for t in self.taps))

    @property
    def memory(self) -> int:
        return len(self.taps) - 1

    @property
    def energy(self) -> float:
        return float(sum(t * t for t in self.taps))

    @property
    def label(self) -> str:
        return self.name or "[" + ",".join(f"{t:g}" for t in self.taps) + "]"

    @classmethod
    def preset(cls, name: str) -> "ChannelModel":
        key = name.upper()
        if key not in PRESETS:
            raise ChannelError(f"unknown channel preset {name!r}; known: {sorted(PRESETS)}")
        return cls(PRESETS[key], key)

    @classmethod
    def parse(cls, spec: str) -> "ChannelModel":
        """Preset name or a comma-separated tap list such as ``"1,-1"``."""
        spec = spec.strip()
        if spec.upper() in PRESETS:
            return cls.preset(spec)
        try:
            taps = tuple(float(t) for t in spec.split(",") if t.strip())
        except ValueError as exc:
            raise ChannelError(f"cannot parse taps {spec!r}") from exc
        return cls(taps)


def bit_to_symbol(b: int) -> int:
    return 1 - 2 * b


@dataclass(frozen=True)
class Trellis:
    """Shift-register trellis with ``2**nu`` states and two branches per state.

    ``next_state[s, b]``, ``level[s, b]`` (index into ``levels``) and
    ``output[s, b]`` describe the branch leaving ``s`` with input bit ``b``.
    """

    channel: ChannelModel
    next_state: np.ndarray
    output: np.ndarray
    level: np.ndarray
    levels: np.ndarray
    exact_levels: tuple[Fraction, ...] = field(repr=False)

    @property
    def memory(self) -> int:
        return self.channel.memory

    @property
    def num_states(self) -> int:
        return self.next_state.shape[0]

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    def prev_state(self, s: int, oldest_bit: int) -> int:
        """State preceding ``s`` whose dropped (oldest) bit is ``oldest_bit``."""
        nu = self.memory
        if nu == 0:
            return 0
        return (oldest_bit << (nu - 1)) | (s >> 1)

    def last_bit(self, s: int) -> int:
        return s & 1

    def symbols(self, s: int) -> list[int]:
        """Past symbols ``[x_{t-1}, ..., x_{t-nu}]`` held in state ``s``."""
        return [bit_to_symbol((s >> k) & 1) for k in range(self.memory)]


def build_trellis(channel: ChannelModel) -> Trellis:
    nu = channel.memory
    if nu > MAX_MEMORY:
        raise ChannelError(f"channel memory {nu} exceeds the {MAX_MEMORY} limit")
    n_states = 1 << nu
    mask = n_states - 1
    # decimal taps kept exact so level coincidences are decided without rounding noise
    exact_taps = [Fraction(repr(t)) for t in channel.taps]

    nxt = np.zeros((n_states, 2), dtype=np.int64)
    exact = [[Fraction(0)] * 2 for _ in range(n_states)]
    for s in range(n_states):
        past = [bit_to_symbol((s >> k) & 1) for k in range(nu)]
        for b in (0, 1):
            x = bit_to_symbol(b)
            z = exact_taps[0] * x + sum(h * p for h, p in zip(exact_taps[1:], past))
            exact[s][b] = z
            nxt[s, b] = ((s << 1) | b) & mask

    distinct = sorted({z for row in exact for z in row})
    merged: list[Fraction] = []
    for z in distinct:
        if merged and float(z - merged[-1]) <= LEVEL_TOL:
            continue
        merged.append(z)
    merged_f = np.array([float(z) for z in merged])

    out = np.array([[float(z) for z in row] for row in exact])
    lvl = np.abs(out[..., None] - merged_f[None, None, :]).argmin(axis=-1)
    return Trellis(channel, nxt, out, lvl, merged_f, tuple(merged))


@dataclass(frozen=True)
class OutputAlphabet:
    levels: np.ndarray
    counts: np.ndarray
    probs: np.ndarray
    entropy: float


def output_alphabet(trellis: Trellis) -> OutputAlphabet:
    """Distinct filter outputs and their probabilities under i.u.d. inputs."""
    counts = np.bincount(trellis.level.ravel(), minlength=trellis.num_levels)
    probs = counts / counts.sum()
    nz = probs[probs > 0]
    return OutputAlphabet(trellis.levels.copy(), counts, probs, float(-(nz * np.log2(nz)).sum()))
