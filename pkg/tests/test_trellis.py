import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isi_scldpc.trellis import (
    MAX_MEMORY,
    PRESETS,
    ChannelError,
    ChannelModel,
    build_trellis,
    output_alphabet,
)


def brute_outputs(taps):
    """Filter outputs for every (state, bit) pair, by direct convolution."""
    nu = len(taps) - 1
    out = {}
    for s in range(2 ** nu):
        past = [1 - 2 * ((s >> k) & 1) for k in range(nu)]  # newest bit first
        for b in (0, 1):
            out[s, b] = taps[0] * (1 - 2 * b) + sum(h * p for h, p in zip(taps[1:], past))
    return out


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_branch_outputs_match_convolution(name):
    ch = ChannelModel.preset(name)
    tr = build_trellis(ch)
    ref = brute_outputs(ch.taps)
    for (s, b), z in ref.items():
        assert tr.output[s, b] == pytest.approx(z, abs=1e-12)


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_next_state_shifts_in_new_bit(name):
    tr = build_trellis(ChannelModel.preset(name))
    nu = ChannelModel.preset(name).memory
    for s, b in itertools.product(range(2 ** nu), (0, 1)):
        assert tr.next_state[s, b] == ((s << 1) | b) & (2 ** nu - 1)


@pytest.mark.parametrize("name, levels, entropy", [
    ("CH-I", 3, 1.5),
    ("CH-II", 5, 2.25),
    ("CH-III", 18, 4.0),
])
def test_output_alphabet(name, levels, entropy):
    alph = output_alphabet(build_trellis(ChannelModel.preset(name)))
    assert len(alph.levels) == levels
    assert alph.probs.sum() == pytest.approx(1.0)
    assert alph.entropy == pytest.approx(entropy, abs=1e-9)


def test_parse_accepts_presets_and_tap_lists():
    assert ChannelModel.parse("ch-ii").taps == PRESETS["CH-II"]
    assert ChannelModel.parse("1, -1").taps == (1.0, -1.0)
    with pytest.raises(ChannelError):
        ChannelModel.parse("CH-IV")
    with pytest.raises(ChannelError):
        ChannelModel.parse("")


def test_memory_limit():
    with pytest.raises(ChannelError):
        build_trellis(ChannelModel((1.0,) * (MAX_MEMORY + 2)))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-3, 3), min_size=1, max_size=4))
def test_alphabet_entropy_bounded(taps):
    """0 <= H(Z) <= nu + 1 bits, with the level probabilities summing to one."""
    ch = ChannelModel(tuple(float(t) for t in taps))
    alph = output_alphabet(build_trellis(ch))
    assert alph.probs.sum() == pytest.approx(1.0)
    assert -1e-12 <= alph.entropy <= ch.memory + 1 + 1e-12
    assert np.all(np.diff(alph.levels) > 0)
