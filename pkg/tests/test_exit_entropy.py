import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isi_scldpc.erasure_de import EnsembleConfig, bp_threshold
from isi_scldpc.exit_entropy import (
    binary_entropy,
    entropy_at_threshold,
    entropy_rate_HY,
    gexit_curve,
    map_threshold_bound,
    output_entropy,
    sir,
    sir_curve,
    sir_threshold,
    write_curves_csv,
)
from isi_scldpc.trellis import ChannelModel, build_trellis

MEMORYLESS = ChannelModel((1.0,))
CH1, CH2, CH3 = (ChannelModel.preset(n) for n in ("CH-I", "CH-II", "CH-III"))


def simulated_sir(channel, eps, n=60_000, seed=0):
    """-1/n log2 P(y^n) - h_b(eps) from an exact forward filter over trellis states."""
    tr = build_trellis(channel)
    rng = np.random.default_rng(seed)
    S = tr.next_state.shape[0]
    bits = rng.integers(0, 2, n)
    seen = rng.random(n) >= eps
    s, alpha, total = 0, np.full(S, 1.0 / S), 0.0
    for t in range(n):
        lvl = tr.level[s, bits[t]]
        new = np.zeros(S)
        if seen[t]:
            mass = 0.0
            for b in (0, 1):
                hit = tr.level[:, b] == lvl
                np.add.at(new, tr.next_state[hit, b], 0.5 * alpha[hit])
            mass = new.sum()
            total -= math.log2((1 - eps) * mass)
        else:
            for b in (0, 1):
                np.add.at(new, tr.next_state[:, b], 0.5 * alpha)
            total -= math.log2(eps)
        alpha = new / new.sum()
        s = tr.next_state[s, bits[t]]
    return total / n - binary_entropy(eps)


def test_binary_entropy():
    assert binary_entropy(0.5) == 1.0
    assert binary_entropy(0.0) == binary_entropy(1.0) == 0.0
    assert binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-4)


@pytest.mark.parametrize("channel, h", [(CH1, 1.5), (CH2, 2.25), (CH3, 4.0)])
def test_output_entropy(channel, h):
    assert output_entropy(channel) == pytest.approx(h, abs=1e-12)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0))
def test_memoryless_sir_is_erasure_capacity(e):
    assert sir(MEMORYLESS, e) == pytest.approx(1 - e, abs=1e-12)


@pytest.mark.parametrize("channel, eps", [(CH1, 0.6), (CH2, 0.75), (CH3, 0.85)])
def test_sir_matches_simulated_entropy_rate(channel, eps):
    assert sir(channel, eps) == pytest.approx(simulated_sir(channel, eps), abs=0.01)


@pytest.mark.parametrize("channel", [CH1, CH2, CH3])
def test_sir_limits_and_monotonicity(channel):
    vals = sir_curve(channel, np.linspace(0, 1, 21)).SIR
    assert vals[0] == pytest.approx(1.0)
    assert vals[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(vals) <= 1e-12)


def test_entropy_rate_decomposition():
    for e in (0.2, 0.6):
        assert entropy_rate_HY(CH2, e) == pytest.approx(binary_entropy(e) + sir(CH2, e))


def test_sir_threshold_memoryless():
    assert sir_threshold(MEMORYLESS, 0.5) == pytest.approx(0.5, abs=1e-5)
    with pytest.raises(ValueError):
        sir_threshold(CH1, 1.0)


def test_map_bound_memoryless_matches_bec():
    # (3,6) on the BEC: MAP threshold 0.48815
    assert map_threshold_bound(EnsembleConfig(3, 6), MEMORYLESS) == pytest.approx(0.48815, abs=2e-4)


@pytest.mark.parametrize("channel", [CH1, CH2])
def test_threshold_ordering(channel):
    ens = EnsembleConfig(3, 6)
    bp = bp_threshold(ens, channel, 1e-4).value
    mp = map_threshold_bound(ens, channel)
    sr = sir_threshold(channel, ens.rate)
    assert bp <= mp <= sr


def test_gexit_curve_shape(tmp_path):
    ens = EnsembleConfig(3, 6)
    c = gexit_curve(ens, CH1, step=5e-3)
    assert c.eps[0] == 1.0 and np.all(np.diff(c.eps) < 0)
    assert np.all(c.G >= 0)
    assert c.delta[-1] == 0.0
    area = c.area_from()
    assert np.all(np.diff(area) >= 0)
    assert area[-1] > ens.rate
    path = tmp_path / "curves.csv"
    write_curves_csv(path, c, sir_curve(CH1, c.eps[:5]))
    rows = list(csv.DictReader(path.open()))
    assert set(rows[0]) == {"eps", "delta", "G", "HY", "SIR"}
    assert len(rows) == len(c.eps)


def test_gexit_rejects_coupled():
    with pytest.raises(ValueError):
        gexit_curve(EnsembleConfig(3, 6, 1, 10), CH1)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.0, 1.0))
def test_entropy_at_threshold_identity(e):
    p = entropy_at_threshold(CH2, e)
    assert p.h == pytest.approx(e * 2.25)
    assert p.normalized == pytest.approx(e)
