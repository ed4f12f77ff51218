import pytest

from isi_scldpc.metric_chain import transfer_function
from isi_scldpc.oracle import KNOWN, UNKNOWN, sequence_oracle
from isi_scldpc.trellis import ChannelModel

CH1 = ChannelModel.preset("CH-I")
CH2 = ChannelModel.preset("CH-II")


@pytest.mark.parametrize("d, e", [(1.0, 0.5), (0.5, 0.5), (0.8, 0.4)])
def test_exhaustive_interior_matches_chain(d, e):
    got = sequence_oracle(CH1, d, e, 10).rate
    assert got == pytest.approx(transfer_function(CH1, d, e), abs=1e-3)


@pytest.mark.parametrize("d, e", [(1.0, 0.6), (0.3, 0.7)])
def test_boundary_knowledge_brackets_steady_state(d, e):
    """Known ends can only help the detector, unknown ends only hurt."""
    g = transfer_function(CH2, d, e)
    lower = sequence_oracle(CH2, d, e, 8, start=KNOWN, end=KNOWN).rate
    upper = sequence_oracle(CH2, d, e, 8, start=UNKNOWN, end=UNKNOWN).rate
    assert lower <= g + 1e-12
    assert g <= upper + 1e-12


def test_exhaustive_degenerate_cases():
    assert sequence_oracle(CH1, 0.4, 0.0, 6).rate == 0.0
    assert sequence_oracle(CH1, 1.0, 1.0, 6).rate == pytest.approx(1.0)


def test_montecarlo_agrees_with_chain():
    res = sequence_oracle(CH2, 0.7, 0.6, 2000, "montecarlo", blocks=100, seed=3)
    g = transfer_function(CH2, 0.7, 0.6)
    assert abs(res.rate - g) < 4 * res.stderr


def test_exhaustive_size_limit():
    with pytest.raises(ValueError):
        sequence_oracle(CH1, 0.5, 0.5, 10_000)
