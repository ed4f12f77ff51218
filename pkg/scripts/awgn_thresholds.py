"""AWGN thresholds of the (3,6) ensemble: BP, coupled, MAP bound and SIR limit.

Each BP threshold is a bisection over quantized DE runs (a few seconds per
run on CH-I, longer on CH-III); the MAP bound needs a full GEXIT sweep.
Results go to stdout as JSON lines so a partial run is still usable.
"""
import argparse
import json
import logging
import time

from isi_scldpc.awgn.de import Inconclusive
from isi_scldpc.awgn.entropy import awgn_gexit_h, awgn_sir_threshold
from isi_scldpc.awgn.noise import sigma_from_gamma
from isi_scldpc.exit_entropy import output_entropy
from isi_scldpc.tables import TABLE_IV, TABLE_V, awgn_map, awgn_threshold
from isi_scldpc.trellis import ChannelModel

QUANTITIES = ("bp", "map", "sir", "m1", "h")


def compute(channel: str, quantity: str) -> dict:
    ch = ChannelModel.preset(channel)
    if quantity == "bp":
        return dict(value=awgn_threshold((3, 6), channel, 0), published=TABLE_IV[channel]["awgn"]["gamma_bp"])
    if quantity == "map":
        return dict(value=awgn_map((3, 6), channel), published=TABLE_IV[channel]["awgn"]["gamma_map"])
    if quantity == "sir":
        return dict(value=awgn_sir_threshold(ch, 0.5), published=TABLE_IV[channel]["awgn"]["gamma_sir"])
    if quantity == "m1":
        return dict(value=awgn_threshold((3, 6), channel, 1), published=TABLE_V[(3, 6), channel]["awgn"]["gamma1"])
    if quantity == "h":
        # entropy at the published gamma_MAP, to compare with the published h_MAP row
        pub = TABLE_IV[channel]["awgn"]
        h = awgn_gexit_h(ch, sigma_from_gamma(pub["gamma_map"], 0.5))
        return dict(value=h, published=pub["h_map"], normalized=h / output_entropy(ch))
    raise ValueError(quantity)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--channel", action="append", choices=("CH-I", "CH-II", "CH-III"))
    ap.add_argument("--quantity", action="append", choices=QUANTITIES)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.WARNING)
    for channel in args.channel or ("CH-I", "CH-II", "CH-III"):
        for q in args.quantity or QUANTITIES:
            t0 = time.perf_counter()
            try:
                rec = compute(channel, q)
            except Inconclusive as exc:
                rec = dict(error=str(exc), bracket=exc.bracket)
            rec.update(channel=channel, quantity=q, seconds=round(time.perf_counter() - t0, 1))
            print(json.dumps(rec), flush=True)


if __name__ == "__main__":
    main()
