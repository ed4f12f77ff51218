"""Published threshold tables and a batch reproducer.

Cells are grouped by (code, channel, noise) so one worker computes every
quantity of a group and shares intermediate thresholds.  Erasure groups
run by default; AWGN groups need ``include_awgn=True``.
"""
from __future__ import annotations

import csv
import logging
import math
import os
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

from .erasure_de import DEFAULT_COUPLED_L, EnsembleConfig, bp_threshold
from .exit_entropy import map_threshold_bound, output_entropy, sir_threshold
from .trellis import ChannelModel

log = logging.getLogger(__name__)

WORKERS_ENV = "ISI_SCLDPC_WORKERS"
CHANNELS = ("CH-I", "CH-II", "CH-III")
CODES = ((3, 6), (4, 8), (5, 10), (6, 12))
ERASURE_PRECISION = 1e-5
AWGN_PRECISION_DB = 0.05
AWGN_COUPLED_L = 50
TOLERANCE = {"erasure": 2e-3, "awgn": 0.15, "awgn-h": 0.01}

# Thresholds of the (3,6) code: erasure and AWGN, one row per quantity.
TABLE_IV = {
    "CH-I": {"erasure": dict(eps_bp=0.5689, eps_map=0.6387, h_bp=0.8530, h_max=1.5, h_ratio=0.5689,
                             h_map=0.9580, eps_sir=0.6404),
             "awgn": dict(gamma_bp=1.703, gamma_map=1.1600, h_bp=0.8510, h_max=1.5, h_ratio=0.5673,
                          h_map=0.9195, gamma_sir=0.8230)},
    "CH-II": {"erasure": dict(eps_bp=0.7055, eps_map=0.7519, h_bp=1.5870, h_max=2.25, h_ratio=0.7055,
                              h_map=1.6918, eps_sir=0.7530),
              "awgn": dict(gamma_bp=2.598, gamma_map=1.5090, h_bp=1.5147, h_max=2.25, h_ratio=0.6732,
                           h_map=1.6200, gamma_sir=1.4370)},
    "CH-III": {"erasure": dict(eps_bp=0.8254, eps_map=0.8482, h_bp=3.3010, h_max=4.0, h_ratio=0.8254,
                               h_map=3.3926, eps_sir=0.8506),
               "awgn": dict(gamma_bp=5.474, gamma_map=2.9750, h_bp=2.9177, h_max=4.0, h_ratio=0.7294,
                            h_map=3.2146, gamma_sir=2.9600)},
}

_V_ERASURE = ("eps_bp", "eps1", "eps3", "eps6", "eps_map", "eps_sir")
_V_AWGN = ("gamma_bp", "gamma1", "gamma3", "gamma10", "gamma_map", "gamma_sir")
_V_ROWS = {
    ((3, 6), "CH-I"): (0.5689, 0.6386, 0.6386, 0.6386, 0.6387, 0.6404, 1.703, 1.330, 1.240, 1.178, 1.160, 0.823),
    ((3, 6), "CH-II"): (0.7055, 0.7519, 0.7519, 0.7519, 0.7519, 0.7530, 2.598, 1.598, 1.587, 1.535, 1.509, 1.437),
    ((3, 6), "CH-III"): (0.8254, 0.8482, 0.8482, 0.8482, 0.8482, 0.8506, 5.474, 3.019, 3.010, 2.998, 2.975, 2.960),
    ((4, 8), "CH-I"): (0.5100, 0.6399, 0.6401, 0.6401, 0.6404, 0.6404, 2.441, 0.896, 0.877, 0.866, 0.853, 0.823),
    ((4, 8), "CH-II"): (0.6618, 0.7528, 0.7528, 0.7528, 0.7530, 0.7530, 3.596, 1.494, 1.478, 1.458, 1.448, 1.437),
    ((4, 8), "CH-III"): (0.7997, 0.8501, 0.8501, 0.8501, 0.8501, 0.8506, 6.745, 3.100, 3.061, 2.993, 2.963, 2.960),
    ((5, 10), "CH-I"): (0.4647, 0.6400, 0.6403, 0.6403, 0.6404, 0.6404, 3.029, 0.877, 0.852, 0.844, 0.834, 0.823),
    ((5, 10), "CH-II"): (0.6275, 0.7526, 0.7529, 0.7529, 0.7530, 0.7530, 4.348, 1.483, 1.461, 1.450, 1.437, 1.437),
    ((5, 10), "CH-III"): (0.7775, 0.8503, 0.8503, 0.8503, 0.8503, 0.8506, 7.550, 3.036, 3.000, 2.987, 2.960, 2.960),
    ((6, 12), "CH-I"): (0.4647, 0.6378, 0.6403, 0.6403, 0.6404, 0.6404, 3.517, 0.853, 0.844, 0.829, 0.823, 0.823),
    ((6, 12), "CH-II"): (0.6000, 0.7504, 0.7529, 0.7530, 0.7530, 0.7530, 4.938, 1.483, 1.461, 1.450, 1.437, 1.437),
    ((6, 12), "CH-III"): (0.7588, 0.8504, 0.8504, 0.8504, 0.8504, 0.8506, 8.123, 3.036, 2.990, 2.980, 2.960, 2.960),
}
TABLE_V = {
    key: {"erasure": dict(zip(_V_ERASURE, row[:6])), "awgn": dict(zip(_V_AWGN, row[6:]))}
    for key, row in _V_ROWS.items()
}


@dataclass(frozen=True)
class Cell:
    table: str  # "IV" or "V"
    code: tuple[int, int]
    channel: str
    noise: str
    quantity: str
    published: float

    @property
    def id(self) -> str:
        return f"{self.table}/({self.code[0]},{self.code[1]})/{self.channel}/{self.quantity}" + (
            "" if self.noise == "erasure" or self.quantity.startswith("gamma") else "/awgn")

    @property
    def group(self) -> tuple:
        return (self.code, self.channel, self.noise)

    @property
    def tolerance(self) -> float:
        if self.noise == "erasure":
            return TOLERANCE["erasure"]
        return TOLERANCE["awgn"] if self.quantity.startswith("gamma") else TOLERANCE["awgn-h"]

    def matches(self, pattern: str) -> bool:
        """True if every '/'-separated token of ``pattern`` is a token of the id."""
        tokens = set(self.id.split("/")) | {self.noise}
        return all(t in tokens for t in pattern.split("/") if t)


def all_cells(include_awgn: bool = False) -> list[Cell]:
    noises = ("erasure", "awgn") if include_awgn else ("erasure",)
    cells = []
    for ch, rows in TABLE_IV.items():
        for noise in noises:
            cells += [Cell("IV", (3, 6), ch, noise, q, v) for q, v in rows[noise].items()]
    for (code, ch), rows in TABLE_V.items():
        for noise in noises:
            cells += [Cell("V", code, ch, noise, q, v) for q, v in rows[noise].items()]
    return cells


def select(cells: list[Cell], filters: list[str] | None) -> list[Cell]:
    if not filters:
        return cells
    return [c for c in cells if any(c.matches(f) for f in filters)]


# ---------------------------------------------------------------------------
# per-quantity computation, memoized within a worker


@lru_cache(maxsize=None)
def erasure_threshold(code, channel, m):
    ens = EnsembleConfig(code[0], code[1], m, DEFAULT_COUPLED_L if m else 1)
    return bp_threshold(ens, ChannelModel.preset(channel), ERASURE_PRECISION).value


@lru_cache(maxsize=None)
def erasure_map(code, channel):
    return map_threshold_bound(EnsembleConfig(*code), ChannelModel.preset(channel))


def _erasure_value(code, channel, q) -> float:
    ch = ChannelModel.preset(channel)
    if q == "eps_bp" or q == "h_ratio":
        return erasure_threshold(code, channel, 0)
    if q.startswith("eps") and q[3:].isdigit():
        return erasure_threshold(code, channel, int(q[3:]))
    if q == "eps_map":
        return erasure_map(code, channel)
    if q == "eps_sir":
        return sir_threshold(ch, EnsembleConfig(*code).rate)
    if q == "h_max":
        return output_entropy(ch)
    if q == "h_bp":
        return erasure_threshold(code, channel, 0) * output_entropy(ch)
    if q == "h_map":
        return erasure_map(code, channel) * output_entropy(ch)
    raise KeyError(q)


@lru_cache(maxsize=None)
def awgn_threshold(code, channel, m):
    from .awgn.de import awgn_bp_threshold

    ens = EnsembleConfig(code[0], code[1], m, AWGN_COUPLED_L if m else 1)
    return awgn_bp_threshold(ens, ChannelModel.preset(channel), AWGN_PRECISION_DB).value


@lru_cache(maxsize=None)
def awgn_map(code, channel):
    from .awgn.entropy import awgn_map_bound

    return awgn_map_bound(EnsembleConfig(*code), ChannelModel.preset(channel))


def _awgn_value(code, channel, q) -> float:
    from .awgn.entropy import awgn_gexit_h, awgn_sir_threshold
    from .awgn.noise import sigma_from_gamma

    ch = ChannelModel.preset(channel)
    R = EnsembleConfig(*code).rate
    if q == "gamma_bp":
        return awgn_threshold(code, channel, 0)
    if q.startswith("gamma") and q[5:].isdigit():
        return awgn_threshold(code, channel, int(q[5:]))
    if q == "gamma_map":
        return awgn_map(code, channel)
    if q == "gamma_sir":
        return awgn_sir_threshold(ch, R)
    if q == "h_max":
        return output_entropy(ch)
    if q in ("h_bp", "h_ratio"):
        h = awgn_gexit_h(ch, sigma_from_gamma(awgn_threshold(code, channel, 0), R))
        return h if q == "h_bp" else h / output_entropy(ch)
    if q == "h_map":
        return awgn_gexit_h(ch, sigma_from_gamma(awgn_map(code, channel), R))
    raise KeyError(q)


def compute_cell(cell: Cell) -> float:
    fn = _erasure_value if cell.noise == "erasure" else _awgn_value
    return float(fn(cell.code, cell.channel, cell.quantity))


def _run_group(cells: list[Cell]) -> list[dict]:
    rows = []
    for c in cells:
        t0 = time.perf_counter()
        value, error = math.nan, ""
        try:
            value = compute_cell(c)
        except Exception as exc:  # one bad cell must not sink the table
            error = f"{type(exc).__name__}: {exc}"
            log.debug("cell %s failed\n%s", c.id, traceback.format_exc())
        dev = abs(value - c.published)
        rows.append(dict(cell=c.id, table=c.table, code=f"({c.code[0]},{c.code[1]})", channel=c.channel,
                         noise=c.noise, quantity=c.quantity, published=c.published, computed=value,
                         abs_dev=dev, tolerance=c.tolerance,
                         status="error" if error else ("ok" if dev <= c.tolerance else "deviates"),
                         error=error, seconds=round(time.perf_counter() - t0, 2)))
    return rows


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def reproduce_tables(cells: list[Cell], workers: int | None = None, progress=None) -> list[dict]:
    """Compute ``cells``; per-cell failures are recorded in the ``error`` column."""
    groups: dict[tuple, list[Cell]] = {}
    for c in cells:
        groups.setdefault(c.group, []).append(c)
    workers = workers or worker_count()
    results: dict[str, dict] = {}
    if workers == 1:
        outputs = map(_run_group, groups.values())
    else:
        pool = ProcessPoolExecutor(workers)
        outputs = pool.map(_run_group, groups.values())
    for rows in outputs:
        for r in rows:
            results[r["cell"]] = r
            if progress:
                progress(r)
    if workers != 1:
        pool.shutdown()
    return [results[c.id] for c in cells]


FIELDS = ("cell", "table", "code", "channel", "noise", "quantity", "published", "computed", "abs_dev",
          "tolerance", "status", "error", "seconds")


def write_csv(rows: list[dict], fh) -> None:
    w = csv.DictWriter(fh, fieldnames=FIELDS)
    w.writeheader()
    for r in rows:
        w.writerow({k: (f"{v:.6g}" if isinstance(v, float) else v) for k, v in r.items()})
