"""Job configuration, dispatch and machine-readable result records."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields
from datetime import datetime, timezone

import numpy as np

from . import __version__
from .erasure_de import DEFAULT_COUPLED_L, EDGE, NODE, EnsembleConfig, bp_threshold, run_de
from .exit_entropy import (
    DEFAULT_STEP,
    SIR_TOL,
    entropy_at_threshold,
    gexit_curve,
    map_threshold_bound,
    output_entropy,
    sir_curve,
    sir_threshold,
)
from .metric_chain import LAWS, PRODUCT, transfer_function
from .trellis import ChannelError, ChannelModel

TASKS = ("", "transfer", "de", "threshold-bp", "threshold-map", "sir", "gexit", "entropy-table")
NOISES = ("erasure", "awgn")
FORMATS = ("json", "csv")
ERASURE_PRECISION = 1e-5
AWGN_PRECISION = 0.05


class ConfigError(ValueError):
    pass


@dataclass
class JobConfig:
    task: str = ""
    channel: str = "CH-I"
    dv: int = 3
    dc: int = 6
    m: int = 0
    L: int = 0  # 0: 1 for uncoupled, DEFAULT_COUPLED_L otherwise
    Ic: int = 1
    noise: str = "erasure"
    delta: float = 1.0
    eps: float = 0.5
    gamma: float = 1.0
    grid: str = ""  # "start:stop:step" or a comma-separated list
    law: str = PRODUCT
    spreading: str = EDGE
    with_prior: bool = True
    precision: float = 0.0  # 0: module default
    seed: int = 0
    out: str = ""
    format: str = "json"

    # ---- serialization -------------------------------------------------
    def to_text(self) -> str:
        return "".join(f"{f.name}={_fmt(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_text(cls, text: str) -> "JobConfig":
        values = {}
        for n, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {n}: expected key=value, got {raw!r}")
            k, v = (p.strip() for p in line.split("=", 1))
            values[k] = v
        return cls().updated(values)

    def updated(self, values: dict) -> "JobConfig":
        """Copy with ``values`` (strings or typed) applied; unknown keys are errors."""
        types = {f.name: f.type for f in fields(self)}
        kw = asdict(self)
        for k, v in values.items():
            if v is None:
                continue
            if k not in types:
                raise ConfigError(f"unknown config key {k!r}")
            kw[k] = _coerce(k, v, types[k])
        return JobConfig(**kw)

    # ---- derived -------------------------------------------------------
    def validate(self) -> "JobConfig":
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}; choose from {TASKS[1:]}")
        if self.noise not in NOISES:
            raise ConfigError(f"noise must be one of {NOISES}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.law not in LAWS:
            raise ConfigError(f"law must be one of {LAWS}")
        if self.spreading not in (EDGE, NODE):
            raise ConfigError(f"spreading must be {EDGE!r} or {NODE!r}")
        for name in ("delta", "eps"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ConfigError(f"{name} must lie in [0, 1]")
        if self.precision < 0:
            raise ConfigError("precision must be non-negative")
        self.channel_model()
        self.ensemble()
        self.grid_values()
        return self

    def channel_model(self) -> ChannelModel:
        try:
            return ChannelModel.parse(self.channel)
        except ChannelError as exc:
            raise ConfigError(str(exc)) from exc

    def ensemble(self) -> EnsembleConfig:
        L = self.L or (DEFAULT_COUPLED_L if self.m > 0 else 1)
        try:
            return EnsembleConfig(self.dv, self.dc, self.m, L, self.Ic, spreading=self.spreading)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def grid_values(self) -> np.ndarray | None:
        if not self.grid:
            return None
        try:
            if ":" in self.grid:
                a, b, step = (float(x) for x in self.grid.split(":"))
                if step <= 0 or b < a:
                    raise ValueError
                n = int(math.floor((b - a) / step + 1e-9)) + 1
                return a + step * np.arange(n)
            return np.array([float(x) for x in self.grid.split(",") if x.strip()])
        except ValueError as exc:
            raise ConfigError(f"cannot parse grid {self.grid!r}") from exc


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def _coerce(key, v, typ):
    if not isinstance(v, str):
        return v
    try:
        if typ in (int, "int"):
            return int(v)
        if typ in (float, "float"):
            return float(v)
        if typ in (bool, "bool"):
            low = v.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(v)
    except ValueError as exc:
        raise ConfigError(f"bad value for {key}: {v!r}") from exc
    return v


@dataclass
class ResultRecord:
    task: str
    inputs: dict
    results: dict = field(default_factory=dict)
    curves: dict = field(default_factory=dict)  # name -> {"columns": [...], "rows": [[...]]}
    version: str = __version__
    timestamp: str = ""
    seed: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)

    def curve_csv(self, name: str) -> str:
        c = self.curves[name]
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(c["columns"])
        for row in c["rows"]:
            w.writerow([f"{v:.12g}" if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def scalars_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["key", "value"])
        for k, v in self.results.items():
            w.writerow([k, v])
        return buf.getvalue()


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _curve(columns, *cols) -> dict:
    return {"columns": list(columns), "rows": [list(map(float, r)) for r in zip(*cols)]}


def run_job(cfg: JobConfig) -> ResultRecord:
    """Dispatch one task; module errors propagate to the caller."""
    cfg.validate()
    rec = ResultRecord(cfg.task, asdict(cfg), seed=cfg.seed,
                       timestamp=datetime.now(timezone.utc).isoformat(timespec="seconds"))
    if cfg.task == "":
        return rec
    handler = _AWGN_TASKS if cfg.noise == "awgn" else _ERASURE_TASKS
    if cfg.task not in handler:
        raise ConfigError(f"task {cfg.task!r} is not available for {cfg.noise} noise")
    handler[cfg.task](cfg, rec)
    return rec


# ---------------------------------------------------------------------------
# erasure tasks


def _e_transfer(cfg: JobConfig, rec: ResultRecord):
    ch = cfg.channel_model()
    grid = cfg.grid_values()
    if grid is None:
        rec.results["g"] = transfer_function(ch, cfg.delta, cfg.eps, cfg.law)
        return
    if grid.min() < 0 or grid.max() > 1:
        raise ConfigError("delta grid must lie in [0, 1]")
    g = [transfer_function(ch, float(d), cfg.eps, cfg.law) for d in grid]
    rec.curves["transfer"] = _curve(("delta", "g"), grid, g)


def _e_de(cfg: JobConfig, rec: ResultRecord):
    ens = cfg.ensemble()
    out = run_de(ens, cfg.channel_model(), cfg.eps, law=cfg.law)
    rec.results.update(converged=out.converged, iterations=out.iterations,
                       cap_exceeded=out.cap_exceeded, max_p=float(out.state.p.max()))
    t = np.arange(1, ens.L + 1)
    rec.curves["profile"] = _curve(("t", "p", "q_H", "delta"), t, out.state.p, out.state.q_H, out.state.delta)


def _e_threshold_bp(cfg: JobConfig, rec: ResultRecord):
    res = bp_threshold(cfg.ensemble(), cfg.channel_model(), cfg.precision or ERASURE_PRECISION, law=cfg.law)
    rec.results.update(eps_bp=res.value, lo=res.lo, hi=res.hi, bracket_width=res.width,
                       cap_hits=res.cap_hits, probes=len(res.probes))


def _e_threshold_map(cfg: JobConfig, rec: ResultRecord):
    step = cfg.precision or DEFAULT_STEP
    v = map_threshold_bound(cfg.ensemble(), cfg.channel_model(), step=step,
                            with_prior=cfg.with_prior, law=cfg.law)
    rec.results.update(eps_map=v, bracket_width=step)


def _e_sir(cfg: JobConfig, rec: ResultRecord):
    ch = cfg.channel_model()
    tol = cfg.precision or SIR_TOL
    rec.results.update(eps_sir=sir_threshold(ch, cfg.ensemble().rate, tol), bracket_width=tol,
                       rate=cfg.ensemble().rate)
    grid = cfg.grid_values()
    if grid is not None:
        c = sir_curve(ch, grid)
        rec.curves["sir"] = _curve(("eps", "HY", "SIR"), c.eps, c.HY, c.SIR)


def _e_gexit(cfg: JobConfig, rec: ResultRecord):
    step = cfg.precision or DEFAULT_STEP
    c = gexit_curve(cfg.ensemble(), cfg.channel_model(), step=step, with_prior=cfg.with_prior, law=cfg.law)
    rec.curves["gexit"] = _curve(("eps", "delta", "G"), c.eps, c.delta, c.G)
    rec.results["eps_low"] = c.eps_low


def _e_entropy_table(cfg: JobConfig, rec: ResultRecord):
    ch, ens = cfg.channel_model(), cfg.ensemble()
    prec = cfg.precision or ERASURE_PRECISION
    bp = bp_threshold(ens, ch, prec, law=cfg.law)
    mp = map_threshold_bound(ens, ch, with_prior=cfg.with_prior, law=cfg.law)
    h_bp, h_map = entropy_at_threshold(ch, bp.value), entropy_at_threshold(ch, mp)
    rec.results.update(
        eps_bp=bp.value, bracket_width=bp.width, eps_map=mp, eps_sir=sir_threshold(ch, ens.rate),
        h_bp=h_bp.h, h_max=output_entropy(ch), h_bp_normalized=h_bp.normalized, h_map=h_map.h,
    )


_ERASURE_TASKS = {
    "transfer": _e_transfer,
    "de": _e_de,
    "threshold-bp": _e_threshold_bp,
    "threshold-map": _e_threshold_map,
    "sir": _e_sir,
    "gexit": _e_gexit,
    "entropy-table": _e_entropy_table,
}


# ---------------------------------------------------------------------------
# AWGN tasks (imported lazily; the numba kernels compile on first use)


def _awgn_cfg(cfg: JobConfig):
    from .awgn.de import AwgnDEConfig

    return AwgnDEConfig(seed=cfg.seed)


def _a_de(cfg: JobConfig, rec: ResultRecord):
    from .awgn.de import run_awgn_de

    out = run_awgn_de(cfg.ensemble(), cfg.channel_model(), cfg.gamma, _awgn_cfg(cfg))
    rec.results.update(converged=out.converged, iterations=out.iterations,
                       max_pe=float(out.pe.max()), cap_exceeded=out.cap_exceeded)
    rec.curves["pe_history"] = _curve(("iteration", "mean_pe"), np.arange(1, len(out.pe_history) + 1),
                                      out.pe_history)


def _a_threshold_bp(cfg: JobConfig, rec: ResultRecord):
    from .awgn.de import awgn_bp_threshold

    prec = cfg.precision or AWGN_PRECISION
    if prec < 0.02:
        raise ConfigError("AWGN precision must be at least 0.02 dB")
    res = awgn_bp_threshold(cfg.ensemble(), cfg.channel_model(), prec, cfg=_awgn_cfg(cfg))
    rec.results.update(gamma_bp=res.value, lo=res.lo, hi=res.hi, bracket_width=res.hi - res.lo)


def _a_threshold_map(cfg: JobConfig, rec: ResultRecord):
    from .awgn.entropy import SNR_STEP, awgn_map_bound

    rec.results.update(gamma_map=awgn_map_bound(cfg.ensemble(), cfg.channel_model(), cfg=_awgn_cfg(cfg)),
                       bracket_width_snr=SNR_STEP)


def _a_sir(cfg: JobConfig, rec: ResultRecord):
    from .awgn.entropy import awgn_sir, awgn_sir_threshold
    from .awgn.noise import sigma_from_gamma

    ch, R = cfg.channel_model(), cfg.ensemble().rate
    rec.results.update(gamma_sir=awgn_sir_threshold(ch, R, seed=cfg.seed), bracket_width=1e-3, rate=R)
    grid = cfg.grid_values()
    if grid is not None:
        vals = [awgn_sir(ch, sigma_from_gamma(g, R), seed=cfg.seed) for g in grid]
        rec.curves["sir"] = _curve(("gamma_db", "SIR"), grid, vals)


def _a_gexit(cfg: JobConfig, rec: ResultRecord):
    from .awgn.entropy import SNR_STEP, awgn_gexit_curve

    ens = cfg.ensemble()
    grid = cfg.grid_values()
    snr = (2 * ens.rate * 10 ** (grid / 10)) if grid is not None else np.arange(0.0, 16.0, SNR_STEP)
    c = awgn_gexit_curve(ens, cfg.channel_model(), snr, cfg=_awgn_cfg(cfg))
    rec.curves["gexit"] = _curve(("snr", "mmse", "stderr"), c.snr, c.mmse, c.stderr)


def _a_entropy_table(cfg: JobConfig, rec: ResultRecord):
    from .awgn.entropy import awgn_gexit_h
    from .awgn.noise import sigma_from_gamma

    _a_threshold_bp(cfg, rec)
    ch, R = cfg.channel_model(), cfg.ensemble().rate
    hmax = output_entropy(ch)
    h = awgn_gexit_h(ch, sigma_from_gamma(rec.results["gamma_bp"], R))
    rec.results.update(h_bp=h, h_max=hmax, h_bp_normalized=h / hmax)


_AWGN_TASKS = {
    "de": _a_de,
    "threshold-bp": _a_threshold_bp,
    "threshold-map": _a_threshold_map,
    "sir": _a_sir,
    "gexit": _a_gexit,
    "entropy-table": _a_entropy_table,
}
