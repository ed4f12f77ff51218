"""Monte-Carlo estimate of the BCJR detector's extrinsic LLR density."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..trellis import ChannelModel, build_trellis
from .bcjr import _bcjr_kernel, channel_output
from .density import LlrDensity, Quantizer

DEFAULT_SAMPLES = 100_000
DEFAULT_BLOCK = 10_000
DEFAULT_EDGE = 100


@dataclass
class DetectorSample:
    """Interior positions of simulated blocks: symbols, outputs, BCJR results."""

    x: np.ndarray
    z: np.ndarray
    ext: np.ndarray
    zhat: np.ndarray


def simulate_detector(channel: ChannelModel, prior_density: LlrDensity, sigma: float,
                      samples: int, rng: np.random.Generator, *, block: int = DEFAULT_BLOCK,
                      edge: int = DEFAULT_EDGE, want_mean: bool = False) -> DetectorSample:
    """Run the detector on i.u.d. inputs with priors drawn from ``prior_density``.

    Priors are drawn independently per position and signed by the true
    symbol; both trellis ends are unknown to the detector and ``edge``
    positions are dropped at each end of every block.
    """
    tr = build_trellis(channel)
    nu = channel.memory
    inv_2s2 = 1.0 / (2.0 * sigma * sigma)
    n = block + 2 * edge
    xs, zs, exts, zhats = [], [], [], []
    done = 0
    while done < samples:
        bits = rng.integers(0, 2, size=n + nu)
        z = channel_output(channel, bits[nu:], bits[:nu])
        y = z + sigma * rng.standard_normal(n)
        x = 1.0 - 2.0 * bits[nu:]
        prior = x * prior_density.sample(n, rng)
        ext, zhat = _bcjr_kernel(tr.next_state, tr.output, y, prior, inv_2s2, -1, want_mean)
        take = min(block, samples - done)
        sl = slice(edge, edge + take)
        xs.append(x[sl])
        zs.append(z[sl])
        exts.append(ext[sl])
        zhats.append(zhat[sl])
        done += take
    return DetectorSample(np.concatenate(xs), np.concatenate(zs), np.concatenate(exts), np.concatenate(zhats))


def mc_detector_density(channel: ChannelModel, input_density: LlrDensity, sigma: float,
                        samples: int = DEFAULT_SAMPLES, seed=0, *, block: int = DEFAULT_BLOCK,
                        edge: int = DEFAULT_EDGE) -> LlrDensity:
    """Histogram of sign-corrected extrinsic detector LLRs on the input's grid."""
    rng = np.random.default_rng(seed)
    s = simulate_detector(channel, input_density, sigma, samples, rng, block=block, edge=edge)
    return LlrDensity.from_samples(s.x * s.ext, input_density.quantizer)


def bp_mmse(channel: ChannelModel, prior_density: LlrDensity, sigma: float,
            samples: int = DEFAULT_SAMPLES, seed=0) -> tuple[float, float]:
    """Mean squared error of the detector's posterior-mean estimate of Z, with its std error."""
    rng = np.random.default_rng(seed)
    s = simulate_detector(channel, prior_density, sigma, samples, rng, want_mean=True)
    err = (s.z - s.zhat) ** 2
    return float(err.mean()), float(err.std(ddof=1) / np.sqrt(len(err)))
