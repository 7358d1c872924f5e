"""Selective traffic shaping: padding, jitter, and guard-window pacing.

Shaping applies only to flows whose saliency exceeds the threshold theta;
everything below stays byte- and time-identical to the unshaped pipeline.
For shaped flows:

    padding: delta ~ uniform{0 .. round(s * pad_max_fraction * len)}, then
             the padded length rounds up to the next bucket multiple;
    jitter:  eta ~ uniform[0, s * jitter_max_ms) added to the send time;
    pacing:  consecutive packets of one flow keep gaps of at least
             guard_min_ms * s.

Uniform distributions with saliency-scaled support are the maximum-entropy
choice on a bounded interval; bucketing collapses the residual length
ordering that random padding alone would leave observable. All draws come
from a per-(flow, frame) substream of the documented MCG, in a fixed
order (one padding delta for the unit, then one jitter per fragment), so
shaped traces are deterministic under a fixed seed and independent of
flow scheduling order.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ConfigError
from .partition import CubeId
from .rng import Mcg64, mix64

__all__ = [
    "ShapingConfig",
    "ShapedPacket",
    "pad_length",
    "jitter_delay",
    "schedule_flow",
    "flow_rng",
    "shape_times",
]


@dataclass(frozen=True)
class ShapingConfig:
    theta: float = 0.6
    pad_max_fraction: float = 0.25
    jitter_max_ms: float = 4.0
    guard_min_ms: float = 2.0
    bucket_bytes: int = 256
    mtp_budget_ms: float = 20.0
    rng_seed: int = 0

    def validate(self) -> None:
        if not 0.0 <= self.theta <= 1.0:
            raise ConfigError("theta must be in [0, 1]")
        if self.pad_max_fraction < 0 or self.jitter_max_ms < 0 or self.guard_min_ms < 0:
            raise ConfigError("shaping bounds must be >= 0")
        if self.bucket_bytes < 1:
            raise ConfigError("bucket_bytes must be >= 1")
        if self.mtp_budget_ms <= 0:
            raise ConfigError("mtp_budget_ms must be positive")
        if self.jitter_max_ms > self.mtp_budget_ms:
            raise ConfigError("jitter_max_ms must not exceed the MTP budget")


@dataclass(frozen=True)
class ShapedPacket:
    flow_id: CubeId
    original_len: int
    padded_len: int
    send_time: float  # t' in ms
    jitter_ms: float

    @property
    def pad_len(self) -> int:
        return self.padded_len - self.original_len


def _bucket_up(length: int, bucket: int) -> int:
    return ((length + bucket - 1) // bucket) * bucket


def pad_length(length: int, s: float, cfg: ShapingConfig, rng: Mcg64) -> int:
    """Padded length for one unit; equals ``length`` at or below theta.

    Consumes exactly one draw when shaped, none otherwise.
    """
    if length < 0:
        raise ConfigError("length must be >= 0")
    if s <= cfg.theta:
        return length
    delta_max = round(s * cfg.pad_max_fraction * length)
    delta = rng.randint(0, delta_max) if delta_max > 0 else 0
    return _bucket_up(length + delta, cfg.bucket_bytes)


def jitter_delay(t: float, s: float, cfg: ShapingConfig, rng: Mcg64) -> float:
    """Jittered send time; identity at or below theta. One draw when shaped."""
    if t < 0:
        raise ConfigError("send time must be >= 0")
    if s <= cfg.theta:
        return t
    return t + rng.uniform(0.0, s * cfg.jitter_max_ms)


def schedule_flow(times: list[float], s: float, cfg: ShapingConfig) -> list[float]:
    """Enforce minimum gaps guard_min_ms * s within one flow's schedule.

    Input times must be non-decreasing; flows at or below theta pass
    through untouched. The sweep only pushes packets later, preserving
    intra-flow order.
    """
    if s <= cfg.theta or len(times) <= 1:
        return list(times)
    tau = cfg.guard_min_ms * s
    out = [times[0]]
    for t in times[1:]:
        out.append(max(t, out[-1] + tau))
    return out


def flow_rng(cfg: ShapingConfig, flow_id: CubeId, frame_id: int) -> Mcg64:
    """The shaping substream for one (flow, frame).

    One substream per flow and frame keeps shaping independent of the
    order flows are processed in: the pipeline draws the padding delta
    first (it must land in the sealed header before packetization), then
    one jitter per fragment, from this same stream.
    """
    return Mcg64(mix64(cfg.rng_seed, flow_id[0], flow_id[1], flow_id[2], frame_id))


def shape_times(
    times: list[float], s: float, cfg: ShapingConfig, rng: Mcg64
) -> tuple[list[float], list[float]]:
    """Jitter each packet then enforce guard gaps; returns (times, jitters).

    The motion-to-photon budget governs: when guard pacing of a long burst
    would displace a packet more than mtp_budget_ms past its original send
    time, the displacement is capped there and the pacing gap compresses.
    Masking bursts is best-effort inside the latency budget, never beyond.
    """
    jittered = [jitter_delay(t, s, cfg, rng) for t in times]
    shaped = schedule_flow(jittered, s, cfg)
    shaped = [min(t_new, t_orig + cfg.mtp_budget_ms) for t_new, t_orig in zip(shaped, times)]
    return shaped, [j - t for j, t in zip(jittered, times)]
