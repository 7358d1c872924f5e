"""Emulated datagram transport with per-cube independent flows.

Sealed units fragment into datagrams with a 24-byte header:

    flow_id     3 x int32 LE   (cube id)
    frame_id    u64 LE
    frag_index  u16 LE
    frag_count  u16 LE

The channel is a deterministic discrete-event emulation: each datagram is
delayed by half the configured RTT, dropped independently with loss_prob,
and adjacent survivors of one flow swap arrival order with reorder_prob.
The channel randomness is a per-flow substream of the session seed, which
makes per-flow delivery a function of that flow's datagrams and the seed
alone; loss in one flow can never perturb another.

Traffic traces record the sender's egress, (wire length, send time) per
datagram, before channel loss: that is the side a traffic-analysis
adversary observes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import NamedTuple

from .errors import ConfigError, MalformedHeader
from .partition import CubeId
from .rng import Mcg64, mix64

__all__ = [
    "NetConfig",
    "Datagram",
    "TrafficTrace",
    "packetize",
    "reassemble",
    "transmit",
    "flow_isolation_check",
    "FRAG_HEADER_LEN",
]

_FRAG = struct.Struct("<iiiQHH")
FRAG_HEADER_LEN = _FRAG.size  # 24


@dataclass(frozen=True)
class NetConfig:
    rtt_ms: float = 15.0
    loss_prob: float = 0.0
    reorder_prob: float = 0.0
    mtu: int = 1200
    seed: int = 0

    def validate(self) -> None:
        if self.rtt_ms < 0:
            raise ConfigError("rtt_ms must be >= 0")
        # 1.0 is allowed so a total-loss channel remains expressible
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError("loss_prob must be in [0, 1]")
        if not 0.0 <= self.reorder_prob < 1.0:
            raise ConfigError("reorder_prob must be in [0, 1)")
        if self.mtu < 64:
            raise ConfigError("mtu must be >= 64")


class Datagram(NamedTuple):
    flow_id: CubeId
    frame_id: int
    frag_index: int
    frag_count: int
    payload: bytes

    def to_bytes(self) -> bytes:
        return (
            _FRAG.pack(
                self.flow_id[0],
                self.flow_id[1],
                self.flow_id[2],
                self.frame_id,
                self.frag_index,
                self.frag_count,
            )
            + self.payload
        )

    @classmethod
    def from_bytes(cls, data: bytes) -> "Datagram":
        if len(data) < FRAG_HEADER_LEN:
            raise MalformedHeader("datagram shorter than fragment header")
        ix, iy, iz, frame_id, idx, count = _FRAG.unpack_from(data)
        return cls(CubeId(ix, iy, iz), frame_id, idx, count, data[FRAG_HEADER_LEN:])

    @property
    def wire_len(self) -> int:
        return FRAG_HEADER_LEN + len(self.payload)


@dataclass
class TrafficTrace:
    """Sender-side observable record of one flow: (length, send time) pairs."""

    flow_id: CubeId
    records: list[tuple[int, float]] = field(default_factory=list)

    @property
    def packet_count(self) -> int:
        return len(self.records)


def packetize(unit: bytes, flow_id: CubeId, frame_id: int, mtu: int = 1200) -> list[Datagram]:
    """Split one sealed unit into MTU-sized fragments."""
    payload_max = mtu - FRAG_HEADER_LEN
    if payload_max < 1:
        raise ConfigError("mtu leaves no payload room")
    count = max(1, -(-len(unit) // payload_max))
    if count > 0xFFFF:
        raise ConfigError("unit needs more fragments than the header can number")
    return [
        Datagram(flow_id, frame_id, i, count, unit[i * payload_max : (i + 1) * payload_max])
        for i in range(count)
    ]


def reassemble(datagrams: list[Datagram]) -> bytes | None:
    """Rebuild a unit from its fragments; None while incomplete."""
    if not datagrams:
        return None
    count = datagrams[0].frag_count
    slots: list[bytes | None] = [None] * count
    for d in datagrams:
        if d.frag_count != count or not 0 <= d.frag_index < count:
            raise MalformedHeader("inconsistent fragment metadata")
        slots[d.frag_index] = d.payload
    if any(s is None for s in slots):
        return None
    return b"".join(slots)  # type: ignore[arg-type]


def transmit(
    sendlist: list[tuple[Datagram, float]],
    cfg: NetConfig = NetConfig(),
) -> tuple[list[tuple[Datagram, float]], dict[CubeId, TrafficTrace]]:
    """Run the channel over (datagram, send_time) pairs.

    Returns (delivered, traces): delivered pairs carry arrival times and
    come back sorted by arrival; traces capture every datagram as sent,
    per flow, ordered by send time, independent of loss.
    """
    cfg.validate()
    by_flow: dict[CubeId, list[tuple[Datagram, float]]] = {}
    for dgram, t in sendlist:
        by_flow.setdefault(dgram.flow_id, []).append((dgram, t))

    delivered: list[tuple[Datagram, float]] = []
    traces: dict[CubeId, TrafficTrace] = {}
    for flow_id, items in by_flow.items():
        items.sort(key=lambda p: p[1])
        trace = TrafficTrace(flow_id, [(d.wire_len, t) for d, t in items])
        traces[flow_id] = trace
        rng = Mcg64(mix64(cfg.seed, flow_id[0], flow_id[1], flow_id[2]))
        survivors = [
            (d, t + cfg.rtt_ms / 2.0)
            for d, t in items
            if rng.next_uniform() >= cfg.loss_prob
        ]
        if cfg.reorder_prob > 0.0:
            i = 0
            while i < len(survivors) - 1:
                if rng.next_uniform() < cfg.reorder_prob:
                    (d1, t1), (d2, t2) = survivors[i], survivors[i + 1]
                    survivors[i], survivors[i + 1] = (d2, t1), (d1, t2)
                    i += 2
                else:
                    i += 1
        delivered.extend(survivors)
    delivered.sort(key=lambda p: p[1])
    return delivered, traces


def flow_isolation_check(
    sendlist: list[tuple[Datagram, float]],
    cfg: NetConfig = NetConfig(),
) -> dict:
    """Verify per-flow delivery independence.

    Re-runs the channel on each flow in isolation and checks that the
    delivered set matches the joint run exactly; loss in one flow must
    never remove datagrams of another.
    """
    joint_delivered, traces = transmit(sendlist, cfg)

    def key(d: Datagram) -> tuple:
        return (d.flow_id, d.frame_id, d.frag_index)

    joint_by_flow: dict[CubeId, set] = {f: set() for f in traces}
    for d, _t in joint_delivered:
        joint_by_flow.setdefault(d.flow_id, set()).add(key(d))

    report = {"flows": {}, "isolated": True}
    for flow_id in traces:
        solo = [(d, t) for d, t in sendlist if d.flow_id == flow_id]
        solo_delivered, _ = transmit(solo, cfg)
        solo_set = {key(d) for d, _t in solo_delivered}
        match = solo_set == joint_by_flow.get(flow_id, set())
        report["flows"][flow_id] = {
            "sent": len(solo),
            "delivered": len(solo_set),
            "matches_joint": match,
        }
        report["isolated"] &= match
    return report
