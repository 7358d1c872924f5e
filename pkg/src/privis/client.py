"""Receiver: reassembly, replay filtering, decrypt-before-render admission.

Every cube passes open_cube before anything reaches the render path; a
failed unit never releases plaintext. On verification failure the client
falls back to the last verified version of that cube (hold-over) when one
exists, else drops the region for the frame. Hold-over keeps exactly one
prior version per cube, so staleness is bounded and observable through the
carried frame id.

Replay protection is a per-flow high-water mark over (frame, fragment)
with a bounded acceptance window below it: datagrams above the mark
advance it, genuinely new datagrams inside the window are accepted even
when they arrive out of order, and duplicates or stale datagrams below the
window are rejected.

Missing-versus-tampered policy: a cube that fails authentication holds
over (tamper is evidence the sender tried); a cube that simply never
completed by the frame deadline holds over with history and drops without.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

from .errors import AuthFailure, MalformedHeader
from .keyring import RootKey, derive_key
from .netw import Datagram, reassemble
from .partition import CubeId
from .seal import CubePlaintext, SealedCube, open_cube

__all__ = [
    "Admitted",
    "HeldOver",
    "Dropped",
    "AdmitOutcome",
    "ReplayGuard",
    "RenderState",
    "FrameSummary",
    "Client",
    "replay_filter",
    "admit_cube",
    "frame_compose",
]

REPLAY_WINDOW_FRAMES = 2  # frames below the high-water frame still acceptable


@dataclass(frozen=True)
class Admitted:
    cube_id: CubeId
    frame_id: int
    plaintext: CubePlaintext


@dataclass(frozen=True)
class HeldOver:
    cube_id: CubeId
    frame_id: int  # frame being composed
    source_frame_id: int  # frame the held plaintext was verified at
    plaintext: CubePlaintext


@dataclass(frozen=True)
class Dropped:
    cube_id: CubeId
    frame_id: int
    reason: str


AdmitOutcome = Admitted | HeldOver | Dropped


@dataclass
class ReplayGuard:
    """Per-flow anti-replay state: a (frame, fragment) high-water mark plus
    per-frame seen sets for the frames still inside the reorder window."""

    marks: dict[CubeId, tuple[int, int]] = field(default_factory=dict)
    seen: dict[CubeId, dict[int, set[int]]] = field(default_factory=dict)


def replay_filter(guard: ReplayGuard, flow_id: CubeId, frame_id: int, frag_index: int) -> bool:
    """True to accept the datagram, False to reject it as replayed/stale.

    The mark tracks the maximum (frame, fragment) seen; datagrams above it
    always advance it. Below the mark, genuinely new datagrams within the
    last REPLAY_WINDOW_FRAMES frames are accepted (reordering is not
    replay); duplicates and anything older are rejected.
    """
    token = (frame_id, frag_index)
    mark = guard.marks.get(flow_id)
    frames = guard.seen.setdefault(flow_id, {})
    if mark is None or token > mark:
        guard.marks[flow_id] = token
        frames.setdefault(frame_id, set()).add(frag_index)
        floor = frame_id - REPLAY_WINDOW_FRAMES
        for old in [f for f in frames if f < floor]:
            del frames[old]
        return True
    if frame_id < mark[0] - REPLAY_WINDOW_FRAMES:
        return False  # below the window: indistinguishable from replay
    frags = frames.setdefault(frame_id, set())
    if frag_index in frags:
        return False
    frags.add(frag_index)
    return True


@dataclass
class RenderState:
    """What the render path may legally see."""

    last_verified: dict[CubeId, tuple[int, CubePlaintext]] = field(default_factory=dict)
    failure_log: list[tuple[int, CubeId, str, float]] = field(default_factory=list)

    def log_failure(self, frame_id: int, cube_id: CubeId, reason: str, time_ms: float) -> None:
        self.failure_log.append((frame_id, cube_id, reason, time_ms))

    def export_failures_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["frame_id", "cube_ix", "cube_iy", "cube_iz", "reason", "time_ms"])
            for frame_id, cid, reason, t in self.failure_log:
                w.writerow([frame_id, cid[0], cid[1], cid[2], reason, t])


def admit_cube(
    sealed: SealedCube,
    root: RootKey,
    state: RenderState,
    now_ms: float = 0.0,
    key_cache: dict[tuple[CubeId, int], bytes] | None = None,
) -> AdmitOutcome:
    """Verify one reassembled cube and update render state.

    The key is derived from the header's (cube id, epoch); verification
    failure yields HeldOver when a prior verified version exists, Dropped
    otherwise, and is always logged. ``key_cache`` avoids re-deriving for
    epochs already seen (epochs repeat across frames on stable cubes).
    """
    cid = sealed.cube_id
    try:
        if key_cache is not None:
            key = key_cache.get((cid, sealed.epoch))
            if key is None:
                key = derive_key(root, cid, sealed.epoch)
                key_cache[(cid, sealed.epoch)] = key
        else:
            key = derive_key(root, cid, sealed.epoch)
        plaintext = open_cube(sealed, key)
    except (AuthFailure, MalformedHeader) as e:
        reason = "auth_failure" if isinstance(e, AuthFailure) else "malformed"
        state.log_failure(sealed.frame_id, cid, reason, now_ms)
        prior = state.last_verified.get(cid)
        if prior is not None:
            return HeldOver(cid, sealed.frame_id, prior[0], prior[1])
        return Dropped(cid, sealed.frame_id, reason)
    prev = state.last_verified.get(cid)
    if prev is None or sealed.frame_id >= prev[0]:
        state.last_verified[cid] = (sealed.frame_id, plaintext)
    return Admitted(cid, sealed.frame_id, plaintext)


@dataclass(frozen=True)
class FrameSummary:
    frame_id: int
    admitted: int
    held: int
    dropped: int
    point_total: int

    @property
    def cube_total(self) -> int:
        return self.admitted + self.held + self.dropped


def frame_compose(
    frame_id: int,
    outcomes: dict[CubeId, AdmitOutcome],
    expected_cubes: list[CubeId],
    state: RenderState,
    now_ms: float = 0.0,
) -> tuple[FrameSummary, dict[CubeId, AdmitOutcome]]:
    """Resolve a frame once all flows finished or timed out.

    Expected cubes with no outcome (nothing arrived, or the flow was not
    refreshed this frame) hold over their last verified version when one
    exists; without history they are dropped and logged. Conservation:
    admitted + held + dropped equals the expected cube count.
    """
    resolved: dict[CubeId, AdmitOutcome] = {}
    admitted = held = dropped = points = 0
    for cid in expected_cubes:
        out = outcomes.get(cid)
        if out is None:
            prior = state.last_verified.get(cid)
            if prior is not None:
                out = HeldOver(cid, frame_id, prior[0], prior[1])
            else:
                out = Dropped(cid, frame_id, "missing")
                state.log_failure(frame_id, cid, "missing", now_ms)
        resolved[cid] = out
        if isinstance(out, Admitted):
            admitted += 1
            points += out.plaintext.num_points
        elif isinstance(out, HeldOver):
            held += 1
            points += out.plaintext.num_points
        else:
            dropped += 1
    return FrameSummary(frame_id, admitted, held, dropped, points), resolved


@dataclass
class Client:
    """Stateful receiver: datagram intake through frame composition."""

    root: RootKey
    state: RenderState = field(default_factory=RenderState)
    guard: ReplayGuard = field(default_factory=ReplayGuard)
    _buffers: dict[tuple[CubeId, int], list[Datagram]] = field(default_factory=dict)
    _key_cache: dict[tuple[CubeId, int], bytes] = field(default_factory=dict)

    def on_datagram(self, dgram: Datagram, arrival_ms: float) -> SealedCube | None:
        """Feed one datagram; returns the sealed unit when it completes."""
        if not replay_filter(self.guard, dgram.flow_id, dgram.frame_id, dgram.frag_index):
            return None
        buf = self._buffers.setdefault((dgram.flow_id, dgram.frame_id), [])
        buf.append(dgram)
        if len(buf) < dgram.frag_count:
            return None
        unit = reassemble(buf)
        if unit is None:
            return None
        del self._buffers[(dgram.flow_id, dgram.frame_id)]
        # from_bytes validates the declared pad length and discards the pad
        return SealedCube.from_bytes(unit)

    def admit(self, sealed: SealedCube, now_ms: float = 0.0) -> AdmitOutcome:
        return admit_cube(sealed, self.root, self.state, now_ms, key_cache=self._key_cache)
