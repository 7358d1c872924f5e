"""Session root key, per-cube key derivation, and rotation scheduling.

Per-cube keys come from HKDF-SHA-256 (RFC 5869 extract-then-expand) with
the session id as salt and an info string binding the cube id and epoch:

    salt = session_id (16 bytes)
    info = "privis/cube" || ix || iy || iz (int32 LE each) || epoch (int64 LE)
    key  = HKDF(root, salt, info, 32 bytes)

Both sides derive keys independently from the shared root plus the sealed
unit's header fields; no key material ever crosses the wire. Rotation
happens when the policy interval elapses, when cube boundaries change
(stability lost), or when a cube first appears.

Note on forward secrecy: rotating HKDF outputs from a static root bounds
key exposure windows but is not a ratchet; compromise of the root reveals
all epochs. The scheme matches the declared scope of this transport layer.
"""

from __future__ import annotations

import hashlib
import hmac
import os
import struct
from dataclasses import dataclass, field

from .errors import ValidationError
from .partition import CubeId
from .policy import ProtectionPolicy

__all__ = ["RootKey", "KeyEpoch", "KeyRing", "hkdf_sha256", "derive_key", "key_for_frame"]

_INFO_PREFIX = b"privis/cube"


def hkdf_sha256(ikm: bytes, salt: bytes, info: bytes, length: int = 32) -> bytes:
    """RFC 5869 HKDF with SHA-256, written against the RFC directly."""
    if not 0 < length <= 255 * 32:
        raise ValidationError("bad HKDF output length")
    prk = hmac.new(salt, ikm, hashlib.sha256).digest()
    okm = b""
    block = b""
    counter = 1
    while len(okm) < length:
        block = hmac.new(prk, block + info + bytes([counter]), hashlib.sha256).digest()
        okm += block
        counter += 1
    return okm[:length]


@dataclass(frozen=True)
class RootKey:
    key_material: bytes  # 32 bytes
    session_id: bytes  # 16 bytes

    def __post_init__(self):
        if len(self.key_material) != 32:
            raise ValidationError("root key must be 32 bytes")
        if len(self.session_id) != 16:
            raise ValidationError("session id must be 16 bytes")

    @classmethod
    def generate(cls) -> "RootKey":
        return cls(os.urandom(32), os.urandom(16))

    @classmethod
    def from_hex(cls, key_hex: str, session_id: bytes | None = None) -> "RootKey":
        """Reproducible provisioning: 64 hex chars; session id defaults to
        the first 16 bytes of SHA-256 over the key (stable per root)."""
        material = bytes.fromhex(key_hex)
        if session_id is None:
            session_id = hashlib.sha256(material).digest()[:16]
        return cls(material, session_id)


@dataclass(frozen=True)
class KeyEpoch:
    cube_id: CubeId
    epoch: int
    key: bytes  # 32 bytes
    derived_at_frame: int


def derive_key(root: RootKey, cube_id: CubeId, epoch: int) -> bytes:
    """Deterministic 32-byte cube key for one epoch."""
    if epoch < 0:
        raise ValidationError("epoch must be >= 0")
    info = _INFO_PREFIX + struct.pack("<iii", *cube_id) + struct.pack("<q", epoch)
    return hkdf_sha256(root.key_material, root.session_id, info)


@dataclass
class _CubeKeyState:
    epoch: KeyEpoch
    last_rotation_frame: int


@dataclass
class KeyRing:
    """Per-session key table. Single logical writer per cube id; readers
    see the epoch recorded in each sealed header, so there is no torn
    epoch/key pairing."""

    root: RootKey
    _table: dict[CubeId, _CubeKeyState] = field(default_factory=dict)

    @property
    def session_id(self) -> bytes:
        return self.root.session_id

    def has_cube(self, cube_id: CubeId) -> bool:
        return cube_id in self._table

    def key_for_frame(
        self,
        cube_id: CubeId,
        frame_id: int,
        policy: ProtectionPolicy,
        stable: bool = True,
    ) -> KeyEpoch:
        """Current KeyEpoch for sealing this cube at this frame.

        Rotates (epoch + 1, fresh derivation) when the rotation interval
        elapsed, stability was lost, or the cube is new; reuses otherwise.
        """
        state = self._table.get(cube_id)
        if state is None:
            epoch = KeyEpoch(cube_id, 0, derive_key(self.root, cube_id, 0), frame_id)
            self._table[cube_id] = _CubeKeyState(epoch, frame_id)
            return epoch
        due = frame_id - state.last_rotation_frame >= policy.key_rotation_interval
        if due or not stable:
            new_epoch = state.epoch.epoch + 1
            epoch = KeyEpoch(cube_id, new_epoch, derive_key(self.root, cube_id, new_epoch), frame_id)
            self._table[cube_id] = _CubeKeyState(epoch, frame_id)
            return epoch
        return state.epoch

    def rotated_this_frame(self, cube_id: CubeId, frame_id: int) -> bool:
        state = self._table.get(cube_id)
        return state is not None and state.last_rotation_frame == frame_id

    def key_for_epoch(self, cube_id: CubeId, epoch: int) -> bytes:
        """Receiver-side derivation from header fields."""
        return derive_key(self.root, cube_id, epoch)


def key_for_frame(
    ring: KeyRing,
    cube_id: CubeId,
    frame_id: int,
    policy: ProtectionPolicy,
    stable: bool = True,
) -> KeyEpoch:
    """Function-style alias for KeyRing.key_for_frame."""
    return ring.key_for_frame(cube_id, frame_id, policy, stable)
