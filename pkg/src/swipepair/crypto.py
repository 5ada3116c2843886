"""Key agreement, session-key derivation, record sealing, and interlock.

Key exchange uses X25519; the session key is HKDF-SHA256 over the shared
secret.  Records are sealed with AES-128 in ECB mode to match the target
protocol's wire behaviour.  ECB is a fidelity choice, not a
recommendation: it leaks equal-block structure and authenticates
nothing, which here is partly mitigated by the interlock discipline and
downstream record validation.

Each 16-byte cipher block is exchanged as two 8-byte halves.  All first
halves must be exchanged (both directions) before any second half is
sent; a premature second half aborts the pairing.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives import hashes, padding
from cryptography.hazmat.primitives.asymmetric.x25519 import (
    X25519PrivateKey,
    X25519PublicKey,
)
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from cryptography.hazmat.primitives.kdf.hkdf import HKDF

from .errors import FramingError, KeyAgreementError, OrderingViolation
from .records import PowerRecord

BLOCK_BYTES = 16
HALF_BYTES = 8
SESSION_KEY_BYTES = 16

_KDF_INFO = b"swipepair session key v1"

# half-message frame: 4-byte big-endian block index, 1-byte half index,
# 8-byte payload
_FRAME = struct.Struct(">IB8s")
FRAME_BYTES = _FRAME.size


@dataclass(frozen=True)
class KeyPair:
    private_bytes: bytes
    public_bytes: bytes


def generate_keypair(rng: np.random.Generator) -> KeyPair:
    """Deterministic X25519 keypair from a seeded random source."""
    raw = rng.bytes(32)
    priv = X25519PrivateKey.from_private_bytes(raw)
    pub = priv.public_key().public_bytes_raw()
    return KeyPair(private_bytes=priv.private_bytes_raw(), public_bytes=pub)


def derive_shared_secret(own_private: bytes, peer_public: bytes) -> bytes:
    """X25519 scalar multiplication; commutative across the two parties."""
    if len(peer_public) != 32:
        raise KeyAgreementError("peer public key must be 32 bytes")
    try:
        shared = X25519PrivateKey.from_private_bytes(own_private).exchange(
            X25519PublicKey.from_public_bytes(peer_public))
    except ValueError as exc:  # low-order/degenerate point
        raise KeyAgreementError(f"key agreement failed: {exc}") from exc
    return shared


def derive_session_key(shared_secret: bytes) -> bytes:
    """128-bit session key from the shared secret (HKDF-SHA256)."""
    if not shared_secret:
        raise KeyAgreementError("empty shared secret")
    return HKDF(algorithm=hashes.SHA256(), length=SESSION_KEY_BYTES,
                salt=None, info=_KDF_INFO).derive(shared_secret)


def _aes_ecb(key: bytes) -> Cipher:
    return Cipher(algorithms.AES(key), modes.ECB())


def encrypt_blocks(key: bytes, plaintext: bytes) -> bytes:
    """PKCS7-pad and encrypt; output length is a multiple of 16 bytes."""
    padder = padding.PKCS7(BLOCK_BYTES * 8).padder()
    padded = padder.update(plaintext) + padder.finalize()
    enc = _aes_ecb(key).encryptor()
    return enc.update(padded) + enc.finalize()


def decrypt_blocks(key: bytes, ciphertext: bytes) -> bytes:
    if len(ciphertext) % BLOCK_BYTES:
        raise FramingError("ciphertext length not a multiple of the block size")
    dec = _aes_ecb(key).decryptor()
    padded = dec.update(ciphertext) + dec.finalize()
    unpadder = padding.PKCS7(BLOCK_BYTES * 8).unpadder()
    try:
        return unpadder.update(padded) + unpadder.finalize()
    except ValueError as exc:
        raise FramingError(f"bad padding: {exc}") from exc


def seal_power_record(key: bytes, record: PowerRecord) -> bytes:
    """Serialize and encrypt a power record."""
    return encrypt_blocks(key, record.to_bytes())


def open_power_record(key: bytes, ciphertext: bytes,
                      expected_n: int | None = None) -> PowerRecord:
    """Decrypt and parse a sealed record, validating its format."""
    return PowerRecord.from_bytes(decrypt_blocks(key, ciphertext), expected_n)


@dataclass(frozen=True)
class CipherHalf:
    block_index: int
    half_index: int  # 0 = first 64 bits, 1 = second 64 bits
    payload: bytes

    def encode(self) -> bytes:
        return _FRAME.pack(self.block_index, self.half_index, self.payload)

    @classmethod
    def decode(cls, frame: bytes) -> "CipherHalf":
        if len(frame) != FRAME_BYTES:
            raise FramingError(f"frame must be {FRAME_BYTES} bytes, got {len(frame)}")
        block, half, payload = _FRAME.unpack(frame)
        if half not in (0, 1):
            raise FramingError(f"half index must be 0 or 1, got {half}")
        return cls(block_index=block, half_index=half, payload=payload)


def split_into_halves(ciphertext: bytes) -> list[CipherHalf]:
    """Block-major, half-minor split of a sealed record."""
    if len(ciphertext) % BLOCK_BYTES:
        raise FramingError("ciphertext length not a multiple of the block size")
    halves = []
    for b in range(len(ciphertext) // BLOCK_BYTES):
        block = ciphertext[b * BLOCK_BYTES:(b + 1) * BLOCK_BYTES]
        halves.append(CipherHalf(b, 0, block[:HALF_BYTES]))
        halves.append(CipherHalf(b, 1, block[HALF_BYTES:]))
    return halves


def join_halves(halves: list[CipherHalf]) -> bytes:
    """Inverse of :func:`split_into_halves`; every block needs both halves."""
    by_key = {(h.block_index, h.half_index): h.payload for h in halves}
    if len(by_key) != len(halves):
        raise FramingError("duplicate half")
    n_blocks = len(halves) // 2
    out = bytearray()
    for b in range(n_blocks):
        try:
            out += by_key[(b, 0)] + by_key[(b, 1)]
        except KeyError as exc:
            raise FramingError(f"missing half for block {b}") from exc
    if len(out) != HALF_BYTES * len(halves):
        raise FramingError("stray half indices")
    return bytes(out)


class InterlockEndpoint:
    """One party of the half-block interlock exchange.

    The endpoint knows how many blocks to expect from its peer and
    enforces the phase discipline on receive: any second half arriving
    before the peer's first-half set is complete raises
    :class:`OrderingViolation`.
    """

    def __init__(self, name: str, session_key: bytes, ciphertext: bytes,
                 expected_blocks: int):
        self.name = name
        self.session_key = session_key
        self.outgoing = split_into_halves(ciphertext)
        self.expected_blocks = expected_blocks
        self._received: dict[tuple[int, int], bytes] = {}
        self._first_halves_seen = 0

    def frames_for_phase(self, half_index: int) -> list[bytes]:
        return [h.encode() for h in self.outgoing if h.half_index == half_index]

    @property
    def first_phase_complete(self) -> bool:
        return self._first_halves_seen == self.expected_blocks

    def receive(self, frame: bytes) -> None:
        half = CipherHalf.decode(frame)
        if half.block_index >= self.expected_blocks:
            raise FramingError(
                f"{self.name}: block index {half.block_index} out of range")
        if (half.block_index, half.half_index) in self._received:
            raise FramingError(f"{self.name}: duplicate half "
                               f"({half.block_index}, {half.half_index})")
        if half.half_index == 1 and not self.first_phase_complete:
            raise OrderingViolation(
                f"{self.name}: second half of block {half.block_index} "
                "before first-half phase completed")
        self._received[(half.block_index, half.half_index)] = half.payload
        if half.half_index == 0:
            self._first_halves_seen += 1

    def reassemble(self, expected_n: int | None = None) -> PowerRecord:
        if len(self._received) != 2 * self.expected_blocks:
            raise FramingError(f"{self.name}: reassembled block count mismatch")
        halves = [CipherHalf(b, h, p) for (b, h), p in self._received.items()]
        ciphertext = join_halves(halves)
        return open_power_record(self.session_key, ciphertext, expected_n)


def interlock_exchange(a: InterlockEndpoint, b: InterlockEndpoint,
                       expected_n: int | None = None,
                       premature_second_half_from: InterlockEndpoint | None = None,
                       frame_log: list | None = None,
                       ) -> tuple[PowerRecord, PowerRecord]:
    """Run the two-phase exchange; returns (record received by a, by b).

    ``premature_second_half_from`` injects a protocol violation: that
    endpoint leads with a second-half frame, which the peer must reject.
    ``frame_log`` collects one entry per delivered frame for audit.
    """

    def deliver(sender: InterlockEndpoint, receiver: InterlockEndpoint,
                frame: bytes) -> None:
        if frame_log is not None:
            half = CipherHalf.decode(frame)
            frame_log.append({"from": sender.name, "to": receiver.name,
                              "block": half.block_index, "half": half.half_index,
                              "payload": half.payload.hex()})
        receiver.receive(frame)

    if premature_second_half_from is not None:
        attacker = premature_second_half_from
        victim = b if attacker is a else a
        deliver(attacker, victim, attacker.frames_for_phase(1)[0])
        raise AssertionError("premature second half was not rejected")
    for phase in (0, 1):
        frames_a = a.frames_for_phase(phase)
        frames_b = b.frames_for_phase(phase)
        if len(frames_a) != len(frames_b):
            raise FramingError("peers disagree on block count")
        for fa, fb in zip(frames_a, frames_b):
            deliver(a, b, fa)
            deliver(b, a, fb)
    return a.reassemble(expected_n), b.reassemble(expected_n)
