"""Power record type and its canonical wire encoding.

A device's record is its transmit-power series followed by its
receive-power series.  On the wire each power value is a signed 16-bit
big-endian integer in hundredths of a dB, preceded by a 16-bit probe
count, so the payload length is ``2 + 4 * n`` bytes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import RecordFormatError

# Sanity window for serialized powers (dBm); consumer-radio values fall
# well inside it, so random corruption is very likely to land outside.
POWER_MIN_DBM = -160.0
POWER_MAX_DBM = 100.0

_SCALE = 100.0  # hundredths of a dB
_COUNT = struct.Struct(">H")


@dataclass(frozen=True)
class PowerRecord:
    """Recorded Tx and Rx power series of one device, in dBm."""

    tx_dbm: np.ndarray
    rx_dbm: np.ndarray

    def __post_init__(self) -> None:
        tx = np.asarray(self.tx_dbm, dtype=float)
        rx = np.asarray(self.rx_dbm, dtype=float)
        if tx.ndim != 1 or rx.ndim != 1 or len(tx) != len(rx):
            raise RecordFormatError("tx and rx series must be 1-D and equally long")
        object.__setattr__(self, "tx_dbm", tx)
        object.__setattr__(self, "rx_dbm", rx)

    @property
    def n(self) -> int:
        return len(self.tx_dbm)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PowerRecord):
            return NotImplemented
        return (np.array_equal(self.tx_dbm, other.tx_dbm)
                and np.array_equal(self.rx_dbm, other.rx_dbm))

    def quantized(self) -> "PowerRecord":
        """The record as it survives the wire (0.01 dB fixed point)."""
        return PowerRecord(np.round(self.tx_dbm, 2), np.round(self.rx_dbm, 2))

    def to_bytes(self) -> bytes:
        vals = np.concatenate([self.tx_dbm, self.rx_dbm])
        if np.any(vals < POWER_MIN_DBM) or np.any(vals > POWER_MAX_DBM):
            raise RecordFormatError("power value outside representable range")
        fixed = np.round(vals * _SCALE).astype(">i2")
        return _COUNT.pack(self.n) + fixed.tobytes()

    @classmethod
    def from_bytes(cls, data: bytes, expected_n: int | None = None) -> "PowerRecord":
        if len(data) < _COUNT.size:
            raise RecordFormatError("record shorter than its header")
        (n,) = _COUNT.unpack_from(data)
        if len(data) != _COUNT.size + 4 * n:
            raise RecordFormatError(
                f"record length {len(data)} does not match declared count {n}")
        if expected_n is not None and n != expected_n:
            raise RecordFormatError(f"expected {expected_n} probes, record declares {n}")
        vals = np.frombuffer(data, dtype=">i2", offset=_COUNT.size).astype(float) / _SCALE
        if np.any(vals < POWER_MIN_DBM) or np.any(vals > POWER_MAX_DBM):
            raise RecordFormatError("power value outside sane range")
        return cls(vals[:n], vals[n:])
