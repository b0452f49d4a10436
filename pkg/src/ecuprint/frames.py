"""Standard CAN 2.0A data-frame codec.

Encodes 11-bit-identifier data frames to their stuffed on-wire bit stream
(CRC-15, bit stuffing, fixed-form tail) and back. Extended, remote, error
and overload frames are rejected. Bit values use the wire convention:
dominant = 0, recessive = 1.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .errors import (
    CrcMismatch,
    FrameFormatError,
    StuffingViolation,
    TruncatedFrame,
    ValidationError,
)

DOMINANT = 0
RECESSIVE = 1

# Field tags used in BitStream.field_map. The "control" tag covers RTR,
# IDE, r0 and the four DLC bits; "arbitration" covers only the 11 MID bits.
SOF = "sof"
ARBITRATION = "arbitration"
CONTROL = "control"
DATA = "data"
CRC = "crc"
CRC_DELIMITER = "crc_delimiter"
ACK_SLOT = "ack_slot"
ACK_DELIMITER = "ack_delimiter"
EOF = "eof"
STUFF = "stuff"

FIELD_TAGS = (SOF, ARBITRATION, CONTROL, DATA, CRC, CRC_DELIMITER,
              ACK_SLOT, ACK_DELIMITER, EOF, STUFF)

# Arbitration may have multiple simultaneous drivers and the ACK slot /
# delimiter are answered by receivers, so none of them fingerprint the
# transmitter.
EXCLUDED_FIELDS = frozenset({ARBITRATION, ACK_SLOT, ACK_DELIMITER})

CRC15_GENERATOR = 0xC599  # x^15 + x^14 + x^10 + x^8 + x^7 + x^4 + x^3 + 1
CRC15_WIDTH = 15

_FIXED_TAIL_LEN = 10  # CRC delimiter + ACK slot + ACK delimiter + 7 EOF bits


@dataclass(frozen=True)
class CanFrame:
    """Logical standard data frame: 11-bit identifier plus 0-8 payload bytes."""

    mid: int
    dlc: int
    payload: bytes

    def __post_init__(self):
        if not 0 <= self.mid < 2 ** 11:
            raise ValidationError(f"mid {self.mid:#x} does not fit in 11 bits")
        if not 0 <= self.dlc <= 8:
            raise ValidationError(f"dlc {self.dlc} out of range 0..8")
        object.__setattr__(self, "payload", bytes(self.payload))
        if len(self.payload) != self.dlc:
            raise ValidationError(
                f"payload length {len(self.payload)} does not match dlc {self.dlc}")


@dataclass(frozen=True)
class BitStream:
    """On-wire bit sequence plus a per-bit field map (stuff bits tagged 'stuff')."""

    bits: tuple[int, ...]
    field_map: tuple[str, ...]

    def __post_init__(self):
        if len(self.bits) != len(self.field_map):
            raise ValidationError("field_map must cover every bit exactly once")
        if any(b not in (0, 1) for b in self.bits):
            raise ValidationError("bits must be 0 (dominant) or 1 (recessive)")

    def __len__(self) -> int:
        return len(self.bits)


def int_to_bits(value: int, width: int) -> list[int]:
    """Big-endian bit expansion of ``value`` into ``width`` bits."""
    return [(value >> (width - 1 - k)) & 1 for k in range(width)]


def bits_to_int(bits: Iterable[int]) -> int:
    out = 0
    for b in bits:
        out = (out << 1) | b
    return out


def compute_crc15(bits: Sequence[int]) -> int:
    """CRC-15 of a bit sequence: remainder of (message << 15) mod generator.

    Plain GF(2) long division with zero initial value, generator
    x^15 + x^14 + x^10 + x^8 + x^7 + x^4 + x^3 + 1.
    """
    work = list(bits) + [0] * CRC15_WIDTH
    gen = int_to_bits(CRC15_GENERATOR, CRC15_WIDTH + 1)
    for i in range(len(bits)):
        if work[i]:
            for j, g in enumerate(gen):
                work[i + j] ^= g
    return bits_to_int(work[len(bits):])


def _stuff(bits: Sequence[int], tags: Sequence[str] | None):
    """Insert a complementary bit after every run of five equal bits.

    Inserted bits count towards subsequent runs, so the output never
    contains six consecutive equal bits. Returns (bits, tags); inserted
    bits are tagged STUFF.
    """
    out_bits: list[int] = []
    out_tags: list[str] = []
    run_bit = -1
    run_len = 0
    for i, b in enumerate(bits):
        out_bits.append(b)
        out_tags.append(tags[i] if tags is not None else "")
        if b == run_bit:
            run_len += 1
        else:
            run_bit, run_len = b, 1
        if run_len == 5:
            stuff = 1 - b
            out_bits.append(stuff)
            out_tags.append(STUFF)
            run_bit, run_len = stuff, 1
    return out_bits, out_tags


def apply_bit_stuffing(bits: Sequence[int]) -> list[int]:
    """Stuff a raw bit sequence (see _stuff); inverse of remove_bit_stuffing."""
    return _stuff(bits, None)[0]


def remove_bit_stuffing(bits: Sequence[int]) -> list[int]:
    """Drop stuff bits from a stuffed sequence, verifying the stuffing rule."""
    out: list[int] = []
    run_bit = -1
    run_len = 0
    expect_stuff = False
    for b in bits:
        if expect_stuff:
            if b == run_bit:
                raise StuffingViolation("six consecutive equal bits")
            run_bit, run_len = b, 1
            expect_stuff = False
            continue
        out.append(b)
        if b == run_bit:
            run_len += 1
        else:
            run_bit, run_len = b, 1
        if run_len == 5:
            expect_stuff = True
    if expect_stuff:
        raise StuffingViolation("stream ends where a stuff bit is required")
    return out


def encode_frame(frame: CanFrame) -> BitStream:
    """Encode a frame to its stuffed on-wire bit stream.

    The CRC covers SOF through the data field (destuffed); stuffing covers
    SOF through the CRC sequence. The ACK slot is emitted recessive: the
    transmitter does not model receiver acknowledgement.
    """
    body_bits = [DOMINANT]
    body_tags = [SOF]
    body_bits += int_to_bits(frame.mid, 11)
    body_tags += [ARBITRATION] * 11
    body_bits += [0, 0, 0] + int_to_bits(frame.dlc, 4)  # RTR, IDE, r0, DLC
    body_tags += [CONTROL] * 7
    for byte in frame.payload:
        body_bits += int_to_bits(byte, 8)
    body_tags += [DATA] * (8 * frame.dlc)

    crc = compute_crc15(body_bits)
    body_bits += int_to_bits(crc, CRC15_WIDTH)
    body_tags += [CRC] * CRC15_WIDTH

    stuffed_bits, stuffed_tags = _stuff(body_bits, body_tags)
    stuffed_bits += [RECESSIVE] * _FIXED_TAIL_LEN
    stuffed_tags += [CRC_DELIMITER, ACK_SLOT, ACK_DELIMITER] + [EOF] * 7
    return BitStream(tuple(stuffed_bits), tuple(stuffed_tags))


class _Destuffer:
    """Cursor over a stuffed bit stream that drops stuff bits on the fly."""

    def __init__(self, raw: Sequence[int]):
        self.raw = raw
        self.pos = 0
        self._run_bit = -1
        self._run_len = 0

    def _consume_stuff_bit(self):
        if self.pos >= len(self.raw):
            raise TruncatedFrame("stream ends where a stuff bit is required")
        b = self.raw[self.pos]
        self.pos += 1
        if b == self._run_bit:
            raise StuffingViolation("six consecutive equal bits in stuffed region")
        self._run_bit, self._run_len = b, 1

    def take_logical(self) -> int:
        if self._run_len == 5:
            self._consume_stuff_bit()
        if self.pos >= len(self.raw):
            raise TruncatedFrame("unexpected end of stream")
        b = self.raw[self.pos]
        self.pos += 1
        if b == self._run_bit:
            self._run_len += 1
        else:
            self._run_bit, self._run_len = b, 1
        return b

    def finish_stuffed_region(self):
        # A run of five at the region end still carries a trailing stuff bit.
        if self._run_len == 5:
            self._consume_stuff_bit()

    def take_raw(self, n: int) -> list[int]:
        if self.pos + n > len(self.raw):
            raise TruncatedFrame("unexpected end of stream")
        out = list(self.raw[self.pos:self.pos + n])
        self.pos += n
        return out


def decode_frame(bits: BitStream | Sequence[int]) -> CanFrame:
    """Decode a stuffed on-wire bit stream back to the logical frame.

    Raises StuffingViolation, CrcMismatch, TruncatedFrame or
    FrameFormatError depending on the defect.
    """
    raw = bits.bits if isinstance(bits, BitStream) else tuple(bits)
    reader = _Destuffer(raw)
    logical: list[int] = []

    def take(n: int) -> list[int]:
        out = [reader.take_logical() for _ in range(n)]
        logical.extend(out)
        return out

    if take(1)[0] != DOMINANT:
        raise FrameFormatError("missing dominant SOF")
    mid = bits_to_int(take(11))
    if take(1)[0] != DOMINANT:
        raise FrameFormatError("remote frames are not supported")
    if take(1)[0] != DOMINANT:
        raise FrameFormatError("extended identifiers are not supported")
    take(1)  # r0: transmitted dominant, accepted either way
    dlc = bits_to_int(take(4))
    if dlc > 8:
        raise FrameFormatError(f"dlc {dlc} out of range 0..8")
    data_bits = take(8 * dlc)
    crc_rx = bits_to_int(take(CRC15_WIDTH))
    reader.finish_stuffed_region()

    tail = reader.take_raw(_FIXED_TAIL_LEN)
    if reader.pos != len(raw):
        raise FrameFormatError("trailing bits after EOF")
    # CRC delimiter, ACK delimiter and EOF are fixed recessive; the ACK slot
    # may legitimately have been driven dominant by a receiver.
    if any(b != RECESSIVE for b in tail[:1] + tail[2:]):
        raise FrameFormatError("corrupt fixed-form frame tail")

    crc_calc = compute_crc15(logical[:-CRC15_WIDTH])
    if crc_calc != crc_rx:
        raise CrcMismatch(f"crc mismatch: got {crc_rx:#06x}, expected {crc_calc:#06x}")

    payload = bytes(bits_to_int(data_bits[i * 8:(i + 1) * 8]) for i in range(dlc))
    return CanFrame(mid=mid, dlc=dlc, payload=payload)


def fingerprintable_region(bits: BitStream) -> list[int]:
    """Indices of bits usable for fingerprinting the transmitter.

    Everything except arbitration and the ACK slot/delimiter. A stuff bit
    belongs to the field of the preceding non-stuff bit, so stuff bits
    inside retained fields are retained.
    """
    region: list[int] = []
    current = ""
    for i, tag in enumerate(bits.field_map):
        if tag == STUFF:
            effective = current
        else:
            effective = tag
            current = tag
        if effective not in EXCLUDED_FIELDS:
            region.append(i)
    return region
