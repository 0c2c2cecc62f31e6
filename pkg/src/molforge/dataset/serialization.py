"""Binary record format for dataset files.

Each per-family file is a flat sequence of records:

    header  = <IHHBxI  (payload length, family index, param count,
                        IC kind, pad byte, CRC32 of payload)
    payload = length-prefixed little-endian float32 arrays
              (params, ic, times, values with shape), then length-prefixed
              UTF-8 strings (sentence, description) and the description index.

Everything is little-endian; floats are stored at 32-bit precision, which
is the model's working precision, so serialize -> load round-trips the
training inputs bit-exactly.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

import numpy as np

from ..catalog import ICFamily
from ..errors import CorruptRecord

HEADER = struct.Struct("<IHHBxI")
FORMAT_VERSION = 1

_IC_KINDS = tuple(ICFamily)          # stable, order of declaration


@dataclass
class RawRecord:
    family_index: int
    ic_kind: ICFamily
    params: np.ndarray          # float32 [n_params]
    ic: np.ndarray              # float32, state vector or grid
    times: np.ndarray           # float32 [T]
    values: np.ndarray          # float32, [T, dim] or [T, 128]
    sentence: str
    description: str
    description_index: int


def _pack_array(arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f4")
    return struct.pack("<I", data.size) + data.tobytes()


def _pack_shaped(arr: np.ndarray) -> bytes:
    data = np.ascontiguousarray(arr, dtype="<f4")
    head = struct.pack("<I", data.ndim)
    head += struct.pack(f"<{data.ndim}I", *data.shape)
    return head + data.tobytes()


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def pack_record(rec: RawRecord) -> bytes:
    payload = (_pack_array(rec.params) + _pack_array(rec.ic)
               + _pack_array(rec.times) + _pack_shaped(rec.values)
               + _pack_str(rec.sentence) + _pack_str(rec.description)
               + struct.pack("<I", rec.description_index))
    header = HEADER.pack(len(payload), rec.family_index,
                         rec.params.size, _IC_KINDS.index(rec.ic_kind),
                         zlib.crc32(payload))
    return header + payload


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.buf):
            raise CorruptRecord("record payload truncated")
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def array(self) -> np.ndarray:
        n = self.u32()
        return np.frombuffer(self.take(4 * n), dtype="<f4").copy()

    def shaped(self) -> np.ndarray:
        ndim = self.u32()
        shape = struct.unpack(f"<{ndim}I", self.take(4 * ndim))
        n = int(np.prod(shape)) if ndim else 1
        return np.frombuffer(self.take(4 * n), dtype="<f4").reshape(shape).copy()

    def string(self) -> str:
        n = self.u32()
        return self.take(n).decode("utf-8")


def unpack_record(buf: bytes, offset: int) -> tuple[RawRecord, int]:
    """Decode one record at ``offset``; returns (record, next offset)."""
    if offset + HEADER.size > len(buf):
        raise CorruptRecord("record header truncated")
    length, family, n_params, ic_kind, crc = HEADER.unpack_from(buf, offset)
    start = offset + HEADER.size
    payload = buf[start:start + length]
    if len(payload) != length:
        raise CorruptRecord("record payload truncated")
    if zlib.crc32(payload) != crc:
        raise CorruptRecord(f"CRC mismatch in record at offset {offset}")
    r = _Reader(payload)
    params = r.array()
    if params.size != n_params:
        raise CorruptRecord("parameter count disagrees with header")
    rec = RawRecord(family_index=family, ic_kind=_IC_KINDS[ic_kind],
                    params=params, ic=r.array(), times=r.array(),
                    values=r.shaped(), sentence=r.string(),
                    description=r.string(), description_index=r.u32())
    return rec, start + length


def read_records(path) -> list[tuple[int, RawRecord]]:
    """All (offset, record) pairs in one family file."""
    with open(path, "rb") as fh:
        buf = fh.read()
    out = []
    offset = 0
    while offset < len(buf):
        rec, nxt = unpack_record(buf, offset)
        out.append((offset, rec))
        offset = nxt
    return out
