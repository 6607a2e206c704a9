"""Sectioned binary checkpoint container.

Layout (all integers little-endian):

    magic     8 bytes  b"XTAMER1\\x00"
    version   u32
    nsections u32
    section*  u32 tag length + tag (ascii)
              u32 descriptor length + descriptor (UTF-8 JSON: array names,
                  shapes, and arbitrary JSON metadata)
              u64 payload length + payload (the section's float64 arrays,
                  little-endian, concatenated in descriptor order)
    crc       u32 CRC-32 of every preceding byte

Reads are strict: bad magic, unsupported version, or a checksum mismatch
(which any truncation causes) raise CheckpointError with a `kind` naming
the failed check, never a bare crash.
"""

from __future__ import annotations

import json
import struct
import zlib
from pathlib import Path

import numpy as np

MAGIC = b"XTAMER1\x00"
VERSION = 1


class CheckpointError(ValueError):
    """Unreadable checkpoint file; `kind` is one of magic/version/checksum/format."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind


class Section:
    """One tagged block: named float64 arrays plus free-form JSON metadata."""

    def __init__(self, tag: str, arrays: dict[str, np.ndarray] | None = None,
                 meta: dict | None = None):
        self.tag = tag
        self.arrays = {k: np.asarray(v, dtype=np.float64) for k, v in (arrays or {}).items()}
        self.meta = meta or {}


def find_section(sections: dict[str, Section], tag: str) -> Section:
    """The section carrying `tag`; a missing tag is a format error."""
    if tag not in sections:
        have = ", ".join(sorted(sections)) or "none"
        raise CheckpointError("format", f"no {tag!r} section (found: {have})")
    return sections[tag]


def write_checkpoint(path, sections: list[Section]) -> None:
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<II", VERSION, len(sections))
    for sec in sections:
        tag = sec.tag.encode("ascii")
        desc = json.dumps(
            {
                "arrays": [{"name": k, "shape": list(v.shape)} for k, v in sec.arrays.items()],
                "meta": sec.meta,
            },
            sort_keys=True,
        ).encode("utf-8")
        payload = b"".join(
            np.ascontiguousarray(v, dtype="<f8").tobytes() for v in sec.arrays.values()
        )
        blob += struct.pack("<I", len(tag)) + tag
        blob += struct.pack("<I", len(desc)) + desc
        blob += struct.pack("<Q", len(payload)) + payload
    blob += struct.pack("<I", zlib.crc32(bytes(blob)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(blob))


def read_checkpoint(path) -> dict[str, Section]:
    data = Path(path).read_bytes()
    if len(data) < len(MAGIC) or data[: len(MAGIC)] != MAGIC:
        raise CheckpointError("magic", "not a checkpoint file (bad magic header)")
    if len(data) < len(MAGIC) + 12:
        raise CheckpointError("checksum", "file truncated")
    stored_crc = struct.unpack("<I", data[-4:])[0]
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CheckpointError("checksum", "CRC-32 mismatch (corrupt or truncated file)")
    version, nsections = struct.unpack_from("<II", data, len(MAGIC))
    if version != VERSION:
        raise CheckpointError("version", f"unsupported format version {version}")
    off = len(MAGIC) + 8
    end = len(data) - 4
    sections: dict[str, Section] = {}
    try:
        for _ in range(nsections):
            (tag_len,) = struct.unpack_from("<I", data, off)
            off += 4
            tag = data[off : off + tag_len].decode("ascii")
            off += tag_len
            (desc_len,) = struct.unpack_from("<I", data, off)
            off += 4
            desc = json.loads(data[off : off + desc_len].decode("utf-8"))
            off += desc_len
            (payload_len,) = struct.unpack_from("<Q", data, off)
            off += 8
            payload = data[off : off + payload_len]
            if len(payload) != payload_len:
                raise CheckpointError("format", "section payload extends past file end")
            off += payload_len
            arrays: dict[str, np.ndarray] = {}
            pos = 0
            for entry in desc["arrays"]:
                shape = tuple(entry["shape"])
                nbytes = int(np.prod(shape, dtype=np.int64)) * 8 if shape else 8
                raw = payload[pos : pos + nbytes]
                if len(raw) != nbytes:
                    raise CheckpointError("format", f"array {entry['name']!r} payload short")
                arrays[entry["name"]] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
                pos += nbytes
            sections[tag] = Section(tag, arrays, desc.get("meta", {}))
        if off != end:
            raise CheckpointError("format", "trailing bytes after last section")
    except CheckpointError:
        raise
    except (struct.error, ValueError, KeyError, UnicodeDecodeError) as exc:
        raise CheckpointError("format", f"malformed section structure: {exc}") from exc
    return sections
