"""Binary container for per-utterance feature/target matrices.

Layout: a fixed header (magic, version, feature kind, context depth,
dimensions, utterance and frame counts) followed by one block per
utterance: a u32 frame count, the feature rows and, when present, the mask
rows, all little-endian f32.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import FormatError
from .features import KIND_IDS, KINDS_BY_ID, FeatureKind, FeatureMatrix

_MAGIC = b"SNRR"
_VERSION = 1
_HEAD = "<4sIBBBxIIIQ"


@dataclass
class RecordFile:
    """Decoded record file: metadata plus per-utterance arrays."""

    kind: FeatureKind | None
    context: int
    feat_dim: int
    mask_dim: int
    utterances: list

    @property
    def num_frames(self) -> int:
        return sum(f.shape[0] for f, _ in self.utterances)

    def feature_matrices(self):
        """Utterances as (FeatureMatrix, mask) pairs (kind must be set)."""
        if self.kind is None:
            raise FormatError("record file carries raw matrices, not features")
        return [
            (FeatureMatrix(rows, self.kind, self.context), mask)
            for rows, mask in self.utterances
        ]


class RecordWriter:
    """Single-writer, append-per-utterance record file."""

    def __init__(self, path, kind: FeatureKind | None, feat_dim: int, context: int = 1, mask_dim: int = 129):
        self.kind = kind
        self.feat_dim = feat_dim
        self.context = context
        self.mask_dim = mask_dim
        self._n_utts = 0
        self._n_frames = 0
        self._fh = open(path, "wb")
        self._write_header()

    def _write_header(self):
        self._fh.write(
            struct.pack(
                _HEAD,
                _MAGIC,
                _VERSION,
                KIND_IDS[self.kind],
                self.context,
                1 if self.mask_dim else 0,
                self.feat_dim,
                self.mask_dim,
                self._n_utts,
                self._n_frames,
            )
        )

    def add(self, features, mask=None) -> None:
        """Append one utterance block."""
        rows = features.rows if isinstance(features, FeatureMatrix) else np.asarray(features)
        if rows.ndim != 2 or rows.shape[1] != self.feat_dim:
            raise ValueError(f"expected L x {self.feat_dim} features, got {rows.shape}")
        if not np.all(np.isfinite(rows)):
            raise ValueError("feature values must be finite")
        if self.mask_dim:
            mask = np.asarray(mask)
            if mask.shape != (rows.shape[0], self.mask_dim):
                raise ValueError(f"expected L x {self.mask_dim} targets, got {mask.shape}")
        elif mask is not None:
            raise ValueError("this record file does not store targets")
        self._fh.write(struct.pack("<I", rows.shape[0]))
        self._fh.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())
        if self.mask_dim:
            self._fh.write(np.ascontiguousarray(mask, dtype="<f4").tobytes())
        self._n_utts += 1
        self._n_frames += rows.shape[0]

    def close(self) -> None:
        self._fh.seek(0)
        self._write_header()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _take(raw: bytes, offset: int, count: int, what: str):
    end = offset + count
    if len(raw) < end:
        raise FormatError(f"record file is truncated ({what})")
    return raw[offset:end], end


def read_records(path) -> RecordFile:
    """Decode a record file written by RecordWriter."""
    with open(path, "rb") as fh:
        raw = fh.read()
    head, offset = _take(raw, 0, struct.calcsize(_HEAD), "header")
    magic, version, kind_id, context, has_mask, feat_dim, mask_dim, n_utts, n_frames = (
        struct.unpack(_HEAD, head)
    )
    if magic != _MAGIC:
        raise FormatError("not a record file (bad magic)")
    if version != _VERSION:
        raise FormatError(f"unsupported record format version {version}")
    if kind_id not in KINDS_BY_ID:
        raise FormatError(f"unknown feature kind id {kind_id}")
    if bool(has_mask) != bool(mask_dim):
        raise FormatError("inconsistent mask header fields")
    utterances = []
    seen_frames = 0
    for _ in range(n_utts):
        count_raw, offset = _take(raw, offset, 4, "utterance length")
        (n,) = struct.unpack("<I", count_raw)
        feat_raw, offset = _take(raw, offset, 4 * n * feat_dim, "features")
        rows = np.frombuffer(feat_raw, dtype="<f4").astype(np.float64).reshape(n, feat_dim)
        mask = None
        if mask_dim:
            mask_raw, offset = _take(raw, offset, 4 * n * mask_dim, "targets")
            mask = np.frombuffer(mask_raw, dtype="<f4").astype(np.float64).reshape(n, mask_dim)
        utterances.append((rows, mask))
        seen_frames += n
    if offset != len(raw):
        raise FormatError("record file has trailing bytes")
    if seen_frames != n_frames:
        raise FormatError("frame count in header does not match the blocks")
    return RecordFile(KINDS_BY_ID[kind_id], context, feat_dim, mask_dim, utterances)
