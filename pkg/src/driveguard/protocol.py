"""Serial packet framing, ADC conversion, and session file formats.

The headset ships samples over a byte stream framed as

    0xAA 0xAA <len> <payload ...> <checksum>

with len <= 169 and checksum = 0xFF - (sum(payload) mod 256). A raw EEG
sample is the payload row [0x80, 0x02, hi, lo] holding a big-endian
signed 16-bit value. The parser below survives arbitrary garbage, split
writes, and corrupted frames while never emitting a packet whose
checksum did not verify, and it recovers every valid frame embedded in
the noise by rescanning from the byte after a failed sync.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .model import (
    ADC_MAX,
    ADC_MIN,
    Device,
    FeatureVector,
    SubjectSession,
    TaskLabel,
)

SYNC = 0xAA
MAX_PAYLOAD = 169
RAW_CODE = 0x80
RAW_LEN = 2

# transfer function of the analog front end: full scale 1.8 V over a
# 4096-count ADC, behind a gain-2000 amplifier
INPUT_RANGE_VOLTS = 1.8
ADC_COUNTS = 4096
AMP_GAIN = 2000.0
VOLTS_PER_COUNT = INPUT_RANGE_VOLTS / ADC_COUNTS / AMP_GAIN
UV_PER_COUNT = VOLTS_PER_COUNT * 1e6

# fs-vs-timestamp agreement required of session files, in seconds
TIMESTAMP_TOLERANCE_S = 1e-6


class PacketError(ValidationError):
    """Raised when constructing a packet from out-of-range inputs."""


class SessionFormatError(ValidationError):
    """A session CSV or manifest violates the documented layout."""


def raw_to_voltage(raw: int) -> float:
    """Electrode voltage in volts for one signed ADC count."""
    if not (ADC_MIN <= raw <= ADC_MAX):
        raise PacketError(f"raw value {raw} outside ADC range [{ADC_MIN}, {ADC_MAX}]")
    return raw * VOLTS_PER_COUNT


def raw_to_microvolts(raw) -> np.ndarray:
    """Vectorised ADC-to-microvolt conversion (no range check)."""
    return np.asarray(raw, dtype=np.float64) * UV_PER_COUNT


def checksum(payload: bytes) -> int:
    return 0xFF - (sum(payload) & 0xFF)


def encode_packet(raw: int) -> bytes:
    """Frame one raw sample for the wire."""
    if not (ADC_MIN <= raw <= ADC_MAX):
        raise PacketError(f"raw value {raw} outside ADC range [{ADC_MIN}, {ADC_MAX}]")
    u = raw & 0xFFFF
    payload = bytes((RAW_CODE, RAW_LEN, (u >> 8) & 0xFF, u & 0xFF))
    return bytes((SYNC, SYNC, len(payload))) + payload + bytes((checksum(payload),))


@dataclass(frozen=True)
class RawPacket:
    """A checksum-verified payload, with the decoded sample when present."""

    payload: bytes
    raw_value: int | None


def _decode_raw_value(payload: bytes):
    # walk the code/value rows inside a verified payload
    i = 0
    n = len(payload)
    while i < n:
        code = payload[i]
        if code >= 0x80:
            if i + 1 >= n:
                return None
            vlen = payload[i + 1]
            if i + 2 + vlen > n:
                return None
            if code == RAW_CODE and vlen == RAW_LEN:
                value = (payload[i + 2] << 8) | payload[i + 3]
                if value >= 0x8000:
                    value -= 0x10000
                return value
            i += 2 + vlen
        else:
            # single-byte rows carry one value byte
            i += 2
    return None


class PacketParser:
    """Incremental frame scanner over an unreliable byte stream.

    Feed it arbitrary chunks; it returns the packets completed by each
    chunk and counts corrupt frames (bad length or failed checksum).
    Memory stays bounded by one maximal frame regardless of input, and a
    failed candidate frame is rescanned from its second byte so a valid
    frame overlapping the garbage is never lost.
    """

    def __init__(self):
        self._pending = b""
        self.corrupt_frames = 0
        self.packets_emitted = 0

    def feed(self, data: bytes):
        out = []
        buf = self._pending + bytes(data)
        while True:
            start = buf.find(b"\xaa\xaa")
            if start < 0:
                # a lone trailing 0xAA may be half a sync pair
                buf = buf[-1:] if buf.endswith(b"\xaa") else b""
                break
            buf = buf[start:]
            if len(buf) < 3:
                break
            length = buf[2]
            if length == SYNC:
                # runs of sync bytes: slide one and keep looking
                buf = buf[1:]
                continue
            if length > MAX_PAYLOAD:
                self.corrupt_frames += 1
                buf = buf[1:]
                continue
            frame_len = 3 + length + 1
            if len(buf) < frame_len:
                break
            payload = buf[3:3 + length]
            if buf[3 + length] == checksum(payload):
                out.append(RawPacket(payload=payload, raw_value=_decode_raw_value(payload)))
                buf = buf[frame_len:]
            else:
                self.corrupt_frames += 1
                buf = buf[1:]
        self._pending = bytes(buf)
        self.packets_emitted += len(out)
        return out


def decode_stream(data: bytes, parser: PacketParser | None = None):
    """One-shot or resumable decode; returns (packets, parser)."""
    if parser is None:
        parser = PacketParser()
    return parser.feed(data), parser


def session_to_packets(session: SubjectSession) -> bytes:
    """Serialise a single-channel session as a wire-format byte stream."""
    if len(session.channels) != 1:
        raise PacketError(
            f"packet streams carry one channel, session has {len(session.channels)}"
        )
    return b"".join(encode_packet(int(v)) for v in session.raw[0])


def packets_to_samples(data: bytes):
    """Decode a byte stream into (raw sample array, corrupt frame count)."""
    packets, parser = decode_stream(data)
    values = [p.raw_value for p in packets if p.raw_value is not None]
    return np.array(values, dtype=np.int32), parser.corrupt_frames


# ---------------------------------------------------------------------------
# session CSV + manifest


def _expected_header(n_channels):
    cols = ["t_s", "raw"]
    cols += [f"raw_ch{i}" for i in range(2, n_channels + 1)]
    return cols


def read_manifest(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            manifest = json.load(fh)
    except OSError as exc:
        raise SessionFormatError(f"cannot read manifest {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SessionFormatError(f"manifest {path} is not valid JSON: {exc}") from exc
    required = ("subject_id", "task", "fs_hz", "device", "channels")
    missing = [k for k in required if k not in manifest]
    if missing:
        raise SessionFormatError(f"manifest {path} missing keys: {', '.join(missing)}")
    return manifest


def read_session(csv_path, manifest_path) -> SubjectSession:
    """Load and validate a session from its CSV and JSON manifest."""
    manifest = read_manifest(manifest_path)
    task = TaskLabel.from_string(str(manifest["task"]))
    device = Device.from_string(str(manifest["device"]))
    fs = int(manifest["fs_hz"])
    if fs != device.fs_hz:
        raise SessionFormatError(
            f"manifest fs {fs} Hz does not match device {device.value} "
            f"({device.fs_hz} Hz)"
        )
    channels = tuple(str(c) for c in manifest["channels"])
    if not channels:
        raise SessionFormatError("manifest declares no channels")

    try:
        with open(csv_path, "r", encoding="utf-8", newline="") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise SessionFormatError(f"cannot read session csv {csv_path}: {exc}") from exc
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise SessionFormatError(f"{csv_path} is empty")

    expected = _expected_header(len(channels))
    header = lines[0].split(",")
    if header != expected:
        raise SessionFormatError(
            f"{csv_path} header {','.join(header)!r} does not match expected "
            f"{','.join(expected)!r} for {len(channels)} channel(s)"
        )
    n = len(lines) - 1
    if n == 0:
        raise SessionFormatError(f"{csv_path} has a header but no samples")

    t = np.empty(n)
    raw = np.empty((len(channels), n), dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        if len(parts) != len(expected):
            raise SessionFormatError(
                f"{csv_path} line {i + 2}: {len(parts)} fields, expected {len(expected)}"
            )
        try:
            t[i] = float(parts[0])
            for c in range(len(channels)):
                raw[c, i] = int(parts[c + 1])
        except ValueError as exc:
            raise SessionFormatError(f"{csv_path} line {i + 2}: {exc}") from exc

    if t[0] < 0:
        raise SessionFormatError(f"{csv_path}: negative start timestamp {t[0]}")
    if n > 1:
        deltas = np.diff(t)
        worst = np.abs(deltas - 1.0 / fs).max()
        if worst > TIMESTAMP_TOLERANCE_S:
            raise SessionFormatError(
                f"{csv_path}: timestamp spacing deviates from 1/{fs} s by "
                f"{worst:.3e} s (tolerance {TIMESTAMP_TOLERANCE_S:.0e})"
            )
    if raw.min() < ADC_MIN or raw.max() > ADC_MAX:
        raise SessionFormatError(
            f"{csv_path}: raw samples outside ADC range [{ADC_MIN}, {ADC_MAX}]"
        )

    return SubjectSession(
        subject_id=str(manifest["subject_id"]),
        task=task,
        device=device,
        fs_hz=fs,
        channels=channels,
        raw=raw.astype(np.int32),
    )


def write_session(session: SubjectSession, csv_path, manifest_path):
    """Write a session in the exact format read_session accepts."""
    header = ",".join(_expected_header(len(session.channels)))
    fs = session.fs_hz
    rows = [header]
    for i in range(session.n_samples):
        # i/fs is exact in 9 decimals for the supported power-of-two rates
        cells = [f"{i / fs:.9f}"] + [str(int(v)) for v in session.raw[:, i]]
        rows.append(",".join(cells))
    with open(csv_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")
    manifest = {
        "subject_id": session.subject_id,
        "task": session.task.value,
        "fs_hz": session.fs_hz,
        "device": session.device.value,
        "channels": list(session.channels),
    }
    with open(manifest_path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


# ---------------------------------------------------------------------------
# ARFF export

ARFF_CLASS_VALUES = ",".join(t.value for t in TaskLabel)


def write_arff(vectors, relation: str, schema=None) -> str:
    """Render labelled feature vectors as an ARFF document string.

    All vectors must share one schema. An empty vector list is allowed
    when the schema is passed explicitly, yielding a header-only file.
    Output is byte-stable: fixed declaration order, %.6g numbers, LF
    line endings.
    """
    vectors = list(vectors)
    if vectors:
        first = vectors[0].schema
        for v in vectors[1:]:
            if v.schema != first:
                raise ValidationError(
                    "feature vectors disagree on schema: "
                    f"{first[:3]}... vs {v.schema[:3]}..."
                )
        if schema is not None and tuple(schema) != first:
            raise ValidationError("explicit schema does not match vector schema")
        schema = first
    elif schema is None:
        raise ValidationError("empty vector list needs an explicit schema")

    lines = [f"@relation {relation}", ""]
    for name in schema:
        lines.append(f"@attribute {name} numeric")
    lines.append(f"@attribute class {{{ARFF_CLASS_VALUES}}}")
    lines.append("")
    lines.append("@data")
    for v in vectors:
        cells = [f"{x:.6g}" for x in v.values]
        cells.append(v.label.value)
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def read_arff(path):
    """Parse an ARFF file produced by write_arff back into feature vectors.

    Understands only the subset this package emits: numeric attributes
    followed by one nominal class attribute.
    """
    schema = []
    vectors = []
    in_data = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("%"):
                continue
            low = line.lower()
            if low.startswith("@relation"):
                continue
            if low.startswith("@attribute"):
                parts = line.split(None, 2)
                if len(parts) < 3:
                    raise SessionFormatError(f"{path} line {lineno}: bad @attribute")
                name, kind = parts[1], parts[2].strip()
                if kind == "numeric":
                    schema.append(name)
                elif name == "class":
                    continue
                else:
                    raise SessionFormatError(
                        f"{path} line {lineno}: unsupported attribute type {kind!r}"
                    )
                continue
            if low.startswith("@data"):
                in_data = True
                continue
            if not in_data:
                raise SessionFormatError(f"{path} line {lineno}: data before @data")
            cells = line.split(",")
            if len(cells) != len(schema) + 1:
                raise SessionFormatError(
                    f"{path} line {lineno}: {len(cells)} fields, expected {len(schema) + 1}"
                )
            label = TaskLabel.from_string(cells[-1])
            try:
                values = tuple(float(c) for c in cells[:-1])
            except ValueError as exc:
                raise SessionFormatError(f"{path} line {lineno}: {exc}") from exc
            vectors.append(FeatureVector(values=values, schema=tuple(schema), label=label))
    if not schema:
        raise SessionFormatError(f"{path}: no numeric attributes found")
    return vectors
