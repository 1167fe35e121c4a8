"""File formats: PCM16 WAV audio, seismic trace CSV, and JSON-lines records.

All parsers report the byte offset of the first fault so a bad file can be
inspected directly.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .errors import ParseError
from .signals import AudioClip, SeismicTrace

_PCM16_FULL_SCALE = 32767.0


def save_wav(clip: AudioClip, path: str | Path) -> None:
    """Write a mono PCM16 WAV file; samples are clamped to [-1, 1]."""
    x = np.clip(clip.samples, -1.0, 1.0)
    ints = np.round(x * _PCM16_FULL_SCALE).astype(np.int16)
    data = ints.tobytes()
    rate = int(round(clip.frame_rate_hz))
    fmt = struct.pack("<HHIIHH", 1, 1, rate, rate * 2, 2, 16)
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt
    body += b"data" + struct.pack("<I", len(data)) + data
    with open(path, "wb") as fh:
        fh.write(b"RIFF" + struct.pack("<I", len(body)) + body)


def load_wav(path: str | Path) -> AudioClip:
    """Read a mono PCM16 WAV file written by save_wav or compatible tools."""
    raw = Path(path).read_bytes()
    if len(raw) < 12:
        raise ParseError("file too short for a RIFF header", byte_offset=0)
    if raw[0:4] != b"RIFF":
        raise ParseError("missing RIFF magic", byte_offset=0)
    if raw[8:12] != b"WAVE":
        raise ParseError("missing WAVE form type", byte_offset=8)

    offset = 12
    rate = None
    samples = None
    while offset + 8 <= len(raw):
        chunk_id = raw[offset:offset + 4]
        (size,) = struct.unpack_from("<I", raw, offset + 4)
        body_start = offset + 8
        if body_start + size > len(raw):
            raise ParseError(f"truncated {chunk_id!r} chunk", byte_offset=len(raw))
        if chunk_id == b"fmt ":
            if size < 16:
                raise ParseError("fmt chunk too short", byte_offset=body_start)
            audio_format, channels, rate_raw, _, _, bits = struct.unpack_from(
                "<HHIIHH", raw, body_start)
            if audio_format != 1:
                raise ParseError(f"unsupported audio format {audio_format}",
                                 byte_offset=body_start)
            if channels != 1:
                raise ParseError(f"expected mono, got {channels} channels",
                                 byte_offset=body_start + 2)
            if bits != 16:
                raise ParseError(f"expected 16-bit samples, got {bits}",
                                 byte_offset=body_start + 14)
            rate = float(rate_raw)
        elif chunk_id == b"data":
            if rate is None:
                raise ParseError("data chunk before fmt chunk", byte_offset=offset)
            if size % 2 != 0:
                raise ParseError("odd data chunk size for 16-bit samples",
                                 byte_offset=offset + 4)
            ints = np.frombuffer(raw, dtype="<i2", count=size // 2, offset=body_start)
            samples = np.clip(ints.astype(np.float64) / _PCM16_FULL_SCALE, -1.0, 1.0)
        # chunks are word-aligned: odd sizes carry a pad byte
        offset = body_start + size + (size % 2)
    if samples is None:
        raise ParseError("no data chunk found", byte_offset=len(raw))
    return AudioClip(samples=samples, frame_rate_hz=rate)


def save_trace_csv(trace: SeismicTrace, path: str | Path) -> None:
    """One sample per line after a '# sample_rate_hz=...' header.

    repr() formatting keeps the round trip bit-identical.
    """
    lines = [f"# sample_rate_hz={trace.sample_rate_hz!r}"]
    if trace.start_time_s != 0.0:
        lines.append(f"# start_time_s={trace.start_time_s!r}")
    lines.extend(repr(float(v)) for v in trace.samples)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def load_trace_csv(path: str | Path) -> SeismicTrace:
    raw = Path(path).read_bytes()
    text = raw.decode("ascii", errors="replace")
    offset = 0
    rate = None
    start_time = 0.0
    values: list[float] = []
    for line in text.splitlines(keepends=True):
        stripped = line.strip()
        if stripped.startswith("#"):
            key, _, val = stripped[1:].strip().partition("=")
            key = key.strip()
            try:
                if key == "sample_rate_hz":
                    rate = float(val)
                elif key == "start_time_s":
                    start_time = float(val)
                else:
                    raise ValueError
            except ValueError:
                raise ParseError(f"bad header line {stripped!r}", byte_offset=offset)
        elif stripped:
            if rate is None:
                raise ParseError("sample before the sample_rate_hz header",
                                 byte_offset=offset)
            try:
                values.append(float(stripped))
            except ValueError:
                raise ParseError(f"bad sample value {stripped!r}", byte_offset=offset)
        offset += len(line.encode("ascii", errors="replace"))
    if rate is None:
        raise ParseError("missing sample_rate_hz header", byte_offset=0)
    return SeismicTrace(samples=np.array(values, dtype=np.float64),
                        sample_rate_hz=rate, start_time_s=start_time)


def trace_to_record(trace: SeismicTrace) -> dict:
    return {
        "sample_rate_hz": trace.sample_rate_hz,
        "start_time_s": trace.start_time_s,
        "samples": [float(v) for v in trace.samples],
    }


def trace_from_record(record: dict) -> SeismicTrace:
    try:
        return SeismicTrace(
            samples=np.array(record["samples"], dtype=np.float64),
            sample_rate_hz=float(record["sample_rate_hz"]),
            start_time_s=float(record.get("start_time_s", 0.0)),
        )
    except KeyError as exc:
        raise ParseError(f"trace record missing field {exc}")


def save_traces_jsonl(traces: list[SeismicTrace], path: str | Path) -> None:
    """One JSON object per line, one trace per object."""
    with open(path, "w", encoding="ascii") as fh:
        for trace in traces:
            fh.write(json.dumps(trace_to_record(trace)) + "\n")


def load_traces_jsonl(path: str | Path) -> list[SeismicTrace]:
    return [trace_from_record(rec) for rec in read_jsonl(path)]


def write_jsonl(records: list[dict], path: str | Path) -> None:
    with open(path, "w", encoding="ascii") as fh:
        for rec in records:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    """Parse a JSON-lines file; faults are located by byte offset."""
    raw = Path(path).read_bytes()
    records = []
    offset = 0
    for line in raw.splitlines(keepends=True):
        stripped = line.strip()
        if stripped:
            try:
                records.append(json.loads(stripped))
            except json.JSONDecodeError as exc:
                raise ParseError(f"bad JSON line: {exc.msg}",
                                 byte_offset=offset + exc.pos)
        offset += len(line)
    return records
