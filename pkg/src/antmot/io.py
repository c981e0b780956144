"""File formats: detection/ground-truth/trajectory CSV, embedding sidecars
and key=value config files.

Detection rows are MOTChallenge-compatible:
``frame,id,left,top,width,height,conf,-1,-1,-1`` with exactly 10 fields,
1-based frame numbers on disk (0-based everywhere in memory; the conversion
happens only here), id -1 for raw detections, and non-decreasing frames.
Embedding rows are ``frame,det_index,e0,...,e127`` where ``det_index`` is the
0-based position of the detection within its frame.

All real numbers are written with 6 decimals and a '.' separator regardless
of locale, so write -> read -> write round-trips are byte-identical.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .descriptor import normalize
from .geometry import BoundingBox
from .tracker import Detection

__all__ = [
    "ParseError",
    "MotRow",
    "read_mot_file",
    "write_mot_file",
    "read_embedding_file",
    "write_embedding_file",
    "detections_by_frame",
    "gt_by_frame",
    "outputs_to_rows",
    "read_config_file",
]


class ParseError(ValueError):
    """A malformed input file; carries the file path and 1-based line number."""

    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


def _fmt(x: float) -> str:
    return f"{x:.6f}"


@dataclass(frozen=True)
class MotRow:
    """One CSV row, frame already converted to the in-memory 0-based index."""

    frame: int
    track_id: int
    left: float
    top: float
    width: float
    height: float
    confidence: float


def read_mot_file(path) -> list[MotRow]:
    path = Path(path)
    rows: list[MotRow] = []
    last_frame = None
    with path.open("r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != 10:
                raise ParseError(path, line_no, f"expected 10 fields, got {len(fields)}")
            try:
                frame = int(fields[0])
                track_id = int(fields[1])
                left, top, width, height, conf = (float(f) for f in fields[2:7])
                trailing = [float(f) for f in fields[7:]]
            except ValueError:
                raise ParseError(path, line_no, f"unparseable numeric field in {line!r}") from None
            if frame < 1:
                raise ParseError(path, line_no, f"frame numbers are 1-based, got {frame}")
            if any(t != -1.0 for t in trailing):
                raise ParseError(path, line_no, "trailing fields must be -1")
            if last_frame is not None and frame < last_frame:
                raise ParseError(path, line_no, f"frames must be non-decreasing, got {frame} after {last_frame}")
            if width <= 0 or height <= 0:
                raise ParseError(path, line_no, f"box size must be positive, got {width}x{height}")
            last_frame = frame
            rows.append(MotRow(frame - 1, track_id, left, top, width, height, conf))
    return rows


def write_mot_file(path, rows) -> None:
    rows = sorted(rows, key=lambda r: r.frame)
    with Path(path).open("w", encoding="ascii", newline="\n") as fh:
        for r in rows:
            fh.write(
                f"{r.frame + 1},{r.track_id},{_fmt(r.left)},{_fmt(r.top)},"
                f"{_fmt(r.width)},{_fmt(r.height)},{_fmt(r.confidence)},-1,-1,-1\n"
            )


def read_embedding_file(path, dim: int = 128) -> dict[tuple[int, int], np.ndarray]:
    """Map (0-based frame, detection index within frame) to a descriptor."""
    path = Path(path)
    embeddings: dict[tuple[int, int], np.ndarray] = {}
    with path.open("r", encoding="ascii") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            if len(fields) != dim + 2:
                raise ParseError(path, line_no, f"expected {dim + 2} fields, got {len(fields)}")
            try:
                frame = int(fields[0])
                det_index = int(fields[1])
                vector = np.array([float(f) for f in fields[2:]])
            except ValueError:
                raise ParseError(path, line_no, "unparseable numeric field") from None
            if frame < 1:
                raise ParseError(path, line_no, f"frame numbers are 1-based, got {frame}")
            key = (frame - 1, det_index)
            if key in embeddings:
                raise ParseError(path, line_no, f"duplicate embedding for frame {frame} index {det_index}")
            embeddings[key] = vector
    return embeddings


def write_embedding_file(path, entries) -> None:
    """Write (0-based frame, det index, vector) triples, sorted by frame."""
    entries = sorted(entries, key=lambda e: (e[0], e[1]))
    with Path(path).open("w", encoding="ascii", newline="\n") as fh:
        for frame, det_index, vector in entries:
            comps = ",".join(_fmt(v) for v in vector)
            fh.write(f"{frame + 1},{det_index},{comps}\n")


def detections_by_frame(
    rows, embeddings: dict[tuple[int, int], np.ndarray] | None = None
) -> dict[int, list[Detection]]:
    """Group detection rows per frame, attaching descriptors when given.

    Embedding vectors are renormalized on ingestion. When embeddings are
    provided, every detection must have exactly one matching (frame, index)
    row and vice versa; any mismatch raises ``ValueError``.
    """
    frames: dict[int, list[Detection]] = {}
    keys: list[tuple[int, int]] = []
    for row in rows:
        box = BoundingBox(row.left, row.top, row.width, row.height)
        in_frame = frames.setdefault(row.frame, [])
        keys.append((row.frame, len(in_frame)))
        descriptor = None
        if embeddings is not None:
            descriptor = embeddings.get(keys[-1])
            if descriptor is None:
                raise ValueError(
                    f"no embedding for detection {len(in_frame)} of frame {row.frame + 1}"
                )
            descriptor = normalize(descriptor)
        in_frame.append(Detection(box, min(max(row.confidence, 0.0), 1.0), descriptor))
    if embeddings is not None and len(embeddings) != len(keys):
        extras = sorted(set(embeddings) - set(keys))[:3]
        raise ValueError(
            f"{len(embeddings)} embedding rows for {len(keys)} detections "
            f"(first orphans: {[(f + 1, i) for f, i in extras]})"
        )
    return frames


def gt_by_frame(rows) -> dict[int, list[tuple[int, BoundingBox]]]:
    """Group ground-truth rows into {frame: [(id, box), ...]}."""
    frames: dict[int, list[tuple[int, BoundingBox]]] = {}
    for row in rows:
        box = BoundingBox(row.left, row.top, row.width, row.height)
        frames.setdefault(row.frame, []).append((row.track_id, box))
    return frames


def outputs_to_rows(outputs) -> list[MotRow]:
    """Flatten tracker frame outputs into writable trajectory rows."""
    rows: list[MotRow] = []
    for out in outputs:
        for track_id, box in out.tracks:
            rows.append(
                MotRow(out.frame_index, track_id, box.left, box.top, box.width, box.height, 1.0)
            )
    return rows


def read_config_file(path) -> dict[str, str]:
    """Parse ``key=value`` lines; '#' starts a comment, blank lines ignored."""
    path = Path(path)
    values: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(path, line_no, f"expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values
