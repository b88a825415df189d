"""Right-continuous path containers and the on-disk formats.

A path stores its grid, its (possibly matrix-valued) states, the indices
where jumps were inserted together with the left limits there, and the RNG
key that produced it.  Two serializations ship: a human-readable CSV and a
compact binary layout; both round-trip bit-exactly.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field

import numpy as np

CSV_MAGIC = "# skewprod-path v1"
BIN_MAGIC = b"SKPH"
BIN_VERSION = 1

GRID_TOL = 1e-12


@dataclass
class CadlagPath:
    """Time grid plus cadlag states; jump_marks maps a grid index to the
    left limit at that time (the stored point is the post-jump value)."""

    times: np.ndarray
    points: np.ndarray
    kind: str = "ambient"
    jump_marks: dict = field(default_factory=dict)
    seed: tuple = (0, 0)
    exit_index: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.points = np.asarray(self.points, dtype=float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("path times must be strictly increasing")

    def __len__(self):
        return len(self.times)

    @property
    def value_shape(self):
        return self.points.shape[1:]

    def left_limit(self, i: int):
        if i in self.jump_marks:
            return self.jump_marks[i]
        return self.points[i - 1] if i > 0 else self.points[0]

    def grid_is_uniform_except_jumps(self) -> bool:
        dts = np.diff(self.times)
        regular = [dts[i] for i in range(len(dts))
                   if (i + 1) not in self.jump_marks and i not in
                   {j - 1 for j in self.jump_marks}]
        if len(regular) < 2:
            return True
        return float(np.max(regular) - np.min(regular)) <= GRID_TOL * max(1.0, np.max(regular))

    def displacement_norms(self) -> np.ndarray:
        flat = self.points.reshape(len(self.times), -1)
        return np.linalg.norm(np.diff(flat, axis=0), axis=1)

    def continuity_violations(self, sigma: float, dt: float) -> list[int]:
        """Indices whose step displacement exceeds the 6 sigma sqrt(dt)
        diagnostic, excluding inserted jumps."""
        bound = 6.0 * sigma * np.sqrt(dt)
        disp = self.displacement_norms()
        return [i + 1 for i in range(len(disp))
                if disp[i] > bound and (i + 1) not in self.jump_marks]


@dataclass
class TimeChange:
    """Nondecreasing clock a_t computed from a radial path."""

    grid: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values[0] != 0.0:
            raise ValueError("time change must start at 0")
        if np.any(np.diff(self.values) < -1e-12):
            raise ValueError("time change must be nondecreasing")

    def first_crossing(self, level: float) -> int | None:
        idx = np.searchsorted(self.values, level)
        return int(idx) if idx < len(self.values) else None


# --- CSV format --------------------------------------------------------------

def write_path_csv(path: CadlagPath, fh) -> None:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "w", newline="")
        close = True
    try:
        shape = "x".join(str(s) for s in path.value_shape) or "1"
        fh.write(CSV_MAGIC + "\n")
        fh.write(f"# kind={path.kind} shape={shape} seed={path.seed[0]},{path.seed[1]}"
                 f" exit={-1 if path.exit_index is None else path.exit_index}\n")
        width = int(np.prod(path.value_shape)) if path.value_shape else 1
        fh.write("time," + ",".join(f"c{i}" for i in range(width)) + ",jump_flag\n")
        flat = path.points.reshape(len(path.times), width)
        for i, t in enumerate(path.times):
            if i in path.jump_marks:
                pre = np.asarray(path.jump_marks[i], dtype=float).reshape(width)
                fh.write(_row(t, pre, 2))
            fh.write(_row(t, flat[i], 1 if i in path.jump_marks else 0))
    finally:
        if close:
            fh.close()


def _row(t, values, flag) -> str:
    return f"{t!r}," + ",".join(repr(float(v)) for v in values) + f",{flag}\n"


def read_path_csv(fh) -> CadlagPath:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "r")
        close = True
    try:
        magic = fh.readline().strip()
        if magic != CSV_MAGIC:
            raise ValueError(f"not a skewprod path file (magic {magic!r})")
        meta = dict(item.split("=", 1) for item in fh.readline()[1:].strip().split())
        shape = tuple(int(s) for s in meta["shape"].split("x"))
        seed = tuple(int(s) for s in meta["seed"].split(","))
        exit_index = int(meta.get("exit", "-1"))
        fh.readline()  # column header
        times, rows, marks = [], [], {}
        pending_pre = None
        for line in fh:
            parts = line.strip().split(",")
            if not parts or parts == [""]:
                continue
            t = float(parts[0])
            flag = int(parts[-1])
            vals = np.array([float(v) for v in parts[1:-1]])
            if flag == 2:
                pending_pre = vals
                continue
            idx = len(times)
            times.append(t)
            rows.append(vals)
            if flag == 1:
                marks[idx] = (pending_pre if pending_pre is not None else vals).reshape(shape)
                pending_pre = None
        pts = np.array(rows).reshape(len(times), *shape)
        if shape == (1,):
            pts = pts
        return CadlagPath(np.array(times), pts, meta["kind"], marks, seed,
                          None if exit_index < 0 else exit_index)
    finally:
        if close:
            fh.close()


# --- binary format -----------------------------------------------------------
#
# layout (little endian):
#   4s   magic "SKPH"
#   u32  version
#   u32  kind length, then kind bytes (ascii)
#   u32  rank, rank * u32 value shape
#   u64  row count
#   i64  exit index (-1 if none)
#   2*u64 seed key
#   u64  jump count, then jump records: u64 index + shapeprod * f64 left limit
#   rows: count * (f64 time + shapeprod * f64 value)

def write_path_bin(path: CadlagPath, fh) -> None:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "wb")
        close = True
    try:
        shape = path.value_shape or (1,)
        width = int(np.prod(shape))
        fh.write(BIN_MAGIC)
        fh.write(struct.pack("<I", BIN_VERSION))
        kind = path.kind.encode()
        fh.write(struct.pack("<I", len(kind)) + kind)
        fh.write(struct.pack("<I", len(shape)))
        fh.write(struct.pack(f"<{len(shape)}I", *shape))
        fh.write(struct.pack("<Q", len(path.times)))
        fh.write(struct.pack("<q", -1 if path.exit_index is None else path.exit_index))
        fh.write(struct.pack("<QQ", int(path.seed[0]) & (2**64 - 1),
                             int(path.seed[1]) & (2**64 - 1)))
        fh.write(struct.pack("<Q", len(path.jump_marks)))
        for idx in sorted(path.jump_marks):
            fh.write(struct.pack("<Q", idx))
            fh.write(np.asarray(path.jump_marks[idx], dtype="<f8").reshape(width).tobytes())
        block = np.empty((len(path.times), width + 1), dtype="<f8")
        block[:, 0] = path.times
        block[:, 1:] = path.points.reshape(len(path.times), width)
        fh.write(block.tobytes())
    finally:
        if close:
            fh.close()


def read_path_bin(fh) -> CadlagPath:
    close = False
    if isinstance(fh, str):
        fh = open(fh, "rb")
        close = True
    try:
        if fh.read(4) != BIN_MAGIC:
            raise ValueError("not a skewprod binary path file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != BIN_VERSION:
            raise ValueError(f"unsupported path format version {version}")
        (klen,) = struct.unpack("<I", fh.read(4))
        kind = fh.read(klen).decode()
        (rank,) = struct.unpack("<I", fh.read(4))
        shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        (count,) = struct.unpack("<Q", fh.read(8))
        (exit_index,) = struct.unpack("<q", fh.read(8))
        seed = struct.unpack("<QQ", fh.read(16))
        (njumps,) = struct.unpack("<Q", fh.read(8))
        width = int(np.prod(shape))
        marks = {}
        for _ in range(njumps):
            (idx,) = struct.unpack("<Q", fh.read(8))
            marks[int(idx)] = np.frombuffer(fh.read(8 * width), dtype="<f8").reshape(shape).copy()
        block = np.frombuffer(fh.read(8 * count * (width + 1)), dtype="<f8") \
            .reshape(count, width + 1).copy()
        return CadlagPath(block[:, 0], block[:, 1:].reshape(count, *shape), kind,
                          marks, tuple(int(s) for s in seed),
                          None if exit_index < 0 else int(exit_index))
    finally:
        if close:
            fh.close()
