"""Random environment: i.i.d. inverse-gamma weights on a rectangular window.

A weight ``d`` at shape parameter ``theta`` is ``1/G`` for ``G`` gamma(theta)
with unit scale, so ``log d = -log G``.  Only log-weights are ever stored.

The grid is indexed ``(column i, row j)`` with both axes inclusive of their
window bounds.  Path-orientation conventions (which axis direction a walk may
take) live in :mod:`lgpolymer.polymer`; this module is storage, sampling,
180-degree reversal and a small binary file format.
"""
from __future__ import annotations

import hashlib
import io
import struct
from dataclasses import dataclass, field

import numpy as np
from numpy.random import Generator, Philox, SeedSequence

#: refuse to allocate grids beyond this many cells
MAX_CELLS = 1 << 28

_MAGIC = b"LGENV1\x00\x00"
_FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sHxx d qqqq B7x Q")  # magic, version, theta, window, seed flag, seed


class EnvFileError(ValueError):
    """Corrupt or truncated environment file."""


class EnvVersionError(EnvFileError):
    """Environment file written by an unsupported format version."""


class CapacityError(RuntimeError):
    """Requested grid exceeds the configured cell budget."""


@dataclass(frozen=True)
class Window:
    """Inclusive rectangle of columns and rows."""

    col_min: int
    col_max: int
    row_min: int
    row_max: int

    def __post_init__(self) -> None:
        for name in ("col_min", "col_max", "row_min", "row_max"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)):
                raise ValueError(f"window bound {name} must be an integer, got {v!r}")
        if self.col_max < self.col_min or self.row_max < self.row_min:
            raise ValueError(f"empty window {self}")

    @property
    def n_cols(self) -> int:
        return self.col_max - self.col_min + 1

    @property
    def n_rows(self) -> int:
        return self.row_max - self.row_min + 1

    @property
    def n_cells(self) -> int:
        return self.n_cols * self.n_rows

    def contains(self, col: int, row: int) -> bool:
        return self.col_min <= col <= self.col_max and self.row_min <= row <= self.row_max

    def contains_box(self, col_lo: int, col_hi: int, row_lo: int, row_hi: int) -> bool:
        return (
            self.col_min <= col_lo
            and col_hi <= self.col_max
            and self.row_min <= row_lo
            and row_hi <= self.row_max
        )


@dataclass
class Environment:
    """Sampled (or derived) grid of log-weights on a window.

    ``log_weights`` has shape ``(n_cols, n_rows)`` and entry ``[i - col_min,
    j - row_min]`` is ``log d_{i,j}``.  ``seed`` is the integer used to sample
    the grid, or ``None`` for derived grids (reversals, file loads of such).
    """

    theta: float
    window: Window
    log_weights: np.ndarray = field(repr=False)
    seed: int | None = None

    def __post_init__(self) -> None:
        _check_theta(self.theta)
        expected = (self.window.n_cols, self.window.n_rows)
        if self.log_weights.shape != expected:
            raise ValueError(
                f"grid shape {self.log_weights.shape} does not match window {expected}"
            )
        if self.log_weights.dtype != np.float64:
            raise ValueError("log_weights must be float64")

    def log_weight(self, col: int, row: int) -> float:
        if not self.window.contains(col, row):
            raise ValueError(f"({col}, {row}) outside window {self.window}")
        w = self.window
        return float(self.log_weights[col - w.col_min, row - w.row_min])

    def box(self, col_lo: int, col_hi: int, row_lo: int, row_hi: int) -> np.ndarray:
        """View of the log-weight sub-grid for an inclusive box."""
        w = self.window
        if not w.contains_box(col_lo, col_hi, row_lo, row_hi):
            raise ValueError(
                f"box cols [{col_lo},{col_hi}] rows [{row_lo},{row_hi}] outside window {w}"
            )
        return self.log_weights[
            col_lo - w.col_min : col_hi - w.col_min + 1,
            row_lo - w.row_min : row_hi - w.row_min + 1,
        ]


def _check_theta(theta: float) -> None:
    if not (isinstance(theta, (int, float, np.floating)) and 0.0 < float(theta) < float("inf")):
        raise ValueError(f"theta must be a positive finite real, got {theta!r}")


def stream(seed: int, index: int) -> SeedSequence:
    """Independent child seed sequence for replicate ``index`` of root ``seed``.

    Children are keyed by index, not by spawn order, so any subset of
    replicates can be generated in any order with identical results.
    """
    return SeedSequence(entropy=seed, spawn_key=(index,))


def sample_environment(theta: float, window: Window, seed: int | SeedSequence) -> Environment:
    """Draw i.i.d. inverse-gamma log-weights on ``window``.

    Bit-exact reproducible from ``(theta, window, seed)`` for a fixed numpy
    version: the Philox stream is keyed by the seed alone and entries are
    filled in C order of the ``(col, row)`` grid.
    """
    _check_theta(theta)
    if window.n_cells > MAX_CELLS:
        raise CapacityError(f"window has {window.n_cells} cells, budget is {MAX_CELLS}")
    ss = seed if isinstance(seed, SeedSequence) else SeedSequence(entropy=seed)
    rng = Generator(Philox(ss))
    gammas = rng.gamma(shape=float(theta), scale=1.0, size=(window.n_cols, window.n_rows))
    log_w = -np.log(gammas)
    stored_seed = seed if isinstance(seed, int) else None
    return Environment(theta=float(theta), window=window, log_weights=log_w, seed=stored_seed)


def reverse_environment(env: Environment, z: int, n: int) -> Environment:
    """180-degree rotation of the grid on columns 1..z, rows 1..n.

    The reversed grid R has ``R[i, j] = d[z + 1 - i, n + 1 - j]``, defined on
    the window ``[1, z] x [1, n]`` which must lie inside ``env.window``.
    """
    if z < 1 or n < 1:
        raise ValueError(f"need z >= 1 and n >= 1, got z={z} n={n}")
    sub = env.box(1, z, 1, n)
    rev = np.ascontiguousarray(sub[::-1, ::-1])
    return Environment(
        theta=env.theta,
        window=Window(1, z, 1, n),
        log_weights=rev,
        seed=None,
    )


def save_environment(env: Environment, path) -> None:
    """Write the binary environment file (format documented in docs/formats.md)."""
    w = env.window
    header = _HEADER.pack(
        _MAGIC,
        _FORMAT_VERSION,
        env.theta,
        w.col_min,
        w.col_max,
        w.row_min,
        w.row_max,
        1 if env.seed is not None else 0,
        env.seed if env.seed is not None else 0,
    )
    payload = np.ascontiguousarray(env.log_weights, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(payload)


def load_environment(path) -> Environment:
    """Read a file written by :func:`save_environment`; bit-exact round trip."""
    with open(path, "rb") as fh:
        raw_header = fh.read(_HEADER.size)
        if len(raw_header) != _HEADER.size:
            raise EnvFileError(f"{path}: truncated header")
        magic, version, theta, c0, c1, r0, r1, has_seed, seed = _HEADER.unpack(raw_header)
        if magic != _MAGIC:
            raise EnvFileError(f"{path}: bad magic {magic!r}")
        if version != _FORMAT_VERSION:
            raise EnvVersionError(f"{path}: format version {version} not supported")
        try:
            window = Window(c0, c1, r0, r1)
        except ValueError as exc:
            raise EnvFileError(f"{path}: bad window in header: {exc}") from exc
        if window.n_cells > MAX_CELLS:
            raise EnvFileError(f"{path}: header window exceeds cell budget")
        payload = fh.read(window.n_cells * 8)
        if len(payload) != window.n_cells * 8:
            raise EnvFileError(
                f"{path}: payload truncated ({len(payload)} bytes, wanted {window.n_cells * 8})"
            )
        if fh.read(1) != b"":
            raise EnvFileError(f"{path}: trailing bytes after payload")
    grid = np.frombuffer(payload, dtype="<f8").astype(np.float64).reshape(
        window.n_cols, window.n_rows
    )
    return Environment(
        theta=theta,
        window=window,
        log_weights=grid,
        seed=seed if has_seed else None,
    )


def fingerprint(env: Environment) -> str:
    """Short content hash of an environment (weights, window, theta).

    Lets derived artifacts (curve families, reports) record which sampled
    field they came from without holding a reference to it.
    """
    h = hashlib.sha256()
    h.update(struct.pack(
        "<dqqqq",
        env.theta,
        env.window.col_min,
        env.window.col_max,
        env.window.row_min,
        env.window.row_max,
    ))
    h.update(np.ascontiguousarray(env.log_weights, dtype="<f8").tobytes())
    return h.hexdigest()[:16]
