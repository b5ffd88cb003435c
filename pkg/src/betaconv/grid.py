"""Tabulated functions on strictly increasing grids, and grid layouts."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, ParameterError

INTERPOLATIONS = ("monotone-cubic", "linear", "step")
EXTRAPOLATIONS = ("clamp", "power-law-tail")


@dataclass(frozen=True, eq=False)
class GridFn:
    """A function tabulated at ``xs`` with declared interpolation.

    ``step`` interpolation is right-continuous and is what empirical CDFs
    use. ``power-law-tail`` extrapolation continues the left edge as the
    power law through the first two nodes (the regime of regular variation
    at zero) and clamps on the right.
    """

    xs: np.ndarray
    ys: np.ndarray
    interpolation: str = "monotone-cubic"
    extrapolation: str = "clamp"
    _interp: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        xs = np.array(self.xs, dtype=float)
        ys = np.array(self.ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape:
            raise ParameterError("xs and ys must be 1-D arrays of equal length")
        if xs.size < 1:
            raise ParameterError("a grid needs at least one point")
        if np.any(np.diff(xs) <= 0):
            raise ParameterError("grid abscissae must be strictly increasing")
        if self.interpolation not in INTERPOLATIONS:
            raise ParameterError(f"unknown interpolation {self.interpolation!r}")
        if self.extrapolation not in EXTRAPOLATIONS:
            raise ParameterError(f"unknown extrapolation {self.extrapolation!r}")
        xs.setflags(write=False)
        ys.setflags(write=False)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        if self.interpolation == "monotone-cubic" and xs.size >= 2:
            object.__setattr__(self, "_interp", PchipInterpolator(xs, ys, extrapolate=False))

    def __len__(self):
        return self.xs.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys = self.xs, self.ys
        if self.interpolation == "step":
            idx = np.searchsorted(xs, x, side="right") - 1
            out = np.where(idx >= 0, ys[np.clip(idx, 0, None)], 0.0)
            return out if out.ndim else float(out)
        if xs.size == 1:
            out = np.full(x.shape, ys[0])
        elif self._interp is not None:
            out = self._interp(np.clip(x, xs[0], xs[-1]))
        else:
            out = np.interp(x, xs, ys)
        lo = x < xs[0]
        if self.extrapolation == "power-law-tail" and xs.size >= 2 and np.any(lo):
            y0, y1 = ys[0], ys[1]
            if y0 > 0 and y1 > 0 and xs[0] > 0:
                k = np.log(y1 / y0) / np.log(xs[1] / xs[0])
                with np.errstate(divide="ignore"):
                    out = np.where(lo, y0 * (np.maximum(x, 0.0) / xs[0]) ** k, out)
        out = np.where(x > xs[-1], ys[-1], out)
        if self.extrapolation == "clamp":
            out = np.where(lo, ys[0], out)
        return out if out.ndim else float(out)

    def is_cdf(self, tol: float = 0.0) -> bool:
        ys = self.ys
        return bool(np.all(np.diff(ys) >= -tol) and ys.min() >= -tol and ys.max() <= 1 + tol)

    def with_values(self, ys, **kw) -> "GridFn":
        opts = {"interpolation": self.interpolation, "extrapolation": self.extrapolation}
        opts.update(kw)
        return GridFn(self.xs, ys, **opts)

    def integral(self, a: float | None = None, b: float | None = None) -> float:
        """Trapezoidal integral of the tabulated values over ``[a, b]``."""
        xs, ys = self.xs, self.ys
        a = xs[0] if a is None else a
        b = xs[-1] if b is None else b
        inner = (xs > a) & (xs < b)
        px = np.concatenate([[a], xs[inner], [b]])
        py = np.concatenate([[self(a)], ys[inner], [self(b)]])
        return float(trapezoid(py, px))

    # -- serialization -------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write("x,y\n")
        for x, y in zip(self.xs, self.ys):
            buf.write(f"{x:.17g},{y:.17g}\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, **kw) -> "GridFn":
        """Read the ``x,y`` CSV format from a path or a text string."""
        if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source):
            text = Path(source).read_text()
        else:
            text = source
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["x", "y"]:
            raise DomainError("line 1: expected header 'x,y'")
        xs, ys = [], []
        for lineno, row in enumerate(rows[1:], start=2):
            if not row or not "".join(row).strip():
                continue
            if len(row) != 2:
                raise DomainError(f"line {lineno}: expected 2 fields, got {len(row)}")
            try:
                xs.append(float(row[0]))
                ys.append(float(row[1]))
            except ValueError as exc:
                raise DomainError(f"line {lineno}: {exc}") from None
        if len(xs) > 1 and np.any(np.diff(xs) <= 0):
            bad = int(np.argmin(np.diff(xs) > 0)) + 3
            raise DomainError(f"line {bad}: x values must be strictly increasing")
        return cls(np.array(xs), np.array(ys), **kw)


@dataclass(frozen=True)
class GridSpec:
    """Layout of an evaluation grid on ``[min, max]``.

    Points are log-spaced. If ``cluster_at`` is given (a finite upper
    endpoint such as 1 for distributions on the unit interval) half of the
    points are instead geometrically clustered on both sides of it, down to
    a gap of ``cluster_gap``, and ``cluster_at`` itself is a node.
    """

    min: float
    max: float
    points: int = 512
    cluster_at: float | None = None
    cluster_gap: float = 1e-4

    def __post_init__(self):
        if not (0 < self.min < self.max):
            raise ParameterError(f"grid needs 0 < min < max, got [{self.min}, {self.max}]")
        if self.points < 4:
            raise ParameterError("grid needs at least 4 points")

    def nodes(self) -> np.ndarray:
        if self.cluster_at is None or not (self.min < self.cluster_at):
            return np.geomspace(self.min, self.max, self.points)
        w = self.cluster_at
        above = self.max > w
        n_left = self.points // 2
        n_cluster = self.points - n_left
        split = min(w / 2, max(self.min * 2, w * 0.5))
        left = np.geomspace(self.min, split, n_left, endpoint=False)
        if above:
            n_below = n_cluster * 3 // 4
            n_above = n_cluster - n_below - 1
            gaps = np.geomspace(w - split, self.cluster_gap, n_below)
            below = w - gaps
            up = w + np.geomspace(self.cluster_gap, self.max - w, n_above)
            out = np.concatenate([left, below, [w], up])
        else:
            gaps = np.geomspace(w - split, max(self.cluster_gap, w - self.max), n_cluster)
            out = np.concatenate([left, w - gaps])
        return np.unique(out)
