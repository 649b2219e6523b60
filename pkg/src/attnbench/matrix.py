"""Dense row-major float32 matrix, the tensor carrier for the whole package.

Data lives in a flat ``array('f')`` buffer so both the compiled kernels
(via the buffer protocol, zero-copy) and the pure-Python fallback can
operate on the same object.
"""

from __future__ import annotations

from array import array
from typing import Iterable, Sequence

from .errors import ShapeError

Vec = array  # 1-D float32 buffer, used for biases / layer-norm params


def vec(values: Iterable[float]) -> Vec:
    return array("f", values)


def zeros_vec(n: int) -> Vec:
    return array("f", bytes(4 * n))


class Matrix:
    __slots__ = ("rows", "cols", "data")

    def __init__(self, rows: int, cols: int, data: array | None = None):
        if rows <= 0 or cols <= 0:
            raise ShapeError(f"matrix dimensions must be positive, got {rows}x{cols}")
        if data is None:
            data = array("f", bytes(4 * rows * cols))
        elif not isinstance(data, array) or data.typecode != "f":
            data = array("f", data)
        if len(data) != rows * cols:
            raise ShapeError(
                f"data length {len(data)} does not match shape {rows}x{cols}"
            )
        self.rows = rows
        self.cols = cols
        self.data = data

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "Matrix":
        r = len(rows)
        if r == 0:
            raise ShapeError("matrix needs at least one row")
        c = len(rows[0])
        flat = array("f")
        for row in rows:
            if len(row) != c:
                raise ShapeError(f"ragged rows: expected {c} entries, got {len(row)}")
            flat.extend(row)
        return cls(r, c, flat)

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(rows, cols)

    @classmethod
    def uniform(cls, rows: int, cols: int, rng, low: float, high: float) -> "Matrix":
        u = rng.uniform
        return cls(rows, cols, array("f", (u(low, high) for _ in range(rows * cols))))

    def get(self, i: int, j: int) -> float:
        return self.data[i * self.cols + j]

    def set(self, i: int, j: int, v: float) -> None:
        self.data[i * self.cols + j] = v

    def row(self, i: int) -> list[float]:
        return self.data[i * self.cols : (i + 1) * self.cols].tolist()

    def to_rows(self) -> list[list[float]]:
        return [self.row(i) for i in range(self.rows)]

    def copy(self) -> "Matrix":
        return Matrix(self.rows, self.cols, array("f", self.data))

    def tobytes(self) -> bytes:
        return self.data.tobytes()

    def all_finite(self) -> bool:
        inf = float("inf")
        return all(-inf < v < inf for v in self.data)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Matrix)
            and self.shape == other.shape
            and self.data == other.data
        )

    def __hash__(self):  # mutable container
        raise TypeError("Matrix is not hashable")

    def __repr__(self) -> str:
        return f"Matrix({self.rows}x{self.cols})"
