"""Dense row-major matrix value used by the metamorphic-testing harness."""

from __future__ import annotations

import math
from dataclasses import dataclass, field


@dataclass
class Matrix:
    rows: int
    cols: int
    data: list[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError(f"matrix dimensions must be positive, got {self.rows}x{self.cols}")
        if not self.data:
            self.data = [0.0] * (self.rows * self.cols)
        if len(self.data) != self.rows * self.cols:
            raise ValueError(
                f"{self.rows}x{self.cols} matrix needs {self.rows * self.cols} "
                f"entries, got {len(self.data)}"
            )
        if not all(math.isfinite(v) for v in self.data):
            raise ValueError("matrix entries must be finite")

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "Matrix":
        return cls(rows, cols, [0.0] * (rows * cols))

    @classmethod
    def from_rows(cls, rows: list[list[float]]) -> "Matrix":
        if not rows or not rows[0]:
            raise ValueError("matrix needs at least one row and one column")
        width = len(rows[0])
        if any(len(r) != width for r in rows):
            raise ValueError("ragged rows")
        return cls(len(rows), width, [float(v) for r in rows for v in r])

    def to_rows(self) -> list[list[float]]:
        return [
            self.data[i * self.cols:(i + 1) * self.cols] for i in range(self.rows)
        ]

    def get(self, i: int, j: int) -> float:
        self._check_index(i, j)
        return self.data[i * self.cols + j]

    def set(self, i: int, j: int, value: float) -> None:
        self._check_index(i, j)
        self.data[i * self.cols + j] = float(value)

    def _check_index(self, i: int, j: int) -> None:
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(
                f"index ({i}, {j}) outside {self.rows}x{self.cols} matrix"
            )

    def copy(self) -> "Matrix":
        return Matrix(self.rows, self.cols, list(self.data))

    def same_size(self, other: "Matrix") -> bool:
        return self.rows == other.rows and self.cols == other.cols
