"""Exact rational matrices with fraction-free (Bareiss) elimination.

Scalars are :class:`fractions.Fraction`, which already keeps numerator and
denominator in lowest terms with a positive denominator.  Matrices are small
(at most a few dozen rows), so a dense row-major tuple is all we need.
"""

from __future__ import annotations

import re
from fractions import Fraction
from math import lcm
from typing import Iterable, Sequence

from .errors import ParseError, ShapeMismatch, SingularMatrix

Rat = Fraction


def as_rat(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        return Fraction(x.strip())
    if isinstance(x, float):
        raise TypeError("floats are not accepted; pass int, str or Fraction")
    return Fraction(x)


class RatMatrix:
    """Immutable dense matrix of exact rationals."""

    __slots__ = ("rows", "cols", "entries")

    def __init__(self, rows: int, cols: int, entries: Iterable):
        entries = tuple(as_rat(x) for x in entries)
        if len(entries) != rows * cols:
            raise ShapeMismatch(f"expected {rows * cols} entries, got {len(entries)}")
        self.rows = rows
        self.cols = cols
        self.entries = entries

    # -- construction -------------------------------------------------------

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence], cols: int | None = None) -> "RatMatrix":
        rows = [list(r) for r in rows]
        if cols is None:
            cols = len(rows[0]) if rows else 0
        for r in rows:
            if len(r) != cols:
                raise ShapeMismatch("ragged rows")
        return cls(len(rows), cols, (x for r in rows for x in r))

    @classmethod
    def symmetric(cls, rows: Sequence[Sequence]) -> "RatMatrix":
        M = cls.from_rows(rows)
        if not M.is_symmetric():
            raise ShapeMismatch("matrix is not symmetric")
        return M

    @classmethod
    def zeros(cls, rows: int, cols: int | None = None) -> "RatMatrix":
        cols = rows if cols is None else cols
        return cls(rows, cols, [0] * (rows * cols))

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls(n, n, (1 if i == j else 0 for i in range(n) for j in range(n)))

    @classmethod
    def diag(cls, values: Sequence) -> "RatMatrix":
        n = len(values)
        return cls(n, n, (values[i] if i == j else 0 for i in range(n) for j in range(n)))

    @classmethod
    def outer(cls, u: Sequence, v: Sequence | None = None) -> "RatMatrix":
        v = u if v is None else v
        return cls(len(u), len(v), (as_rat(a) * as_rat(b) for a in u for b in v))

    # -- access -------------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return self.rows, self.cols

    def __getitem__(self, ij: tuple[int, int]) -> Fraction:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(ij)
        return self.entries[i * self.cols + j]

    def row(self, i: int) -> list[Fraction]:
        return list(self.entries[i * self.cols:(i + 1) * self.cols])

    def tolist(self) -> list[list[Fraction]]:
        return [self.row(i) for i in range(self.rows)]

    def submatrix(self, rows: Sequence[int], cols: Sequence[int]) -> "RatMatrix":
        return RatMatrix(len(rows), len(cols), (self[i, j] for i in rows for j in cols))

    def is_symmetric(self) -> bool:
        if self.rows != self.cols:
            return False
        return all(self[i, j] == self[j, i] for i in range(self.rows) for j in range(i))

    # -- arithmetic ---------------------------------------------------------

    @property
    def T(self) -> "RatMatrix":
        return RatMatrix(self.cols, self.rows, (self[i, j] for j in range(self.cols) for i in range(self.rows)))

    def _check_same(self, other: "RatMatrix"):
        if self.shape != other.shape:
            raise ShapeMismatch(f"{self.shape} vs {other.shape}")

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same(other)
        return RatMatrix(self.rows, self.cols, (a + b for a, b in zip(self.entries, other.entries)))

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        self._check_same(other)
        return RatMatrix(self.rows, self.cols, (a - b for a, b in zip(self.entries, other.entries)))

    def __neg__(self) -> "RatMatrix":
        return RatMatrix(self.rows, self.cols, (-a for a in self.entries))

    def scale(self, c) -> "RatMatrix":
        c = as_rat(c)
        return RatMatrix(self.rows, self.cols, (c * a for a in self.entries))

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.cols != other.rows:
            raise ShapeMismatch(f"cannot multiply {self.shape} by {other.shape}")
        A = self.tolist()
        Bt = other.T.tolist()
        return RatMatrix(self.rows, other.cols,
                         (sum((a * b for a, b in zip(r, c)), Fraction(0)) for r in A for c in Bt))

    def matvec(self, v: Sequence) -> list[Fraction]:
        if len(v) != self.cols:
            raise ShapeMismatch("vector length mismatch")
        v = [as_rat(x) for x in v]
        return [sum((a * b for a, b in zip(self.row(i), v)), Fraction(0)) for i in range(self.rows)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, RatMatrix):
            return NotImplemented
        return self.shape == other.shape and self.entries == other.entries

    def __hash__(self):
        return hash((self.rows, self.cols, self.entries))

    def __repr__(self) -> str:
        body = "; ".join(" ".join(str(x) for x in self.row(i)) for i in range(self.rows))
        return f"RatMatrix({self.rows}x{self.cols}: {body})"


def _integer_rows(M: RatMatrix) -> tuple[list[list[int]], Fraction]:
    """Clear denominators row by row; returns int rows and the product of the row scalings."""
    out = []
    scale = Fraction(1)
    for i in range(M.rows):
        r = M.row(i)
        d = lcm(*(x.denominator for x in r)) if r else 1
        out.append([x.numerator * (d // x.denominator) for x in r])
        scale *= d
    return out, scale


def _bareiss(a: list[list[int]], ncols: int) -> tuple[int, int, int]:
    """In-place fraction-free row echelon form.

    Pivot = first nonzero entry in the current column.  Returns
    (rank, last pivot, sign of the row permutation).  For a square
    nonsingular input the last pivot is the determinant up to that sign.
    """
    nrows = len(a)
    r = 0
    prev = 1
    sign = 1
    for c in range(ncols):
        if r == nrows:
            break
        p = next((i for i in range(r, nrows) if a[i][c] != 0), None)
        if p is None:
            continue
        if p != r:
            a[p], a[r] = a[r], a[p]
            sign = -sign
        piv = a[r][c]
        prow = a[r]
        for i in range(r + 1, nrows):
            ri = a[i]
            f = ri[c]
            if f == 0:
                for j in range(c + 1, ncols):
                    ri[j] = (piv * ri[j]) // prev
            else:
                for j in range(c + 1, ncols):
                    ri[j] = (piv * ri[j] - f * prow[j]) // prev
            ri[c] = 0
        prev = piv
        r += 1
    return r, prev, sign


def rank(M: RatMatrix) -> int:
    """Exact rank over the rationals."""
    if M.rows == 0 or M.cols == 0:
        return 0
    a, _ = _integer_rows(M)
    return _bareiss(a, M.cols)[0]


def det(M: RatMatrix) -> Fraction:
    if M.rows != M.cols:
        raise ShapeMismatch("determinant of a non-square matrix")
    n = M.rows
    if n == 0:
        return Fraction(1)
    a, scale = _integer_rows(M)
    r, last, sign = _bareiss(a, n)
    if r < n:
        return Fraction(0)
    return Fraction(sign * last) / scale


def _reduced_echelon(aug: list[list[Fraction]], ncols: int) -> list[int]:
    """Gauss-Jordan over Fractions on the first ``ncols`` columns; returns pivot columns."""
    nrows = len(aug)
    pivots = []
    r = 0
    for c in range(ncols):
        p = next((i for i in range(r, nrows) if aug[i][c] != 0), None)
        if p is None:
            continue
        aug[p], aug[r] = aug[r], aug[p]
        inv = 1 / aug[r][c]
        aug[r] = [x * inv for x in aug[r]]
        for i in range(nrows):
            if i != r and aug[i][c] != 0:
                f = aug[i][c]
                aug[i] = [x - f * y for x, y in zip(aug[i], aug[r])]
        pivots.append(c)
        r += 1
        if r == nrows:
            break
    return pivots


def inverse(M: RatMatrix) -> RatMatrix:
    if M.rows != M.cols:
        raise ShapeMismatch("inverse of a non-square matrix")
    n = M.rows
    aug = [M.row(i) + [Fraction(int(i == j)) for j in range(n)] for i in range(n)]
    if len(_reduced_echelon(aug, n)) < n:
        raise SingularMatrix(f"matrix of size {n} is singular")
    return RatMatrix(n, n, (x for r in aug for x in r[n:]))


def solve(A: RatMatrix, b: Sequence) -> list[Fraction]:
    """Unique solution of a consistent system A x = b (A may be tall).

    Raises SingularMatrix if the solution is not unique and ShapeMismatch if
    the system is inconsistent.
    """
    if len(b) != A.rows:
        raise ShapeMismatch("right-hand side length mismatch")
    aug = [A.row(i) + [as_rat(b[i])] for i in range(A.rows)]
    pivots = _reduced_echelon(aug, A.cols)
    if len(pivots) < A.cols:
        raise SingularMatrix("system does not have a unique solution")
    for r in aug[len(pivots):]:
        if r[-1] != 0:
            raise ShapeMismatch("inconsistent linear system")
    return [aug[i][-1] for i in range(A.cols)]


def leading_minors_positive(M: RatMatrix) -> bool:
    """Sylvester's criterion for positive definiteness of a symmetric matrix."""
    n = M.rows
    return all(det(M.submatrix(range(k), range(k))) > 0 for k in range(1, n + 1))


# -- text format ------------------------------------------------------------

_ENTRY = re.compile(r"[+-]?\d+(/\d+)?")


def parse_matrix(text: str) -> RatMatrix:
    """Parse "rows cols" followed by whitespace-separated integers or p/q entries."""
    lines = [(n, ln.split("#", 1)[0].strip()) for n, ln in enumerate(text.splitlines(), 1)]
    lines = [(n, ln) for n, ln in lines if ln]
    if not lines:
        raise ParseError("empty matrix file")
    n0, header = lines[0]
    parts = header.split()
    if len(parts) != 2:
        raise ParseError("header must be 'rows cols'", n0)
    try:
        rows, cols = int(parts[0]), int(parts[1])
    except ValueError:
        raise ParseError("header must be two integers", n0) from None
    if rows < 0 or cols < 0:
        raise ParseError("negative dimension", n0)
    entries = []
    want = rows * cols
    for n, ln in lines[1:]:
        for tok in ln.split():
            if not _ENTRY.fullmatch(tok):
                raise ParseError(f"bad entry {tok!r}", n)
            try:
                entries.append(Fraction(tok))
            except ZeroDivisionError:
                raise ParseError(f"zero denominator in {tok!r}", n) from None
            if len(entries) > want:
                raise ParseError(f"more than {want} entries", n)
    if len(entries) < want:
        raise ParseError(f"expected {want} entries, found {len(entries)}", lines[-1][0])
    return RatMatrix(rows, cols, entries)


def format_matrix(M: RatMatrix, row_labels: Sequence[str] | None = None,
                  col_labels: Sequence[str] | None = None) -> str:
    out = []
    if col_labels is not None:
        out.append("# cols " + " ".join(col_labels))
    out.append(f"{M.rows} {M.cols}")
    for i in range(M.rows):
        if row_labels is not None:
            out.append(f"# row {row_labels[i]}")
        out.append(" ".join(str(x) for x in M.row(i)))
    return "\n".join(out) + "\n"
