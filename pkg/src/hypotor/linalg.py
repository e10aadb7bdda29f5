"""Exact linear algebra over the integers and the rationals.

Two solvers live here:

* :func:`rational_nullspace` -- basis of ``{r in Q^n : A r = 0}`` computed by
  fraction-free elimination on an integer-scaled copy of ``A``.
* :func:`solve_integer_system` -- all integer solutions of ``A v = b`` as a base
  point plus a lattice basis, via unimodular column operations (a column
  Hermite-style reduction built on the extended Euclidean algorithm).
"""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Sequence


def egcd(a: int, b: int) -> tuple[int, int, int]:
    """Return ``(g, x, y)`` with ``a*x + b*y == g == gcd(a, b) >= 0``."""
    x0, y0, x1, y1 = 1, 0, 0, 1
    while b:
        q, a, b = a // b, b, a % b
        x0, x1 = x1, x0 - q * x1
        y0, y1 = y1, y0 - q * y1
    if a < 0:
        a, x0, y0 = -a, -x0, -y0
    return a, x0, y0


def integer_row(row: Sequence[Fraction]) -> list[int]:
    """Scale a rational row by the lcm of its denominators."""
    m = 1
    for v in row:
        m = lcm(m, Fraction(v).denominator)
    return [int(Fraction(v) * m) for v in row]


def _primitive(vec: list[Fraction]) -> list[Fraction]:
    ints = integer_row(vec)
    g = 0
    for v in ints:
        g = gcd(g, v)
    if g == 0:
        return [Fraction(0)] * len(vec)
    first = next(v for v in ints if v)
    if first < 0:
        g = -g
    return [Fraction(v // g) for v in ints]


def rational_nullspace(rows: Sequence[Sequence[Fraction]], ncols: int) -> list[list[Fraction]]:
    """Basis of the rational nullspace of ``rows`` (each of length ``ncols``).

    Elimination is fraction-free: rows are scaled to integers, combined by
    cross-multiplication and kept primitive by dividing out row gcds. Each returned
    vector is primitive (integer entries with gcd 1, first nonzero entry positive).
    An empty ``rows`` yields the standard basis.
    """
    mat = [integer_row(r) for r in rows if any(r)]
    pivots: list[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(mat)) if mat[i][c] != 0), None)
        if piv is None:
            continue
        mat[r], mat[piv] = mat[piv], mat[r]
        p = mat[r][c]
        for i in range(len(mat)):
            if i == r or mat[i][c] == 0:
                continue
            row = [p * mat[i][j] - mat[i][c] * mat[r][j] for j in range(ncols)]
            g = 0
            for v in row:
                g = gcd(g, v)
            mat[i] = [v // g for v in row] if g > 1 else row
        pivots.append(c)
        r += 1
        if r == len(mat):
            break
    free = [c for c in range(ncols) if c not in pivots]
    basis = []
    for f in free:
        vec = [Fraction(0)] * ncols
        vec[f] = Fraction(1)
        for i, c in enumerate(pivots):
            vec[c] = Fraction(-mat[i][f], mat[i][c])
        basis.append(_primitive(vec))
    return basis


def solve_integer_system(
    a: Sequence[Sequence[int]], b: Sequence[int]
) -> tuple[list[int], list[list[int]]] | None:
    """Integer solutions of ``a @ v == b``.

    Returns ``None`` when no integer solution exists, otherwise
    ``(base, kernel)`` where every solution is ``base + sum(k_i * kernel[i])``
    for integers ``k_i`` and ``kernel`` is a lattice basis (possibly empty).
    """
    m = len(a)
    n = len(a[0]) if m else 0
    w = [list(map(int, row)) for row in a]
    u = [[int(i == j) for j in range(n)] for i in range(n)]

    def colop(c: int, j: int, x: int, y: int, s: int, t: int) -> None:
        # (col_c, col_j) <- (x col_c + y col_j, s col_c + t col_j)
        for mat in (w, u):
            for row in mat:
                vc, vj = row[c], row[j]
                row[c] = x * vc + y * vj
                row[j] = s * vc + t * vj

    pivot_of_row: list[int | None] = []
    c = 0
    for i in range(m):
        if c < n:
            for j in range(c + 1, n):
                if w[i][j] == 0:
                    continue
                p, q = w[i][c], w[i][j]
                g, x, y = egcd(p, q)
                colop(c, j, x, y, q // g, -(p // g))
        if c < n and w[i][c] != 0:
            pivot_of_row.append(c)
            c += 1
        else:
            pivot_of_row.append(None)
    rank = c

    sol = [0] * n
    for i in range(m):
        acc = sum(w[i][j] * sol[j] for j in range(rank) if j != pivot_of_row[i])
        rest = b[i] - acc
        pc = pivot_of_row[i]
        if pc is None:
            if rest != 0:
                return None
            continue
        if rest % w[i][pc]:
            return None
        sol[pc] = rest // w[i][pc]
    base = [sum(u[r][j] * sol[j] for j in range(n)) for r in range(n)]
    kernel = [[u[r][j] for r in range(n)] for j in range(rank, n)]
    return base, kernel
