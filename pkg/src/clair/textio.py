"""Plain-text matrix files shared by the CLI and the library.

Single matrix: a header line ``q p`` followed by q rows of p floats.
Stacked pair matrix: a header line ``K q p`` followed by one ``pair j k``
line plus q rows per block, in stacking order. Lines starting with ``#``
are ignored everywhere. Floats are written with 17 significant digits so
files round-trip exactly.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterator, TextIO

import numpy as np

from .contrast import StackedPairMatrix, all_pairs, n_pairs
from .exceptions import MatrixFormatError


def _fmt_row(row: np.ndarray) -> str:
    return " ".join(f"{v:.17g}" for v in row)


def _content_lines(handle: TextIO) -> Iterator[tuple[int, str]]:
    for lineno, raw in enumerate(handle, start=1):
        stripped = raw.strip()
        if stripped and not stripped.startswith("#"):
            yield lineno, stripped


def _parse_ints(path, lineno: int, text: str, count: int) -> list[int]:
    parts = text.split()
    if len(parts) != count:
        raise MatrixFormatError(path, lineno, f"expected {count} integers, got {text!r}")
    try:
        return [int(v) for v in parts]
    except ValueError as exc:
        raise MatrixFormatError(path, lineno, f"bad integer in {text!r}") from exc


def _parse_floats(path, lineno: int, text: str, count: int) -> list[float]:
    parts = text.split()
    if len(parts) != count:
        raise MatrixFormatError(path, lineno, f"expected {count} values, got {len(parts)}")
    try:
        return [float(v) for v in parts]
    except ValueError as exc:
        raise MatrixFormatError(path, lineno, f"bad float in {text!r}") from exc


def save_matrix(path: str | Path, mat: np.ndarray, comment: str | None = None) -> None:
    mat = np.asarray(mat, dtype=np.float64)
    if mat.ndim != 2:
        raise MatrixFormatError(path, 0, f"expected a 2-d matrix, got shape {mat.shape}")
    with open(path, "w") as handle:
        if comment:
            handle.write(f"# {comment}\n")
        handle.write(f"{mat.shape[0]} {mat.shape[1]}\n")
        for row in mat:
            handle.write(_fmt_row(row) + "\n")


def load_matrix(path: str | Path) -> np.ndarray:
    with open(path) as handle:
        lines = _content_lines(handle)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise MatrixFormatError(path, 0, "empty matrix file") from None
        rows, cols = _parse_ints(path, lineno, header, 2)
        if rows < 1 or cols < 1:
            raise MatrixFormatError(path, lineno, f"bad dimensions {rows} x {cols}")
        out = np.empty((rows, cols))
        for i in range(rows):
            try:
                lineno, text = next(lines)
            except StopIteration:
                raise MatrixFormatError(
                    path, lineno, f"expected {rows} rows, file ended after {i}"
                ) from None
            out[i] = _parse_floats(path, lineno, text, cols)
        extra = next(lines, None)
        if extra is not None:
            raise MatrixFormatError(path, extra[0], "trailing content after matrix")
    return out


def save_stacked(
    path: str | Path, mat: StackedPairMatrix, comment: str | None = None
) -> None:
    with open(path, "w") as handle:
        if comment:
            handle.write(f"# {comment}\n")
        handle.write(f"{mat.n_clients} {mat.block_rows} {mat.cols}\n")
        for pair in all_pairs(mat.n_clients):
            handle.write(f"pair {pair.j} {pair.k}\n")
            for row in mat.block(pair.flat):
                handle.write(_fmt_row(row) + "\n")


def load_stacked(path: str | Path) -> StackedPairMatrix:
    with open(path) as handle:
        lines = _content_lines(handle)
        try:
            lineno, header = next(lines)
        except StopIteration:
            raise MatrixFormatError(path, 0, "empty stacked matrix file") from None
        n_clients, q, p = _parse_ints(path, lineno, header, 3)
        if n_clients < 2 or q < 1 or p < 1:
            raise MatrixFormatError(path, lineno, f"bad header {header!r}")
        total = n_pairs(n_clients)
        data = np.empty((total * q, p))
        for pair in all_pairs(n_clients):
            try:
                lineno, text = next(lines)
            except StopIteration:
                raise MatrixFormatError(
                    path, lineno, f"file ended before block ({pair.j}, {pair.k})"
                ) from None
            parts = text.split()
            if len(parts) != 3 or parts[0] != "pair":
                raise MatrixFormatError(
                    path, lineno, f"expected 'pair {pair.j} {pair.k}', got {text!r}"
                )
            if (int(parts[1]), int(parts[2])) != (pair.j, pair.k):
                raise MatrixFormatError(
                    path, lineno, f"blocks out of order: expected pair "
                    f"({pair.j}, {pair.k}), got {text!r}"
                )
            for i in range(q):
                try:
                    lineno, text = next(lines)
                except StopIteration:
                    raise MatrixFormatError(
                        path, lineno, f"block ({pair.j}, {pair.k}) truncated"
                    ) from None
                data[pair.flat * q + i] = _parse_floats(path, lineno, text, p)
        extra = next(lines, None)
        if extra is not None:
            raise MatrixFormatError(path, extra[0], "trailing content after blocks")
    return StackedPairMatrix(n_clients, q, p, data)
