"""CSV output with fixed 17-significant-digit formatting."""

from __future__ import annotations

import csv
from collections.abc import Iterable, Sequence
from pathlib import Path

EIGENFUNCTION_HEADER = ("cell", "kind", "x", "re", "im", "abs")
ROOTS_HEADER = ("k", "n", "residual")
BAND_HEADER = ("k", "lambda1_re", "lambda1_im", "lambda2_re", "lambda2_im", "in_band")
POINTINT_HEADER = ("x", "printed_re", "printed_im", "oracle_re", "oracle_im")


def fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int, str)):
        return str(value)
    return format(float(value), ".17g")


def write_table(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def read_table(path: str | Path) -> list[dict[str, str]]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


def write_eigenfunction_csv(path, rows) -> Path:
    return write_table(path, EIGENFUNCTION_HEADER, rows)


def write_roots_csv(path, roots) -> Path:
    return write_table(path, ROOTS_HEADER, ((r.k, int(r.n), r.residual) for r in roots))


def write_band_csv(path, scan) -> Path:
    return write_table(
        path,
        BAND_HEADER,
        ((k, l1.real, l1.imag, l2.real, l2.imag, b) for k, l1, l2, b in scan.rows()),
    )


def write_pointint_csv(path, x, printed, oracle) -> Path:
    return write_table(
        path,
        POINTINT_HEADER,
        ((xi, p.real, p.imag, o.real, o.imag) for xi, p, o in zip(x, printed, oracle)),
    )
