"""Per-iteration solver histories and their table exports."""

import csv
from dataclasses import dataclass, field

import numpy as np

__all__ = ["IterationRow", "ConvergenceRecord", "write_dat"]

COLUMNS = ("iter", "J", "Jstar", "gap", "ratio", "inner_iters", "seconds")


@dataclass
class IterationRow:
    iteration: int
    primal: float
    dual: float
    gap: float
    ratio: float
    inner_iters: int
    seconds: float

    def as_tuple(self):
        return (
            self.iteration,
            self.primal,
            self.dual,
            self.gap,
            self.ratio,
            self.inner_iters,
            self.seconds,
        )


@dataclass
class ConvergenceRecord:
    """History of one solver run.

    ``status`` ends up as one of 'converged', 'max-iterations', 'stagnated',
    'line-search-exhausted' (Newton) or 'overflow'.
    """

    series: str = "dIRLS"
    rows: list = field(default_factory=list)
    status: str = "running"

    def append(self, iteration, primal, dual, gap, ratio, inner_iters, seconds):
        self.rows.append(
            IterationRow(iteration, primal, dual, gap, ratio, inner_iters, seconds)
        )

    def __len__(self):
        return len(self.rows)

    @property
    def converged(self):
        return self.status == "converged"

    @property
    def final(self):
        return self.rows[-1]

    def column(self, name):
        idx = COLUMNS.index(name)
        return np.array([row.as_tuple()[idx] for row in self.rows], dtype=float)

    def gaps(self):
        return self.column("gap")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(COLUMNS)
            for row in self.rows:
                writer.writerow([repr(x) for x in row.as_tuple()])

    def to_dat(self, path):
        names = list(COLUMNS)
        cols = [self.column(name) for name in names]
        write_dat(path, names, cols)


def write_dat(path, names, columns):
    """Whitespace-separated table with a header line, plot-tool friendly."""
    columns = [np.asarray(c) for c in columns]
    n = len(columns[0])
    with open(path, "w") as fh:
        fh.write(" ".join(names) + "\n")
        for i in range(n):
            fh.write(" ".join(_fmt(c[i]) for c in columns) + "\n")


def _fmt(x):
    x = float(x)
    if not np.isfinite(x):
        return "nan" if np.isnan(x) else ("inf" if x > 0 else "-inf")
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return format(x, ".16e")
