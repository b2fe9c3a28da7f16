"""File formats and the fit configuration record.

Two plain-text formats travel between runs and tools:

* Parameter files: one line per parameter, ``name value free|fixed``,
  with names muS[h], sigS[h], muC[i], sigC[i] (1-based indices). Blank
  lines and lines starting with # are ignored.
* Count files: CSV with header ``stimulus,r1,...,r{M+1}`` and one row
  per stimulus in order.

Floats are written with repr, which round-trips exactly, so writing and
re-reading is lossless and re-running a command yields byte-identical
files.
"""

from __future__ import annotations

import csv
import re
from dataclasses import dataclass
from pathlib import Path
from typing import List

import numpy as np

from bmcmc.models import CJParameters, ModelVariant
from bmcmc.simulate import RatingMatrix

# Environment variable naming the default output directory of the CLI.
OUT_DIR_ENV = "BMCMC_OUT_DIR"

_PARAM_NAME = re.compile(r"^(muS|sigS|muC|sigC)\[(\d+)\]$")
_BLOCKS = ("muS", "sigS", "muC", "sigC")


@dataclass
class FitConfig:
    """Settings of one fit run, shared by the CLI and the library API."""

    variant: ModelVariant
    seed: int = 0
    restarts: int = 3
    n_samples: int = 4000
    confidence_level: float = 0.95
    include_soft_penalty: bool = True
    initial_temperature: float = 10.0
    v_star: float = 0.5
    max_optimisation_proposals: int = 10 ** 6
    max_sampling_proposals: int = 10 ** 7


def parameter_names(n_signals: int, n_criteria: int) -> List[str]:
    """Names matching the flat vector layout, 1-based like the file format."""
    names = [f"muS[{h}]" for h in range(1, n_signals + 1)]
    names += [f"sigS[{h}]" for h in range(1, n_signals + 1)]
    names += [f"muC[{i}]" for i in range(1, n_criteria + 1)]
    names += [f"sigC[{i}]" for i in range(1, n_criteria + 1)]
    return names


def read_parameters(path) -> CJParameters:
    """Parse a parameter file into CJParameters.

    Every block must be complete: indices 1..N for the signal blocks and
    1..M for the criterion blocks, each exactly once. Raises ValueError
    with the offending line number on malformed input.
    """
    entries = {block: {} for block in _BLOCKS}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        parts = stripped.split()
        if len(parts) != 3:
            raise ValueError(
                f"{path}:{lineno}: expected 'name value free|fixed', got {stripped!r}"
            )
        name, value_text, flag = parts
        match = _PARAM_NAME.match(name)
        if not match:
            raise ValueError(f"{path}:{lineno}: unrecognised parameter name {name!r}")
        block, index_text = match.group(1), match.group(2)
        index = int(index_text)
        if index < 1:
            raise ValueError(f"{path}:{lineno}: indices are 1-based, got {index}")
        try:
            value = float(value_text)
        except ValueError:
            raise ValueError(f"{path}:{lineno}: bad value {value_text!r}") from None
        if flag not in ("free", "fixed"):
            raise ValueError(
                f"{path}:{lineno}: flag must be 'free' or 'fixed', got {flag!r}"
            )
        if index in entries[block]:
            raise ValueError(f"{path}:{lineno}: duplicate entry {name}")
        entries[block][index] = (value, flag == "free")

    def block_arrays(block: str, size: int):
        got = entries[block]
        missing = [i for i in range(1, size + 1) if i not in got]
        if missing:
            raise ValueError(f"{path}: {block} is missing indices {missing}")
        extra = [i for i in got if i > size]
        if extra:
            raise ValueError(f"{path}: {block} has out-of-range indices {extra}")
        values = np.array([got[i][0] for i in range(1, size + 1)])
        free = np.array([got[i][1] for i in range(1, size + 1)], dtype=bool)
        return values, free

    n = len(entries["muS"])
    m = len(entries["muC"])
    if n < 1 or m < 1:
        raise ValueError(f"{path}: need at least one muS and one muC entry")
    mu_s, mu_s_free = block_arrays("muS", n)
    sig_s, sig_s_free = block_arrays("sigS", n)
    mu_c, mu_c_free = block_arrays("muC", m)
    sig_c, sig_c_free = block_arrays("sigC", m)
    return CJParameters(
        signal_means=mu_s,
        signal_sigmas=sig_s,
        criterion_means=mu_c,
        criterion_sigmas=sig_c,
        free_mask=np.concatenate([mu_s_free, sig_s_free, mu_c_free, sig_c_free]),
    )


def write_parameters(params: CJParameters, path) -> None:
    """Write a parameter file; output is deterministic for fixed input."""
    names = parameter_names(params.n_signals, params.n_criteria)
    values = np.concatenate(
        [
            params.signal_means,
            params.signal_sigmas,
            params.criterion_means,
            params.criterion_sigmas,
        ]
    )
    lines = []
    for name, value, free in zip(names, values, params.free_mask):
        flag = "free" if free else "fixed"
        lines.append(f"{name} {float(value)!r} {flag}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_counts(path) -> RatingMatrix:
    """Parse a counts CSV into a RatingMatrix."""
    with open(path, newline="") as handle:
        rows = list(csv.reader(handle))
    if not rows:
        raise ValueError(f"{path}: empty counts file")
    header = rows[0]
    if len(header) < 3 or header[0] != "stimulus":
        raise ValueError(
            f"{path}: header must be 'stimulus,r1,...', got {','.join(header)}"
        )
    expected = [f"r{i}" for i in range(1, len(header))]
    if header[1:] != expected:
        raise ValueError(
            f"{path}: response columns must be {','.join(expected)}, got {','.join(header[1:])}"
        )
    counts = []
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        if len(row) != len(header):
            raise ValueError(f"{path}:{lineno}: expected {len(header)} fields")
        if row[0] != str(len(counts) + 1):
            raise ValueError(
                f"{path}:{lineno}: stimulus column must run 1..N in order, got {row[0]!r}"
            )
        try:
            counts.append([int(cell) for cell in row[1:]])
        except ValueError:
            raise ValueError(f"{path}:{lineno}: counts must be integers") from None
    if not counts:
        raise ValueError(f"{path}: no count rows")
    return RatingMatrix(counts=np.array(counts, dtype=np.int64))


def write_counts(matrix: RatingMatrix, path) -> None:
    """Write a counts CSV; output is deterministic for fixed input."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["stimulus"] + [f"r{i}" for i in range(1, matrix.n_responses + 1)])
        for h in range(matrix.n_stimuli):
            writer.writerow([h + 1] + [int(c) for c in matrix.counts[h]])
