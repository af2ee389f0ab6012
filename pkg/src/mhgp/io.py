"""Reading and writing chain artifacts (CSV samples, JSONL evaluation logs)."""

from __future__ import annotations

import csv
import json
import math

import numpy as np


def _fmt(v: float) -> str:
    return "%.17g" % v


def write_samples_csv(path, chain) -> None:
    """One row per iteration: ``x1..xd,accepted,evaluated``."""
    d = chain.samples.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x%d" % (j + 1) for j in range(d)] + ["accepted", "evaluated"])
        for row, a, e in zip(chain.samples, chain.accepted, chain.evaluated):
            w.writerow([_fmt(v) for v in row] + [int(a), int(e)])


def read_samples_csv(path):
    """Return ``(samples, accepted, evaluated)`` from a samples CSV."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise ValueError("%s: empty file" % path)
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        try:
            ia, ie = header.index("accepted"), header.index("evaluated")
        except ValueError:
            raise ValueError("%s: header must contain accepted and evaluated columns" % path)
        rows = [r for r in reader if r]
    samples = np.array([[float(r[i]) for i in xcols] for r in rows]).reshape(len(rows), len(xcols))
    accepted = np.array([r[ia] == "1" for r in rows], dtype=bool)
    evaluated = np.array([r[ie] == "1" for r in rows], dtype=bool)
    return samples, accepted, evaluated


def _json_float(v: float):
    return v if math.isfinite(v) else None


def write_evals_jsonl(path, records) -> None:
    """One JSON object per true target evaluation.

    Records without an iteration index are numbered within their phase;
    the initial-point evaluation of a plain sampler gets ``-1``.
    """
    seen: dict[str, int] = {}
    with open(path, "w") as fh:
        for r in records:
            phase = r["phase"] or "sampling"
            it = r["iteration"]
            if it is None:
                it = seen.get(phase, 0) if phase != "sampling" else -1
            seen[phase] = seen.get(phase, 0) + 1
            fh.write(json.dumps({
                "phase": phase,
                "iteration": int(it),
                "point": r["point"],
                "log_density": _json_float(r["log_density"]),
            }) + "\n")
