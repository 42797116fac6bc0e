"""Experiment reports and their JSON / CSV encodings.

The JSON encoder is written out by hand so that the bytes depend only on the
report contents: keys are sorted, floats are printed with 17 significant
digits, complex numbers become ``[re, im]`` and non-finite floats become
``{"nonfinite": "inf"}`` (or ``"-inf"``, ``"nan"``) instead of bare tokens.
"""
from __future__ import annotations

import csv
import io
import json
import math
import numbers
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

REPORT_VERSION = 1


@dataclass
class Table:
    columns: list[str]
    rows: list[list] = field(default_factory=list)

    def add(self, *values):
        if len(values) != len(self.columns):
            raise ValueError(f"expected {len(self.columns)} values, got {len(values)}")
        self.rows.append(list(values))


@dataclass
class Report:
    kind: str
    config: dict
    verdicts: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)
    tables: dict[str, Table] = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)
    timings: dict[str, float] = field(default_factory=dict)
    partial: bool = False
    failure: str | None = None

    def verdict(self, name: str, tag, rule: str, **extra):
        tag = tag.value if isinstance(tag, Enum) else tag
        self.verdicts[name] = {"tag": tag, "rule": rule, **extra}

    def table(self, name: str, columns) -> Table:
        t = Table(list(columns))
        self.tables[name] = t
        return t

    def to_dict(self, timings: bool = False) -> dict:
        d = {
            "version": REPORT_VERSION,
            "kind": self.kind,
            "config": self.config,
            "verdicts": self.verdicts,
            "values": self.values,
            "tables": {k: {"columns": t.columns, "rows": t.rows} for k, t in self.tables.items()},
            "provenance": self.provenance,
            "partial": self.partial,
        }
        if self.failure is not None:
            d["failure"] = self.failure
        if timings:
            d["timings"] = self.timings
        return d


class NumericalFailure(RuntimeError):
    """Raised by a run that could not reach its target; carries the partial report."""

    def __init__(self, message: str, report: Report):
        super().__init__(message)
        report.partial = True
        report.failure = message
        self.report = report


def _float(x: float) -> str:
    if math.isnan(x):
        return '{"nonfinite": "nan"}'
    if math.isinf(x):
        return '{"nonfinite": "inf"}' if x > 0 else '{"nonfinite": "-inf"}'
    s = format(x, ".17g")
    if s == "-0":
        s = "-0.0"
    return s


def _encode(obj, out: list[str]):
    if obj is None:
        out.append("null")
    elif isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif isinstance(obj, Enum):
        _encode(obj.value, out)
    elif isinstance(obj, str):
        out.append(json.dumps(obj, ensure_ascii=True))
    elif isinstance(obj, numbers.Integral):
        out.append(str(int(obj)))
    elif isinstance(obj, numbers.Real):
        out.append(_float(float(obj)))
    elif isinstance(obj, numbers.Complex):
        z = complex(obj)
        out.append(f"[{_float(z.real)}, {_float(z.imag)}]")
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj, key=str)):
            if i:
                out.append(", ")
            out.append(json.dumps(str(k)))
            out.append(": ")
            _encode(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(", ")
            _encode(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot encode {type(obj).__name__}")


def to_json(obj) -> str:
    out: list[str] = []
    _encode(obj, out)
    return "".join(out)


def _csv_cell(v) -> list[str]:
    if v is None:
        return [""]
    if isinstance(v, (bool, np.bool_)):
        return ["true" if v else "false"]
    if isinstance(v, Enum):
        return [str(v.value)]
    if isinstance(v, numbers.Integral):
        return [str(int(v))]
    if isinstance(v, numbers.Real):
        return [format(float(v), ".17g")]
    if isinstance(v, numbers.Complex):
        z = complex(v)
        return [format(z.real, ".17g"), format(z.imag, ".17g")]
    return [str(v)]


def _is_complex_column(rows, j) -> bool:
    return any(
        isinstance(r[j], numbers.Complex) and not isinstance(r[j], numbers.Real) for r in rows
    )


def to_csv(report: Report) -> str:
    """One block per table: a ``# table: <name>`` line, a header row, then rows.

    Complex columns are split into ``<name>_re`` and ``<name>_im``.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for name in sorted(report.tables):
        t = report.tables[name]
        cplx = [_is_complex_column(t.rows, j) for j in range(len(t.columns))]
        header = []
        for c, is_c in zip(t.columns, cplx):
            header += [f"{c}_re", f"{c}_im"] if is_c else [c]
        buf.write(f"# table: {name}\n")
        w.writerow(header)
        for row in t.rows:
            cells = []
            for v, is_c in zip(row, cplx):
                if is_c and v is not None:
                    z = complex(v)
                    cells += _csv_cell(z.real) + _csv_cell(z.imag)
                elif is_c:
                    cells += ["", ""]
                else:
                    cells += _csv_cell(v)
            w.writerow(cells)
        buf.write("\n")
    return buf.getvalue()


def emit(report: Report, fmt: str = "json", timings: bool = False) -> bytes:
    if fmt == "json":
        return (to_json(report.to_dict(timings)) + "\n").encode("ascii")
    if fmt == "csv":
        return to_csv(report).encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


def decode_json(data: bytes | str):
    """Inverse of the JSON encoding for nonfinite markers (complex pairs stay lists)."""

    def hook(d):
        if set(d) == {"nonfinite"}:
            return float(d["nonfinite"])
        return d

    return json.loads(data, object_hook=hook)
