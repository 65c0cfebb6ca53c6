"""Verdict tables with certificates, rendered as text or a versioned CSV."""

from dataclasses import dataclass, field
import csv
import io
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["AnalysisReport", "CSV_VERSION", "format_value"]

CSV_VERSION = "# ftaplab-report v1"
CSV_COLUMNS = ("n", "condition", "value", "certificate-ref")


def format_value(x):
    """Fixed rendering so equal inputs give byte-identical files."""
    if x is None:
        return ""
    if isinstance(x, (list, tuple, np.ndarray)):
        return "(" + ",".join(format_value(v) for v in np.asarray(x, dtype=float).ravel()) + ")"
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if x == 0.0:
            return "0"  # folds -0.0
        return "%.10g" % x
    return str(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x) or math.isinf(x):
            return format_value(x)
        return float(format_value(x))
    return obj


@dataclass
class AnalysisReport:
    """Rows ``(n, condition, value, certificate-ref)`` plus the referenced certificates.

    ``n`` is ``None`` for rows about the whole object (a single market, or a
    symbolic verdict on a stationary family). ``flagged`` marks a detected
    arbitrage or free lunch; the command line maps it to exit code 1.
    """

    title: str
    rows: list = field(default_factory=list)
    certificates: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    flagged: bool = False

    def add(self, n, condition, value, certificate=None):
        ref = ""
        if certificate is not None:
            ref = "c%03d" % (len(self.certificates) + 1)
            self.certificates[ref] = certificate
        self.rows.append((n, condition, value, ref))
        return ref

    def note(self, text):
        self.notes.append(text)

    def to_text(self):
        out = [self.title, "=" * len(self.title)]
        width = max([len(r[1]) for r in self.rows] + [9])
        for n, cond, value, ref in self.rows:
            head = "" if n is None else "n=%-3s " % n
            tail = "  [%s]" % ref if ref else ""
            out.append("%s%-*s  %s%s" % (head, width, cond, format_value(value), tail))
        for note in self.notes:
            out.append("note: " + note)
        if self.certificates:
            out.append("certificates:")
            for ref, cert in self.certificates.items():
                out.append("  %s %s" % (ref, json.dumps(_jsonable(cert), sort_keys=True)))
        return "\n".join(out) + "\n"

    def to_csv(self):
        buf = io.StringIO()
        buf.write(CSV_VERSION + "\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for n, cond, value, ref in self.rows:
            w.writerow(("" if n is None else int(n), cond, format_value(value), ref))
        return buf.getvalue()

    def certificates_json(self):
        return json.dumps(_jsonable(self.certificates), sort_keys=True, indent=1) + "\n"

    def write(self, outdir, stem="report", fmt="both"):
        """Write ``stem.txt`` and/or ``stem.csv`` (plus ``stem.certs.json``); returns the paths."""
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        paths = []
        if fmt in ("text", "both"):
            paths.append(outdir / (stem + ".txt"))
            paths[-1].write_text(self.to_text())
        if fmt in ("csv", "both"):
            paths.append(outdir / (stem + ".csv"))
            paths[-1].write_text(self.to_csv())
            paths.append(outdir / (stem + ".certs.json"))
            paths[-1].write_text(self.certificates_json())
        return paths
