"""
Trace storage - CSV export/import of cluster-size traces and MQC spectra.

Floats are written with 17 significant digits so identical runs give
byte-identical files.
"""

import csv
import logging
import math
import os
import re
from abc import ABC, abstractmethod
from typing import List, Optional

from src.logic.cluster import ClusterTrace, TracePoint
from src.utils.errors import OutputError

TRACE_HEADER = ["n_cycles", "time_s", "p", "K"]
SPECTRUM_HEADER = ["M", "A_M", "n_cycles", "p", "seed"]

_TRACE_NAME = re.compile(r"trace_p(?P<p>[-+0-9.eE]+)_n0(?P<n0>\d+)\.csv$")


def fmt_float(x: float) -> str:
    return "%.17g" % x


def trace_stem(p: float, n_prep_cycles: int) -> str:
    # shortest round-trip repr: distinct p never share a file name
    return f"p{float(p)!r}_n0{n_prep_cycles}"


class TraceStorageBackend(ABC):
    """Abstract base class for trace storage strategies."""

    @abstractmethod
    def save_trace(self, trace: ClusterTrace) -> str:
        pass

    @abstractmethod
    def load_trace(self, path: str) -> ClusterTrace:
        pass

    @abstractmethod
    def save_spectra(self, trace: ClusterTrace, seed: int) -> Optional[str]:
        pass

    @abstractmethod
    def list_traces(self) -> List[str]:
        pass


class LocalCsvTraceStorage(TraceStorageBackend):
    """Stores traces under <base_dir>/traces and spectra under <base_dir>/spectra."""

    def __init__(self, base_dir: str = "results"):
        self.base_dir = base_dir
        self.trace_dir = os.path.join(base_dir, "traces")
        self.spectrum_dir = os.path.join(base_dir, "spectra")

    def _ensure_dir(self, path: str) -> None:
        try:
            os.makedirs(path, exist_ok=True)
        except OSError as e:
            raise OutputError(f"cannot create directory: {e}", path) from e

    def trace_path(self, trace: ClusterTrace) -> str:
        return os.path.join(self.trace_dir, f"trace_{trace_stem(trace.p, trace.n_prep_cycles)}.csv")

    def spectrum_path(self, trace: ClusterTrace) -> str:
        return os.path.join(self.spectrum_dir, f"spectrum_{trace_stem(trace.p, trace.n_prep_cycles)}.csv")

    def save_trace(self, trace: ClusterTrace) -> str:
        self._ensure_dir(self.trace_dir)
        path = self.trace_path(trace)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(TRACE_HEADER)
                for pt in trace.points:
                    writer.writerow([pt.n_cycles, fmt_float(pt.time), fmt_float(trace.p), fmt_float(pt.k)])
        except OSError as e:
            raise OutputError(f"failed to write trace: {e}", path) from e
        logging.info(f"[TRACE_STORE] Saved {len(trace.points)} points to {path}")
        return path

    def load_trace(self, path: str) -> ClusterTrace:
        """
        Read a trace CSV back.

        N0 comes from the file name; tau0 and tau_sigma are recovered from
        time / n_cycles and p.
        """
        match = _TRACE_NAME.search(os.path.basename(path))
        n0 = int(match.group("n0")) if match else 0
        try:
            with open(path, "r", encoding="utf-8", newline="") as f:
                rows = list(csv.DictReader(f))
        except OSError as e:
            raise OutputError(f"failed to read trace: {e}", path) from e
        if not rows:
            raise OutputError("trace file has no data rows", path)

        try:
            p = float(rows[0]["p"])
            points = [
                TracePoint(int(r["n_cycles"]), float(r["time_s"]), float(r["K"])) for r in rows
            ]
        except (KeyError, ValueError) as e:
            raise OutputError(f"malformed trace file: {e}", path) from e

        tau_c = next((pt.time / pt.n_cycles for pt in points if pt.n_cycles > 0), float("nan"))
        if p >= 1.0:
            tau0, tau_sigma = tau_c, 0.0
        else:
            tau0, tau_sigma = tau_c * (1.0 - p), tau_c * p
        if math.isnan(tau0):
            tau0 = 1.0
        trace = ClusterTrace(p=p, tau0=tau0, tau_sigma=tau_sigma, n_prep_cycles=n0)
        for pt in points:
            trace.add_point(pt)
        logging.info(f"[TRACE_STORE] Loaded {len(points)} points from {path}")
        return trace

    def save_spectra(self, trace: ClusterTrace, seed: int) -> Optional[str]:
        if not trace.spectra:
            return None
        self._ensure_dir(self.spectrum_dir)
        path = self.spectrum_path(trace)
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(SPECTRUM_HEADER)
                for pt, spec in zip(trace.points, trace.spectra):
                    for m in spec.orders():
                        writer.writerow([int(m), fmt_float(spec.amplitudes[int(m)]),
                                         pt.n_cycles, fmt_float(trace.p), seed])
        except OSError as e:
            raise OutputError(f"failed to write spectra: {e}", path) from e
        logging.info(f"[TRACE_STORE] Saved {len(trace.spectra)} spectra to {path}")
        return path

    def list_traces(self) -> List[str]:
        if not os.path.isdir(self.trace_dir):
            return []
        names = sorted(n for n in os.listdir(self.trace_dir) if _TRACE_NAME.search(n))
        return [os.path.join(self.trace_dir, n) for n in names]
