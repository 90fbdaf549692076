import logging
import os
from enum import Enum
from typing import List, Optional

from src.experiments.runner import ExperimentResults, ExperimentRunner, fit_localization
from src.memory.trace_store import LocalCsvTraceStorage, TraceStorageBackend, trace_stem
from src.tools.heatmap_renderer import HeatmapSummary, render_heatmap
from src.tools.report_writer import write_equilibrium_report, write_fit_report
from src.utils.config_loader import ExperimentConfig, OutputFormat
from src.utils.errors import InsufficientDataError, SimulationError
from src.utils.progress_notifier import ProgressNotifier, ProgressStage, get_progress_notifier
from src.version import get_version_info


class Command(str, Enum):
    GROWTH = "growth"
    LOCALIZE = "localize"
    EQUILIBRIUM = "equilibrium"
    FIT = "fit"
    ALL = "all"
    VERSION = "version"


class Orchestrator:
    """
    Routes a CLI command to the runner and writes the results.

    The runner (and with it the Hamiltonians) is created lazily, so `fit`
    on stored traces and `version` never build the spin system.
    """

    def __init__(self, cfg: ExperimentConfig, storage: Optional[TraceStorageBackend] = None,
                 notifier: Optional[ProgressNotifier] = None):
        self.cfg = cfg
        self.storage = storage or LocalCsvTraceStorage(cfg.output.directory)
        self.notifier = notifier or get_progress_notifier()
        self._runner: Optional[ExperimentRunner] = None
        self.heatmaps: List[HeatmapSummary] = []

    @property
    def runner(self) -> ExperimentRunner:
        if self._runner is None:
            self._runner = ExperimentRunner(self.cfg, self.notifier)
        return self._runner

    def route(self, command: Command) -> Optional[ExperimentResults]:
        command = Command(command)
        logging.info(f"[ORCHESTRATOR] Command: {command.value}")
        if command is Command.VERSION:
            logging.info(get_version_info())
            return None

        results = ExperimentResults()
        try:
            if command in (Command.GROWTH, Command.ALL):
                results.growth = self.runner.run_growth()
            if command in (Command.LOCALIZE, Command.ALL):
                results.localization = self.runner.run_localization()
            if command in (Command.EQUILIBRIUM, Command.ALL):
                results.equilibrium = self.runner.run_equilibrium()
            if command is Command.ALL:
                results.fit = fit_localization(results.localization, self.cfg.analysis, self.notifier)
            if command is Command.FIT:
                self._fit_from_storage(results)
            self.emit_outputs(results)
        except SimulationError as e:
            self.notifier.notify(ProgressStage.ERROR, f"{command.value} failed", detail=f"{e.category}: {e}")
            raise
        self.notifier.notify(ProgressStage.COMPLETED, f"{command.value} finished")
        return results

    def _fit_from_storage(self, results: ExperimentResults) -> None:
        paths = self.storage.list_traces()
        traces = [self.storage.load_trace(p) for p in paths]
        traces = [t for t in traces if t.n_prep_cycles == 0]
        if not traces:
            logging.info("[ORCHESTRATOR] No stored traces, running the localization experiment first")
            results.localization = self.runner.run_localization()
            traces = results.localization
        else:
            logging.info(f"[ORCHESTRATOR] Fitting {len(traces)} stored traces")
        results.fit = fit_localization(traces, self.cfg.analysis, self.notifier)

    def emit_outputs(self, results: ExperimentResults) -> List[str]:
        """
        Write trace CSVs, spectrum CSVs, SVG heatmaps and reports.

        Returns:
            Paths written, in a deterministic order.
        """
        if results.is_empty():
            raise InsufficientDataError("nothing to write: results are empty")
        self.notifier.notify(ProgressStage.WRITING, f"writing outputs to {self.cfg.output.directory}")
        written: List[str] = []
        traces = results.all_traces()

        if self.cfg.wants(OutputFormat.CSV):
            for trace in traces:
                written.append(self.storage.save_trace(trace))
                spectra_path = self.storage.save_spectra(trace, self.cfg.seed)
                if spectra_path:
                    written.append(spectra_path)

        if self.cfg.wants(OutputFormat.SVG):
            heatmap_dir = os.path.join(self.cfg.output.directory, "heatmaps")
            for trace in traces:
                if not trace.spectra:
                    logging.warning(f"[ORCHESTRATOR] p={trace.p:g} kept no spectra, no heatmap")
                    continue
                path = os.path.join(heatmap_dir, f"heatmap_{trace_stem(trace.p, trace.n_prep_cycles)}.svg")
                self.heatmaps.append(render_heatmap(trace, path))
                written.append(path)

        reports = os.path.join(self.cfg.output.directory, "reports")
        if results.fit is not None:
            written.append(write_fit_report(results.fit, os.path.join(reports, "fit_report.txt")))
        if results.equilibrium:
            written.append(write_equilibrium_report(
                results.equilibrium, os.path.join(reports, "equilibrium_report.txt")))

        logging.info(f"[ORCHESTRATOR] Wrote {len(written)} files")
        return written
