"""
Experiment Runner
Runs the growth, localization and equilibrium experiments for one
configuration and fits K_loc(p).

一つの (p, N0) ランは順伝播と逆伝播 (デコード) の軌跡を同時に進め、
各サイクルで MQC スペクトルとクラスターサイズを求める。
"""

import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from src.logic.cluster import (
    ClusterTrace,
    PowerLawFit,
    Regime,
    TracePoint,
    classify_regime,
    estimate_cluster_size,
    plateau,
    powerlaw_fit,
    relative_spread,
)
from src.logic.hamiltonian import (
    PerturbationSpec,
    build_h0,
    build_h_eff,
    build_sigma,
    couplings_from_model,
)
from src.logic.mqc import compute_spectrum
from src.logic.propagate import (
    CycleSchedule,
    PropagationMode,
    backward_trajectory,
    forward_trajectory,
    reverse_hamiltonian,
)
from src.logic.spin_hilbert import OperatorKind, OperatorMatrix, build_basis
from src.utils.config_loader import AnalysisSection, ExperimentConfig
from src.utils.errors import InsufficientDataError
from src.utils.progress_notifier import ProgressNotifier, ProgressStage, get_progress_notifier


@dataclass
class EquilibriumGroup:
    """Traces sharing one p, prepared with different N0."""
    p: float
    traces: List[ClusterTrace]
    reference_k_loc: Optional[float] = None
    spread: Optional[float] = None
    regimes: Dict[int, Regime] = field(default_factory=dict)


@dataclass
class FitOutcome:
    fit: PowerLawFit
    non_localized: List[float] = field(default_factory=list)


@dataclass
class ExperimentResults:
    growth: Optional[ClusterTrace] = None
    localization: List[ClusterTrace] = field(default_factory=list)
    equilibrium: List[EquilibriumGroup] = field(default_factory=list)
    fit: Optional[FitOutcome] = None

    def all_traces(self) -> List[ClusterTrace]:
        """Every trace once per (p, N0), first occurrence wins."""
        candidates = [self.growth] if self.growth is not None else []
        candidates += self.localization
        for group in self.equilibrium:
            candidates += group.traces
        seen = set()
        traces = []
        for trace in candidates:
            key = (trace.p, trace.n_prep_cycles)
            if key not in seen:
                seen.add(key)
                traces.append(trace)
        return traces

    def is_empty(self) -> bool:
        return not self.all_traces() and self.fit is None


class ExperimentRunner:
    """
    Holds the spin system and Hamiltonians of one configuration.

    H_0, its time reversal and Sigma are built once and shared by all runs so
    the eigen backend diagonalises each generator only once.
    """

    def __init__(self, cfg: ExperimentConfig, notifier: Optional[ProgressNotifier] = None):
        self.cfg = cfg
        self.notifier = notifier or get_progress_notifier()
        n = cfg.system.n_spins
        self.system = couplings_from_model(cfg.coupling_model(), n, label=cfg.system.label)
        self.basis = build_basis(n, max_spins=cfg.runtime.max_spins)
        self.h0 = build_h0(self.system)
        self.h0_reversed = reverse_hamiltonian(self.h0)
        self.sigma = build_sigma(self.system)
        self.backend = cfg.make_backend(self.notifier)
        self._h_eff: Dict[float, OperatorMatrix] = {}
        self._lock = threading.Lock()

        tau0 = cfg.schedule.tau0
        logging.info(
            f"[RUNNER] N={n}, backend={self.backend.name}, mode={cfg.schedule.mode.value}, "
            f"d_RMS*tau0={self.system.rms_coupling() * tau0:.6g}"
        )

    def _h_eff_for(self, p: float) -> OperatorMatrix:
        with self._lock:
            h = self._h_eff.get(p)
            if h is None:
                h = build_h_eff(self.system, PerturbationSpec(p), h0=self.h0, sigma=self.sigma)
                self._h_eff[p] = h
            return h

    def run_trace(self, p: float, n_prep_cycles: int = 0,
                  n_cycles: Optional[int] = None) -> ClusterTrace:
        """
        K(n tau_c) for n = 0..n_cycles at perturbation strength p.

        The n = 0 point is the prepared state (K = 1 for N0 = 0).
        """
        sched_cfg = self.cfg.schedule
        analysis = self.cfg.analysis
        n_cycles = sched_cfg.n_cycles if n_cycles is None else n_cycles
        schedule = CycleSchedule.for_strength(sched_cfg.tau0, p, n_cycles, n_prep_cycles)
        pert = PerturbationSpec(p)
        mode = sched_cfg.mode
        # p = 1 は有限の tau0 分割を持たないので static のみ
        if mode is PropagationMode.SEGMENTED and p >= 1.0:
            mode = PropagationMode.STATIC
        h_eff = self._h_eff_for(p) if mode is PropagationMode.STATIC else None

        trace = ClusterTrace(
            p=p,
            tau0=schedule.tau0,
            tau_sigma=schedule.tau_sigma,
            n_prep_cycles=n_prep_cycles,
            spectra=[] if analysis.retain_spectra else None,
            label=self.cfg.system.label,
        )
        run_name = f"p={p:g} N0={n_prep_cycles}"
        self.notifier.notify(ProgressStage.SIMULATING, f"run {run_name} started")
        start = time.time()

        forward = forward_trajectory(self.system, schedule, pert, self.backend, mode,
                                     h0=self.h0, h_eff=h_eff)
        backward = backward_trajectory(self.system, schedule, self.backend,
                                       h0_reversed=self.h0_reversed)
        n = self.system.n_spins
        for step, (rho, obs) in enumerate(zip(forward, backward)):
            spec = compute_spectrum(
                OperatorMatrix(rho, OperatorKind.HERMITIAN, n),
                OperatorMatrix(obs, OperatorKind.HERMITIAN, n),
                self.basis,
                analysis.spectrum_method,
                analysis.n_phi,
            )
            k = estimate_cluster_size(spec, analysis.estimator)
            trace.add_point(TracePoint(step, step * schedule.tau_c, k, spec.normalization), spec)
            logging.debug(f"[RUNNER] {run_name} n={step} K={k:.6g} echo={spec.normalization:.6g}")

        logging.info(
            f"[PERFORMANCE] run {run_name}: {len(trace.points)} points in {time.time() - start:.2f}s"
        )
        self.notifier.notify(ProgressStage.SIMULATING, f"run {run_name} completed",
                             detail=f"final K={trace.points[-1].k:.4g}")
        return trace

    def _run_many(self, jobs: Sequence[Tuple[float, int]]) -> List[ClusterTrace]:
        """Run independent (p, N0) jobs; results come back in job order."""
        workers = min(self.cfg.runtime.max_workers, max(1, len(jobs)))
        total = len(jobs)
        if workers == 1:
            traces = []
            for done, (p, n0) in enumerate(jobs, start=1):
                traces.append(self.run_trace(p, n0))
                self.notifier.notify(ProgressStage.SIMULATING, "runs", done=done, total=total)
            return traces

        with ThreadPoolExecutor(max_workers=workers) as executor:
            futures = [executor.submit(self.run_trace, p, n0) for p, n0 in jobs]
            traces = []
            for done, future in enumerate(futures, start=1):
                traces.append(future.result())
                self.notifier.notify(ProgressStage.SIMULATING, "runs", done=done, total=total)
        return traces

    def run_growth(self) -> ClusterTrace:
        """Unperturbed evolution (p = 0, N0 = 0)."""
        self.notifier.notify(ProgressStage.STARTING, "growth experiment")
        return attach_plateau(self.run_trace(0.0, 0), self.cfg.analysis)

    def run_localization(self) -> List[ClusterTrace]:
        """One trace per configured p, each with its plateau analysis."""
        p_values = self.cfg.schedule.p_values
        self.notifier.notify(ProgressStage.STARTING, f"localization experiment, {len(p_values)} p values")
        traces = self._run_many([(p, 0) for p in p_values])
        return [attach_plateau(t, self.cfg.analysis) for t in traces]

    def run_equilibrium(self) -> List[EquilibriumGroup]:
        """
        Perturbed evolution of clusters prepared by N0 unperturbed cycles.

        Per p, the plateau values across N0 are compared (relative spread)
        and each trace is labelled shrinking, growing or stationary against
        the reference K_loc (the N0 = 0 plateau when present, otherwise the
        mean plateau).
        """
        sched = self.cfg.schedule
        self.notifier.notify(
            ProgressStage.STARTING,
            f"equilibrium experiment, {len(sched.p_values)} p x {len(sched.prep_cycles)} N0",
        )
        jobs = [(p, n0) for p in sched.p_values for n0 in sched.prep_cycles]
        traces = [attach_plateau(t, self.cfg.analysis) for t in self._run_many(jobs)]

        groups = []
        for p in sched.p_values:
            members = [t for t in traces if t.p == p]
            group = EquilibriumGroup(p=p, traces=members)
            k_locs = [t.plateau.k_loc for t in members if t.plateau is not None]
            if k_locs:
                ref = next((t.plateau.k_loc for t in members
                            if t.n_prep_cycles == 0 and t.plateau is not None), None)
                group.reference_k_loc = ref if ref is not None else sum(k_locs) / len(k_locs)
                group.spread = relative_spread(k_locs)
                for t in members:
                    group.regimes[t.n_prep_cycles] = classify_regime(
                        t, group.reference_k_loc, self.cfg.analysis.regime_tol
                    )
                logging.info(
                    f"[RUNNER] p={p:g}: K_loc spread across N0 = {group.spread:.3%}"
                )
            groups.append(group)
        return groups


def attach_plateau(trace: ClusterTrace, analysis: AnalysisSection) -> ClusterTrace:
    try:
        trace.plateau = plateau(trace, analysis.window_fraction, analysis.slope_tol)
    except InsufficientDataError as e:
        logging.warning(f"[RUNNER] no plateau analysis for p={trace.p:g}: {e}")
    return trace


def fit_localization(traces: Sequence[ClusterTrace], analysis: AnalysisSection,
                     notifier: Optional[ProgressNotifier] = None) -> FitOutcome:
    """
    K_loc = a p^b over all p > 0 traces.

    Traces not flagged localized still contribute their window mean; they
    are logged and listed in the outcome.
    """
    notifier = notifier or get_progress_notifier()
    points = []
    flagged = []
    for t in sorted(traces, key=lambda tr: tr.p):
        if t.p <= 0.0:
            continue
        if t.plateau is None:
            attach_plateau(t, analysis)
        if t.plateau is None:
            continue
        if not t.plateau.localized:
            logging.warning(
                f"[RUNNER] p={t.p:g} is not localized (slope {t.plateau.slope:.3g}); "
                f"used in the fit anyway"
            )
            notifier.notify(ProgressStage.WARNING, f"p={t.p:g} not localized",
                            detail=f"slope {t.plateau.slope:.3g}")
            flagged.append(t.p)
        points.append((t.p, t.plateau.k_loc))

    if len(points) < analysis.min_fit_points:
        raise InsufficientDataError(
            f"fit needs >= {analysis.min_fit_points} p > 0 plateaus, got {len(points)}"
        )
    fit = powerlaw_fit(points)
    logging.info(f"[RUNNER] {fit.describe()}")
    notifier.notify(ProgressStage.ANALYZING, "power-law fit", detail=fit.describe())
    return FitOutcome(fit=fit, non_localized=flagged)
