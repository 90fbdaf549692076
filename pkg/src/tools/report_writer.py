"""
Report Writer
Plain-text reports for the power-law fit and the equilibrium experiment.
"""

import logging
import os
from typing import List, Sequence

from src.experiments.runner import EquilibriumGroup, FitOutcome
from src.memory.trace_store import fmt_float
from src.utils.errors import OutputError


def _write(path: str, lines: List[str]) -> str:
    try:
        directory = os.path.dirname(path)
        if directory:
            os.makedirs(directory, exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            f.write("\n".join(lines) + "\n")
    except OSError as e:
        raise OutputError(f"failed to write report: {e}", path) from e
    return path


def format_fit_report(outcome: FitOutcome) -> List[str]:
    fit = outcome.fit
    lines = [
        "# K_loc(p) power-law fit",
        f"exponent: {fmt_float(fit.exponent)}",
        f"exponent_stderr: {fmt_float(fit.exponent_stderr)}",
        f"prefactor: {fmt_float(fit.prefactor)}",
        f"intercept_stderr: {fmt_float(fit.intercept_stderr)}",
        f"summary: {fit.describe()}",
        "",
        "p,K_loc,localized",
    ]
    for p, k in fit.points_used:
        flag = "no" if p in outcome.non_localized else "yes"
        lines.append(f"{fmt_float(p)},{fmt_float(k)},{flag}")
    return lines


def write_fit_report(outcome: FitOutcome, path: str) -> str:
    _write(path, format_fit_report(outcome))
    logging.info(f"[REPORT] Fit report written to {path}")
    return path


def format_equilibrium_report(groups: Sequence[EquilibriumGroup]) -> List[str]:
    lines = ["# Plateau values across preparation lengths", "",
             "p,N0,K0,K_loc,localized,regime"]
    for group in groups:
        for trace in group.traces:
            k0 = trace.points[0].k if trace.points else float("nan")
            if trace.plateau is None:
                lines.append(f"{fmt_float(group.p)},{trace.n_prep_cycles},{fmt_float(k0)},,,")
                continue
            regime = group.regimes.get(trace.n_prep_cycles)
            lines.append(
                f"{fmt_float(group.p)},{trace.n_prep_cycles},{fmt_float(k0)},"
                f"{fmt_float(trace.plateau.k_loc)},{'yes' if trace.plateau.localized else 'no'},"
                f"{regime.value if regime else ''}"
            )
    lines += ["", "p,reference_K_loc,relative_spread"]
    for group in groups:
        ref = fmt_float(group.reference_k_loc) if group.reference_k_loc is not None else ""
        spread = fmt_float(group.spread) if group.spread is not None else ""
        lines.append(f"{fmt_float(group.p)},{ref},{spread}")
    return lines


def write_equilibrium_report(groups: Sequence[EquilibriumGroup], path: str) -> str:
    _write(path, format_equilibrium_report(groups))
    logging.info(f"[REPORT] Equilibrium report written to {path}")
    return path
