"""
Experiment configuration - YAML document validated by pydantic models.

設定ファイル (config/experiment.yaml) を読み込み、未知のキーは即エラーにする。
Environment variables (optionally from a .env file) and CLI flags override
the file; every override goes back through validation.
"""

import logging
import math
import os
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from src.logic.cluster import SizeEstimator
from src.logic.hamiltonian import CouplingModel, CouplingVariant
from src.logic.mqc import SpectrumSource
from src.logic.propagate import EigenBackend, PropagationBackend, PropagationMode, TrotterBackend
from src.logic.spin_hilbert import DEFAULT_MAX_SPINS
from src.utils.errors import ConfigError
from src.utils.progress_notifier import ProgressNotifier

DEFAULT_CONFIG_PATH = "config/experiment.yaml"


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class CouplingSection(_Section):
    variant: CouplingVariant = CouplingVariant.RANDOM_ALL_TO_ALL
    positions: Optional[List[Tuple[float, float, float]]] = None
    prefactor: float = 1.0
    scale: float = 1.0
    nearest_neighbor_strength: float = 1.0
    target_second_moment_hz: Optional[float] = 7900.0

    @field_validator("target_second_moment_hz")
    @classmethod
    def _positive_target(cls, v):
        if v is not None and v <= 0.0:
            raise ValueError("target_second_moment_hz must be positive")
        return v


class SystemSection(_Section):
    n_spins: int = Field(12, ge=1)
    label: str = "desk-scale"
    coupling: CouplingSection = CouplingSection()


class ScheduleSection(_Section):
    tau0_us: float = Field(57.6, gt=0.0)
    n_cycles: int = Field(40, ge=0)
    p_values: List[float] = [0.0, 0.034, 0.065, 0.108, 0.2, 0.5]
    prep_cycles: List[int] = [0]
    mode: PropagationMode = PropagationMode.STATIC

    @field_validator("p_values")
    @classmethod
    def _p_range(cls, v):
        if not v:
            raise ValueError("p_values must not be empty")
        for p in v:
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"p value {p} outside [0, 1]")
        return v

    @field_validator("prep_cycles")
    @classmethod
    def _prep_range(cls, v):
        if not v:
            raise ValueError("prep_cycles must not be empty")
        if any(n < 0 for n in v):
            raise ValueError("prep_cycles must be >= 0")
        return v

    @property
    def tau0(self) -> float:
        return self.tau0_us * 1e-6


class AnalysisSection(_Section):
    window_fraction: float = Field(1.0 / 3.0, gt=0.0, le=1.0)
    slope_tol: float = Field(0.05, gt=0.0)
    n_phi: Optional[int] = None
    spectrum_method: SpectrumSource = SpectrumSource.FFT
    estimator: SizeEstimator = SizeEstimator.MOMENT
    retain_spectra: bool = True
    min_fit_points: int = Field(3, ge=3)
    regime_tol: float = Field(0.1, gt=0.0)


class OutputFormat(str, Enum):
    CSV = "csv"
    SVG = "svg"


class OutputSection(_Section):
    directory: str = "results"
    formats: List[OutputFormat] = [OutputFormat.CSV, OutputFormat.SVG]


class BackendKind(str, Enum):
    EIGEN = "eigen"
    TROTTER = "trotter"


class BackendSection(_Section):
    kind: BackendKind = BackendKind.EIGEN
    trotter_step_us: float = Field(1.0, gt=0.0)


class RuntimeSection(_Section):
    max_workers: int = Field(1, ge=1)
    max_spins: int = Field(DEFAULT_MAX_SPINS, ge=1)


class ExperimentConfig(_Section):
    system: SystemSection = SystemSection()
    schedule: ScheduleSection = ScheduleSection()
    analysis: AnalysisSection = AnalysisSection()
    output: OutputSection = OutputSection()
    seed: int = Field(20100913, ge=0, lt=2 ** 64)
    backend: BackendSection = BackendSection()
    runtime: RuntimeSection = RuntimeSection()

    @model_validator(mode="after")
    def _cross_checks(self):
        if self.system.n_spins > self.runtime.max_spins:
            raise ValueError(
                f"system.n_spins={self.system.n_spins} exceeds runtime.max_spins={self.runtime.max_spins}"
            )
        coupling = self.system.coupling
        if coupling.variant is CouplingVariant.GEOMETRIC:
            if coupling.positions is None or len(coupling.positions) != self.system.n_spins:
                raise ValueError("geometric coupling needs one position per spin")
        if coupling.variant is not CouplingVariant.RANDOM_ALL_TO_ALL and self.system.n_spins < 2:
            raise ValueError(f"{coupling.variant.value} coupling needs at least 2 spins")
        if self.analysis.n_phi is not None:
            need = 2 * self.system.n_spins + 2
            if self.analysis.n_phi < need or self.analysis.n_phi % 2:
                raise ValueError(f"analysis.n_phi must be even and >= {need}")
        return self

    def coupling_model(self) -> CouplingModel:
        c = self.system.coupling
        target = None
        if c.target_second_moment_hz is not None:
            target = 2.0 * math.pi * c.target_second_moment_hz
        if c.variant is CouplingVariant.GEOMETRIC:
            return CouplingModel.geometric(c.positions, c.prefactor, target)
        if c.variant is CouplingVariant.CHAIN:
            return CouplingModel.chain(c.nearest_neighbor_strength, target)
        return CouplingModel.random_all_to_all(self.seed, c.scale, target)

    def make_backend(self, notifier: Optional[ProgressNotifier] = None) -> PropagationBackend:
        if self.backend.kind is BackendKind.TROTTER:
            return TrotterBackend(self.backend.trotter_step_us * 1e-6)
        return EigenBackend(notifier)

    def wants(self, fmt: OutputFormat) -> bool:
        return fmt in self.output.formats


def _format_validation_error(err: ValidationError) -> str:
    parts = []
    for e in err.errors():
        loc = ".".join(str(x) for x in e.get("loc", ())) or "<root>"
        parts.append(f"{loc}: {e.get('msg')}")
    return "; ".join(parts)


def validate_config(data: Dict[str, Any]) -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(data or {})
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {_format_validation_error(e)}") from e


def _env_overrides() -> Dict[str, Any]:
    overrides: Dict[str, Any] = {}
    if os.getenv("MQC_OUTPUT_DIR"):
        overrides.setdefault("output", {})["directory"] = os.environ["MQC_OUTPUT_DIR"]
    if os.getenv("MQC_MAX_WORKERS"):
        try:
            overrides.setdefault("runtime", {})["max_workers"] = int(os.environ["MQC_MAX_WORKERS"])
        except ValueError as e:
            raise ConfigError(f"MQC_MAX_WORKERS must be an integer: {e}") from e
    return overrides


def _merge(base: Dict[str, Any], extra: Dict[str, Any]) -> Dict[str, Any]:
    out = dict(base)
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: Optional[str] = None, use_env: bool = True) -> ExperimentConfig:
    """
    Load and validate the experiment configuration.

    Args:
        path: YAML file; defaults to $MQC_CONFIG or config/experiment.yaml.
              A missing default file yields the built-in defaults.
        use_env: apply MQC_* environment overrides

    Returns:
        ExperimentConfig
    """
    explicit = path is not None or bool(os.getenv("MQC_CONFIG"))
    path = path or os.getenv("MQC_CONFIG") or DEFAULT_CONFIG_PATH
    data: Dict[str, Any] = {}
    if os.path.exists(path):
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = yaml.safe_load(f) or {}
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"failed to read config {path}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigError(f"config {path} must be a mapping at the top level")
        logging.info(f"[CONFIG] Loaded {path}")
    elif explicit:
        raise ConfigError(f"config file not found: {path}")
    else:
        logging.info(f"[CONFIG] {path} not found, using built-in defaults")

    if use_env:
        data = _merge(data, _env_overrides())
    return validate_config(data)


def apply_overrides(cfg: ExperimentConfig, seed: Optional[int] = None,
                    backend: Optional[str] = None, n_spins: Optional[int] = None,
                    output_dir: Optional[str] = None) -> ExperimentConfig:
    """Return a re-validated copy with CLI overrides applied."""
    data = cfg.model_dump(mode="json")
    if seed is not None:
        data["seed"] = seed
    if backend is not None:
        data["backend"]["kind"] = backend
    if n_spins is not None:
        data["system"]["n_spins"] = n_spins
    if output_dir is not None:
        data["output"]["directory"] = output_dir
    return validate_config(data)
