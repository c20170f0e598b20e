"""Age-of-information simulator and analytics for two-hop multi-relay slotted ALOHA."""
from .analytics import aoi_bound, optimize_activation, success_prob
from .experiment import ExperimentSpec, emit_csv, figure_preset, run
from .model import AoiState, ConfigError, NetworkConfig, Packet, TransmissionPlan
from .schedkind import SchedulerKind
from .sim import simulate

__all__ = ["NetworkConfig", "ConfigError", "Packet", "AoiState", "TransmissionPlan", "SchedulerKind",
           "simulate", "aoi_bound", "success_prob", "optimize_activation", "ExperimentSpec", "run",
           "figure_preset", "emit_csv"]
__version__ = "0.1.0"
