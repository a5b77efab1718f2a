from .config import ExperimentConfig, load_config, parse_config
from .experiment import DegradationSpec, NoiseSpec, degrade, run_experiment
from .io import export_kcpx, export_pgm, import_kcpx, import_pgm

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_config",
    "DegradationSpec",
    "NoiseSpec",
    "degrade",
    "run_experiment",
    "export_kcpx",
    "export_pgm",
    "import_kcpx",
    "import_pgm",
]
