from .config import ConfigError, ExperimentConfig, load_config
from .pipeline import StageError, run_experiment
from .plots import render_plots
from .scoring import MacroF1, macro_f1
from .seeds import derive_seed
