"""Two-stage federated jamming detection on synthetic 5G SSB waveforms.

The package synthesizes standards-shaped SSB datasets with configurable
channel/noise/jammer impairments, trains an autoencoder by federated
averaging, grafts a classifier head onto the frozen encoder for proximal
federated training, and reports detection metrics plus convergence and
heterogeneity diagnostics.
"""

from .config import ExperimentConfig, desk_preset, load_config, paper_scale_preset
from .dataset import (
    ClientDataset,
    ClientProfile,
    SsbObservation,
    load_dataset,
    save_dataset,
    synth_client_dataset,
)
from .errors import ConfigError, ContractError, DataFormatError, NumericError
from .federated import (
    FederationConfig,
    RoundRecord,
    aggregate,
    global_loss,
    local_update_fedavg,
    local_update_fedprox,
    run_rounds,
    select_clients,
)
from .impairments import NOISE_OFF, ChannelSpec, JammerSpec, apply_impairments
from .pipeline import (
    EvalReport,
    StageConfig,
    StagePhase,
    build_classifier,
    evaluate,
    pca_diagnostic,
    run_stage1,
    run_stage2,
    run_table_grid,
    run_two_stage,
)
from .sequences import CellIdentity, derive_pci, gen_pss, gen_sss
from .ssb import SsbGrid, build_ssb_grid, ofdm_modulate

__version__ = "0.1.0"
