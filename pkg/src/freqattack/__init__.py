"""freqattack: wavelet-packet frequency analysis of adversarial
perturbations and a band-constrained query-efficient black-box attack."""

__version__ = "0.1.0"

from .core import (
    LabeledDataset,
    clip01,
    load_cifar10_binary,
    load_png,
    load_raw_tensor,
    make_rng,
    save_png,
    save_raw_tensor,
    synthetic_dataset,
)
from .wavelet import (
    BandTree,
    WaveletFilter,
    basis_image,
    decompose_image,
    get_filter,
    iwpd_step_1d,
    reconstruct_image,
    tree_layout,
    wpd_step_1d,
)
from .metrics import (
    AggregateReport,
    NdvConfig,
    PairMetrics,
    aggregate,
    compute_pair_metrics,
    cosine_similarity,
    lp_metrics,
    ndv,
    ssim,
)
from .whitebox import (
    FgsmConfig,
    MlpModel,
    PgdConfig,
    fgsm,
    forward,
    init_model,
    input_gradient,
    load_checkpoint,
    pgd,
    save_checkpoint,
    train,
)
from .oracle import (
    BuiltinOracle,
    HttpOracle,
    OracleError,
    OracleSpec,
    StdioOracle,
    predicted_label,
)
from .attack import AttackConfig, AttackResult, run_attack
from .analysis import band_similarity_study, evaluate_attack, ablation_run
