"""Source-free domain adaptation through a diffusion-built pseudo-target domain.

Desk-scale implementation on a synthetic two-domain benchmark with a
closed-form Gaussian-mixture denoiser standing in for a trained diffusion
model.
"""

from .adapt import (
    AdaptationContext,
    IterationMetrics,
    PartitionResult,
    RefinementState,
    build_pseudo_target,
    partition,
    refine_once,
    run_refinement,
    select_model,
)
from .classifier import SoftmaxClassifier, TrainConfig, entropy, nuclear_norm, predict_probs, pseudo_label, train_ce
from .config import RunConfig, load_config
from .errors import ConfigError, DimensionError, DPTMError, OrderingError, SpecificationError, ValidationError
from .freq import FrequencyMask, high_band, low_band, mix_bands
from .guidance import GuidanceConfig, cfg_eps, ddim_invert_step, ddim_step
from .manipulate import ManipulatedSample, ManipulationConfig, assign_labels, manipulate_sample, manipulate_set, target_guided_init
from .oracle import MixtureWorld, eps_theta, posterior_x0
from .schedule import NoiseSchedule, forward_noise, make_linear_schedule
from .synthdata import BenchmarkSpec, build_world

__version__ = "0.1.0"
