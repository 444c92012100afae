"""Spike-to-image trainer supervised by text-image feature alignment."""

from .data import (
    ClipRecord,
    class_names,
    load_image,
    load_manifest,
    read_spike_file,
    read_voxels,
    save_image,
    tfi_image,
    update_manifest_lq,
)
from .encoders import TinyEncoderPair, adapt_images, unit
from .errors import CliptrainError, DataError, NumericError
from .losses import class_loss, prompt_init_loss, prompt_loss
from .lrn import PARAM_BUDGET, ReconNet, param_count
from .prompts import ClassPromptBank, PromptPair
from .train import (
    TrainConfig,
    TrainSession,
    classify_eval,
    coarse_train,
    export_reconstructions,
    fine_train,
    manifest_images,
    optimize_prompts,
    prompt_separation_loss,
    seed_everything,
    state_checksum,
)

__version__ = "0.1.0"
