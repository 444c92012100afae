"""Spike-camera toolkit: simulation, codec, reconstruction, quality, datasets."""

from .errors import (
    FitError,
    FormatError,
    NumericError,
    ParameterError,
    PipelineError,
    ShapeError,
    SpikecamError,
    TruncatedError,
)
from .image import IntensityImage, load_png, save_png
from .niqe import (
    AggdParams,
    NiqeModel,
    fit_aggd,
    fit_niqe_model,
    load_niqe_model,
    mscn,
    niqe_features,
    niqe_score,
    save_niqe_model,
)
from .pipeline import (
    DatasetManifest,
    ReconRegistry,
    build_dataset,
    default_registry,
    external_image_entry,
    load_manifest,
    select_hq,
)
from .reconstruct import IsiMap, VoxelGrid, isi_map, load_voxels, save_voxels, tfi, tfp, voxelize
from .scenes import SHAPE_CLASSES, shape_scene, synthetic_scene
from .simulate import SimConfig, simulate, simulate_constant
from .stream import SpikeStream, decode, encode, firing_rate, load_dat, read_spk, write_spk

__version__ = "0.1.0"

__all__ = [
    "AggdParams",
    "DatasetManifest",
    "FitError",
    "FormatError",
    "IntensityImage",
    "IsiMap",
    "NiqeModel",
    "NumericError",
    "ParameterError",
    "PipelineError",
    "ReconRegistry",
    "SHAPE_CLASSES",
    "ShapeError",
    "SimConfig",
    "SpikeStream",
    "SpikecamError",
    "TruncatedError",
    "VoxelGrid",
    "build_dataset",
    "decode",
    "default_registry",
    "encode",
    "external_image_entry",
    "firing_rate",
    "fit_aggd",
    "fit_niqe_model",
    "isi_map",
    "load_dat",
    "load_manifest",
    "load_niqe_model",
    "load_png",
    "load_voxels",
    "mscn",
    "niqe_features",
    "niqe_score",
    "read_spk",
    "save_niqe_model",
    "save_png",
    "save_voxels",
    "select_hq",
    "shape_scene",
    "simulate",
    "simulate_constant",
    "synthetic_scene",
    "tfi",
    "tfp",
    "voxelize",
    "write_spk",
]
