"""Noise characterization of Cartesian SENSE reconstructions."""

from .analysis import (
    NoiseMaps,
    ca_denoise,
    correlation_map,
    gfactor_map,
    line_covariance,
    noise_maps,
    rayleigh_sigma_estimate,
    scale_covariance,
    variance_map,
)
from .dft import alias_oracle, dft2, idft2, subsample_phase_encode
from .grid import CoilStack, ComplexImage, Domain
from .linalg import cholesky_factor, hermitian, hermitian_solve
from .montecarlo import ExperimentReport, ks_rayleigh, run_experiment1, run_map_experiment, sample_correlation
from .noise import CoilCovariance, Scale, sample_coil_noise
from .phantom import (
    PhantomKind,
    Profile,
    SensitivityMap,
    load_sensitivity,
    save_sensitivity,
    synth_phantom,
    synth_sensitivity,
)
from .sense import apply_sensitivity, build_unmixing, sense_unfold, sos_combine, unmixing_maps

__version__ = "0.1.0"
