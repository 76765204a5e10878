"""Dithered one-bit sensing recast as linear feasibility.

Modules
-------
quantizer   dither generation and sign measurements
models      Direct / Linear / QuadraticLifted / Trace measurement models
polyhedron  the stacked inequality system and its diagnostics
solvers     randomized Kaczmarz (RKA) and sampling Kaczmarz-Motzkin (SKM)
experiments error-decay sweeps, spread proxy and structure-gap runs
cli         ``onebit`` command-line entry point
"""
from .models import (
    Direct,
    GroundTruth,
    Linear,
    LowRank,
    QuadraticLifted,
    Rank1Symmetric,
    Sparse,
    Trace,
    extract_vector,
    flatten_row,
    measure,
    project_structure,
)
from .polyhedron import OneBitPolyhedron, build, membership, residual, scaled_condition_number
from .quantizer import Gaussian, SignData, ThresholdScheme, UniformRange, generate_thresholds, quantize
from .solvers import SolverConfig, SolverReport, rka_step, sampling_histogram, skm_step, solve

__version__ = "0.1.0"
