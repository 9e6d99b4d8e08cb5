from __future__ import annotations

import logging

from .config import RunConfig, load_config
from .theta import ThetaField, solve_theta
from .utils import LoguruHandler, init_logger
from .pipeline import ForgeContext, run, mesh, sweep
from .oracle import CrossValidation, cross_validate, poincare_log_derivative
from .curve import (
    FrenetCurve,
    total_torsion,
    ingest_samples,
    ingest_analytic,
    calibrate_total_torsion,
)
from .germ import (
    SurfaceGerm,
    GermProfiles,
    build_germ,
    build_mesh,
    umbilic_roots,
    default_profiles,
    fundamental_forms,
)
from .hyperbolicity import (
    Verdict,
    HyperbolicityReport,
    lambda_sweep,
    dlambda_deps0,
    dlambda_dtheta0,
    certify_hyperbolic,
    characteristic_exponent,
)

__all__ = (
    # config
    "RunConfig",
    "load_config",
    # curve
    "FrenetCurve",
    "ingest_samples",
    "ingest_analytic",
    "total_torsion",
    "calibrate_total_torsion",
    # theta
    "ThetaField",
    "solve_theta",
    # germ
    "SurfaceGerm",
    "GermProfiles",
    "default_profiles",
    "build_germ",
    "fundamental_forms",
    "umbilic_roots",
    "build_mesh",
    # hyperbolicity
    "Verdict",
    "HyperbolicityReport",
    "characteristic_exponent",
    "dlambda_dtheta0",
    "dlambda_deps0",
    "certify_hyperbolic",
    "lambda_sweep",
    # oracle
    "CrossValidation",
    "poincare_log_derivative",
    "cross_validate",
    # pipeline
    "ForgeContext",
    "run",
    "sweep",
    "mesh",
    # utils
    "init_logger",
)


def _init_logger() -> None:
    handler = LoguruHandler()
    for name in ("py.warnings", "scipy", "numpy"):
        logging.getLogger(name).addHandler(handler)


_init_logger()
