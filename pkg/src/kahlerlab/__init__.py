"""Numerical checks of quantization identities on explicit Kahler manifolds."""
from .errors import (ConditioningError, ConfigError, DegenerateInputError, FitError, FlowError,
                     KahlerLabError, NodeMismatchError, NonPositiveMetricError, QuadratureError,
                     UnsupportedModelError)
from .manifold import (KahlerModel, QuadratureRule, ScalarField, integrate, make_fubini_study,
                       make_u1_sphere, model_from_config, perturb, product_model)
from .curvature import curvature_batch, hessian_pairing, laplacian, scalar_curvature
from .charforms import td2_recombination_residual, todd_in_chern_characters, z_density, z_integral_check
from .quantization import (bergman_density, donaldson_variation_residual, gram, kostant_souriau, toeplitz,
                           trace_expansion_check, tuynman_residual)
from .asymptotics import fit_expansion, identity_chain_check, tyz_coefficients, tyz_fit
from .flow import run_flow

__version__ = "0.1.0"
