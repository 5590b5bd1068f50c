"""Stable-slice dimension estimates for conformal skew products whose number
of preimages varies from point to point."""
from .errors import BowenDimError, BracketError, BudgetExceededError, EscapeError, ValidationError
from .geometry import SliceApprox, box_count, box_dimension, default_ladder, stable_slice_approx
from .preimage import OmegaMinorant, PreimageReport, build_omega_minorant, count_preimages, lambda_membership
from .pressure import (BowenRoot, PressureEstimate, bowen_root, epsilon_pressure, pressure_partition_sum,
                       pressure_spectral, similarity_dimension, variational_check)
from .symbolic import PotentialSpec, TransitionStructure, enumerate_words, perron_root
from .systems import HorseshoeParams, SkewSystem, build_example1, build_example2, build_ifs

__version__ = "0.1.0"
