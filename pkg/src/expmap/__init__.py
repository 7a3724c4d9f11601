"""Option pricing under exponential Markov additive (regime-switching Lévy) models."""
from .analysis import (IntegrabilityReport, MartingaleReport, check_integrability, discount_shift,
                       drift_correct, generator_values, martingale_class)
from .closed_form import (CpExpModel, SeriesTruncation, SkewModel, atm_price, call_price_series,
                          d_coefficients, kernel_R, residue_function, skew_call_price, skew_price_at_zero)
from .errors import (DegenerateDenominator, DivergentParameters, ExpMapError, GridTooCoarse, ModelError,
                     NonFinite, NotIntegrable, NoValidContour, PoleProximity, StripViolation, Truncated,
                     WrongStateCount)
from .estimates import PriceEstimate
from .laws import Degenerate, ExponentialNeg, ExponentialPos, Normal, TwoSidedExponential
from .map_core import (CramerResult, cramer_number, eigen2, laplace_exponent, matrix_exponent,
                       principal_eigenvalue, transform_matrix, transform_matrix_2state, transition_mgf)
from .mellin_pricer import (CallPriceSurface, ContourSpec, PayoffSpec, call_curve, pide_residual,
                            price_call, price_general, price_put, put_curve, select_contour)
from .model import LevyComponent, MapModel
from .shipped import load_shipped, shipped_model_names, shipped_models
from .simulator import (McConfig, coupled_counts, mc_asian, mc_european, mc_european_curve,
                        mc_expectation, mc_joint_transform, sample_path, simulate, sup_tail_check)

__version__ = "0.1.0"
