"""Top-down affine jump-diffusion pricing and calibration for credit index derivatives."""

from .affine import (AffineCoeffs, CharArg, ModelParams, ParamSegment, TimeChange,
                     b_roots, char_fn, ode_oracle, psi, solve_segment)
from .calibration import (CalibResult, CalibSpec, MaturityQuotes, QuoteSet,
                          TrancheQuote, bootstrap_slopes, calibrate, objective)
from .config import RunConfig, get_config, set_config, update_config
from .largepool import LargePoolConsts, lp_expected_loss, lp_tranche_put, solve_mu
from .laws import DiscreteLoss, FixedLoss, JumpSizeLaw
from .lossdist import (BasketState, count_support, default_count_distribution,
                       digital_below, expected_defaults, infinite_pool_moments,
                       tranche_put)
from .market import MarketFile, load_bundled_market, load_market, parse_market
from .mc import PathStats, SimConfig, estimate_price, estimate_prices, simulate
from .pool import (PayoffKernelFT, PoolMatrix, build_pool_matrix, closed_form_pjk,
                   conditional_mean_var, kernel_ft_digital, kernel_ft_tranche)
from .pricers import (Basket, DiscountCurve, LegSchedule, TrancheSpec,
                      price_cdo_tranche, price_index_cds, price_ntd, quote_transform)
from .swaptions import (JointGrid, SwaptionSpec, joint_density, swaption_exact,
                        swaption_fast_payer, swaption_fast_receiver)

__version__ = "0.1.0"
