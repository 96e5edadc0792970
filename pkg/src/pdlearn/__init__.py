"""Distribution-learning loss geometry and its verification toolkit.

The package couples pluggable convex generators (squared L2, negative
entropy on the simplex, norm powers) with small auditable networks,
structure-matrix diagnostics, optimal-step SGD, and exact finite-support
risk/generalization bound calculators.  Every identity and inequality it
implements is re-checkable through the ``verify`` CLI command or the
test suite.
"""

from .errors import (ConfigError, IdxFormatError, InputError, NumericalError,
                     PdlearnError, RankDeficiencyError)
from .generators import (NegEntropySimplex, NormPowerFn, NormPowerGenerator,
                         SquaredL2, bregman_gap, conjugate_norm_power,
                         euler_residual, fy_loss, generalized_entropy_terms,
                         make_generator, one_hot)
from .netcore import (BlockSpec, NetworkSpec, ParamVector, fd_grad_oracle,
                      forward, init_params, jacobian, loss_grad, model_preset,
                      zero_params)
from .diagnostics import (MetricsRow, dataset_lambda_min, fitting_error_l2,
                          gradient_energy, jacobi_eigh, local_pearson,
                          sample_bounds, structure_matrix, sym_eigs_extreme)
from .optim import (SgdConfig, TrainTrace, descent_decrement,
                    estimate_majorant, h_sandwich_check, optimal_step,
                    sgd_step, train)
from .bounds import (EmpiricalPD, FinitePD, empirical_from_samples, gen_bound,
                     gamma_max_loss, gamma_via_pmin, information_loss,
                     mc_generalization_check, reg_equivalence_probe, risk,
                     risk_bounds, risk_decomposition_residual)
from .dataio import (IdxDataset, SyntheticTaskSpec, load_idx, make_synthetic,
                     sample, save_idx_images, save_idx_labels, subsample)

__version__ = "0.1.0"
