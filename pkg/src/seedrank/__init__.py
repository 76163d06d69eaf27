"""seedrank: seed set expansion on stochastic block models via
discriminant functions over random-walk landing probabilities."""

__version__ = "0.1.0"

from .errors import (DegenerateMomentsError, DegenerateParameterError,
                     NearSingularEstimatorError, NumericFailureError,
                     ParameterError, SeedrankError, SizeGuardError)
from .sbm import (AffiliationParams, Graph, SbmParams, affiliation_to_sbm,
                  expected_degree, generate, graph_from_edges, load_graph,
                  make_rng, save_graph)
from .walks import (LandingProfile, WalkConfig, class_mean_profiles,
                    landing_probabilities, walk_enumeration_oracle)
from .blocktheory import (AggregateRecurrence, CBlockRecurrence,
                          EigenSolution, HomogeneityReport, TheorySolution,
                          TwoBlockRecurrence, check_homogeneity,
                          eigen_solution, identical_blocks_alpha, psi_c_block,
                          psi_two_block, solve_aggregate, solve_c_block,
                          solve_two_block_closed, solve_two_block_iterative)
from .discriminants import (ClassMoments, DiscriminantModel, estimate_moments,
                            geometric_model, heat_kernel_weights, lin_sbmrank,
                            pooled_covariance, ppr_weights, quad_sbmrank,
                            rank_nodes, score, select_profile_length)
from .estimation import EstimatedParams, EstimatorMoments, estimate, moments
from .bp import BpParams, BpResult, BpState
from .bp import init as bp_init
from .bp import run as bp_run
from .bp import sweep as bp_sweep
from .evaluation import (QuantileBand, RecallCurve, labeling_from_scores,
                         pearson_correlation, quantile_bands, ranked_nodes,
                         recall_curve)
from .experiments import (EXPERIMENTS, METHODS, ExperimentConfig,
                          affiliation_from_sweep, run_experiment)
