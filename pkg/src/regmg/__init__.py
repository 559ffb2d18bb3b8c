"""Entropy-regularized policy gradient descent ascent for two-player zero-sum Markov games."""
from ._backend import current as backend
from .best_response import (
    BestResponse,
    g_tau,
    hard_best_response_max,
    hard_best_response_min,
    soft_best_response_max,
    soft_best_response_min,
)
from .equilibrium import (
    EquilibriumSolution,
    MatrixGame,
    estimate_c,
    shapley_solve,
    solve_matrix_game_exact,
    solve_matrix_game_regularized,
)
from .evaluation import (
    EvalResult,
    advantage,
    check_gradient,
    evaluate,
    gradients,
    objective,
    value_regularized,
    visitation,
)
from .game import (
    MarkovGame,
    PolicyPair,
    PolicyParams,
    load_game,
    policy_entropy,
    save_game,
    softmax_policies,
)
from .gda import (
    RunResult,
    Schedule,
    TheoremConstants,
    check_initial_condition,
    check_theorem1_stepsizes,
    gda_step,
    run_algorithm1,
    run_algorithm2,
    run_fixed_tau,
    run_vanilla_gda,
)
from .library import GeneratorSpec, generate, paper_game_deterministic, paper_game_mixed
from .metrics import IterateRecord, compute_deltas, compute_unregularized_gaps, read_csv, write_csv

__version__ = "0.1.0"
