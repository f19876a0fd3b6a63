"""Learning Nash equilibria of tabular zero-sum Markov games with Nash-Q-FTRL."""

from .exact_eval import (NeGapReport, best_response_max, best_response_min,
                         eval_joint_mixture, eval_product_policy, ne_gap, solve_nash_exact)
from .game_model import (JointMixturePolicy, MarkovGame, load_game, lower_bound_game,
                         matching_pennies, random_game, save_game, validate_game)
from .nash_q_ftrl import LearnerConfig, LearnerResult, run

__version__ = "0.1.0"
