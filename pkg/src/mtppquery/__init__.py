"""Probabilistic queries over marked temporal point processes.

Hitting times, n-th mark marginals, "A before B" and general restricted-mark
queries, estimated by restricted-mark importance sampling or naive simulation.
"""
from ._accel import JIT_ENABLED
from .core import (BadMark, EventSequence, HorizonViolation, IntensityModel, InvalidInterval,
                   InvalidSchedule, MarkedEvent, MarkSet, OrderingViolation, RestrictionSchedule,
                   read_sequences, write_sequences)
from .hawkes import HawkesModel, HawkesParams, PoissonModel, PoissonParams, load_model, random_hawkes
from .queries import (ABeforeB, EstimateResult, HittingTimeCdf, InvalidQuery, NextMark,
                      NextTimeCdf, NthMark, OverlappingMarkSets, RestrictedMark,
                      a_before_b_estimate, a_before_b_pair, estimate, hitting_time_cdf_estimate,
                      importance_estimate, joint_next_event_prob, naive_estimate, next_mark_prob,
                      next_time_cdf, nth_mark_estimate, query_from_json,
                      restricted_mark_estimate)
from .sampling import (BudgetExceeded, RngStream, TrajectoryBudget, sample_restricted,
                       sample_thinning, sample_until_nth_event)

__version__ = "0.1.0"
