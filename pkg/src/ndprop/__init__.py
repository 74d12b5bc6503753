"""Decision-propagation solvers for ground normal logic programs."""

from .program import GroundProgram, Rule, parse_program, serialize_program, validate
from .crisp import (
    enumerate_stable_models,
    immediate_consequence,
    is_stable,
    least_fixpoint,
)
from .dprop import dprop_run, dprop_step, guided_policy, init_state, random_policy, rdprop_solve
from .fuzzy import TNorm, certify, propagate, soft_consequence

__version__ = "0.1.0"
