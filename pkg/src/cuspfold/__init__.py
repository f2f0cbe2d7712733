"""Diagonal quadratic forms, cusped hyperbolic lattices and ping-pong certificates for folded doubles."""

from .grouppres import GroupConfig, Word, britton_reduce, evaluate, is_identity
from .hypgeom import build_broken_geodesic, check_certificate, choose_power, horoball_levels
from .lattice import ExactMatrix, corner_embed, eichler_transvection
from .montesinos import MontesinosParams, montesinos_form, replacement_prime, select_isotropic_subform
from .pipeline import faithfulness_sweep, hyperplane_invariance_check, run_pipeline
from .qforms import DiagonalForm, Place, hasse_invariant, hilbert_symbol, is_isotropic_global, rationally_equivalent
from .toys import toy_config

__version__ = "0.1.0"
