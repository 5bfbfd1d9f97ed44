"""Direct policy search, Youla synthesis and internal-stability audits for discrete-time SISO loops."""
from .audit import (AuditVerdict, audit_policy, cancellation_detector, empirical_instability_probe,
                    four_maps, internal_stability)
from .optim import NelderMeadConfig, nelder_mead
from .policies import Composite, Neural, NeuralStaticGain, PoleZero, StaticGain, policy_eval
from .search import LossSpec, evaluate_loss, prestabilize, train_policy
from .simulate import NoiseSpec, PulseSpec, Signal, make_pulse, simulate_loop
from .statespace import CoprimeFactors, GainPair, StateSpace, coprime_from_ss, lft_lower
from .tf import Polynomial, RationalTF, is_stable, l2_norm, poly_roots, tf_from_text
from .youla import FirstOrderProblem, closed_form_optimum, model_match_fir

__version__ = "0.1.0"
