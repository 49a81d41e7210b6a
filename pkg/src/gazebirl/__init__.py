"""Gaze-informed Bayesian inverse reinforcement learning for tabletop placement."""

from .attention import FixationSummary, gripper_attention_ratio, infer_reference_frame, keyframe_attention_change, summarize_fixations
from .birl import BirlConfig, PosteriorChain, gaze_log_prior, log_likelihood, map_reward, run_mcmc
from .fixation import FilterConfig, Fixation, SceneRaster, detect_fixations
from .gaze_io import GazeTrace, InputError, KeyframeLog, ObjectSpec, parse_gaze_log, parse_keyframes, parse_object_specs
from .policy import evd, generalization_eval, placement_loss
from .reward import Instruction, RewardParams, TableConfig, TableObject, build_layout, rbf, reward
from .sim import Demonstration, sample_configurations, synthesize_demonstrations

__version__ = "0.1.0"
