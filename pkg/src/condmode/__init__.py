"""Exact and attribute-conditional mode search for autoregressive sequence models."""

from .model import (EOS, EOS_ID, AutoregressiveModel, Hypothesis, ModelState, Vocab,
                    model_from_json, model_to_json, sample, sequence_log_prob)
from .synthetic import (CriticalEpsilon, ExplicitDistribution, LengthFamilyModel, MixtureSpec,
                        TrieModel, build_mixture, critical_epsilon, length_family,
                        to_autoregressive, typo_channel, uniform, uniform_mixture)
from .ngram import NgramLM, train
from .exact import (ModeResult, SearchBudget, SearchStats, empty_mode_report, global_mode,
                    length_conditional_mode)
from .predictors import (AttributePredictor, ConstantPredictor, ExactLengthPredictor,
                         FirstTokenPredictor, MonteCarloPredictor, bucket_of)
from .beam import (BeamConfig, BeamEntry, Winrate, beam_search, conditional_beam,
                   length_constrained_beam, winrate)
from .oracle import brute_force_mode, enumerate_complete

__version__ = "0.1.0"

__all__ = [
    "AttributePredictor",
    "AutoregressiveModel",
    "BeamConfig",
    "BeamEntry",
    "ConstantPredictor",
    "CriticalEpsilon",
    "EOS",
    "EOS_ID",
    "ExactLengthPredictor",
    "ExplicitDistribution",
    "FirstTokenPredictor",
    "Hypothesis",
    "LengthFamilyModel",
    "MixtureSpec",
    "ModeResult",
    "ModelState",
    "MonteCarloPredictor",
    "NgramLM",
    "SearchBudget",
    "SearchStats",
    "TrieModel",
    "Vocab",
    "Winrate",
    "beam_search",
    "brute_force_mode",
    "bucket_of",
    "build_mixture",
    "conditional_beam",
    "critical_epsilon",
    "empty_mode_report",
    "enumerate_complete",
    "global_mode",
    "length_conditional_mode",
    "length_constrained_beam",
    "length_family",
    "model_from_json",
    "model_to_json",
    "sample",
    "sequence_log_prob",
    "to_autoregressive",
    "train",
    "typo_channel",
    "uniform",
    "uniform_mixture",
    "winrate",
]
