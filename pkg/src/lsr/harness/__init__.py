"""Training, evaluation, checkpoints, CLI and report figures."""

from .checkpoint import Checkpoint, load_checkpoint, save_checkpoint
from .config import ConfigError, RunConfig, load_config
from .metrics import (MetricsReport, ScoredFact, evaluate, facts_above, gold_facts, is_intra_pair,
                      pick_threshold, train_fact_keys)
from .training import induce_structure, model_from_checkpoint, predict, score_corpus, train
