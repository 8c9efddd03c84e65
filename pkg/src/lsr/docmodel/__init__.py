"""Documents, corpus files, dependency paths, node plans and synthetic data."""

from .corpus_io import convert_docred, document_from_dict, document_to_dict, load_corpus, save_corpus
from .nodeplan import build_node_plan, node_label
from .paths import anchor_token, extract_mdp, shortest_dep_path
from .synthetic import GeneratorSpec, generate_synthetic_corpus
from .types import (Corpus, CorpusError, Document, Entity, Mention, NodeDesc, NodeKind, NodePlan,
                    PlanMode, RelationFact, Sentence, check_tree)
