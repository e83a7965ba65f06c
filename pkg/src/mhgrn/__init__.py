"""Multi-hop graph relation network encoder with a brute-force path oracle."""

from .attention import AttentionParams, alpha_path, beta, gamma, node_score_f, node_score_g, rel_score_delta
from .baselines import RnParams, construct_equiv_params, khop_rn, rgcn_layer, rn_encode
from .encoder import (EncoderConfig, EncoderOutput, ModelParams, activate, encode, hop_attention,
                      multihop_pass, pool_answer, type_transform)
from .numkit import MLP, Rng, glorot_init, matmul, softmax
from .pathreason import ReasoningPath, brute_force_zk, count_paths, decode_path, enumerate_paths
from .qa import QaInstance, fd_train_step, option_scores, predict, qa_loss
from .relgraph import (KGStore, MultiRelGraph, NodeType, RelationVocab, extract_subgraph, load_kg,
                       merge_relation)

__version__ = "0.1.0"
