from .fusion import (FusionKind, FusionConfig, FusionModule, ConcatFusion, SEFusion, CrossAttentionFusion,
                     build_fusion, fuse, fuse_concat, fuse_se, fuse_cross_attention, fusion_backward,
                     FusionGradients)
from .encoders import BranchEncoder, ToyCNN, ToyResNet, ToyViT
from .heads import HeadKind, HeadConfig, LogitHead, MapHead, build_head
from .model_registry import register_encoder, encoder_list, get_encoder_factory
from .flex_model import (BranchConfig, ModelConfig, ModalityBranches, FlexModel, build_model, batch_inputs,
                         encode, predict, predict_scores, loss, scores_bce)
