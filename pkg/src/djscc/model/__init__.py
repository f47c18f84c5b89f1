from .codec import (DOWNSCALES, Decoder, Encoder, JointModel, ModelConfig, check_extents,
                    jscd_decode, jsce_encode)
from .layers import AFModule, ChannelNorm, Conv, ConvBlock, Linear, Module, af_modulate, normalize_snr
from .scam import (SCAM, QualityTokenBank, ScamParams, attach_token, attention_weights,
                   detach_token, scam_pair, select_token)

__all__ = [
    "ModelConfig", "JointModel", "Encoder", "Decoder", "jsce_encode", "jscd_decode",
    "check_extents", "DOWNSCALES",
    "Module", "Linear", "ChannelNorm", "Conv", "ConvBlock", "AFModule", "af_modulate",
    "normalize_snr",
    "SCAM", "ScamParams", "QualityTokenBank", "select_token", "attach_token", "detach_token",
    "scam_pair", "attention_weights",
]
