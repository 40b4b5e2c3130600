"""模型模块

教师文本编码器、学生语音编码器、投影头、ASR 解码器以及把它们组织在一起的模型组。
"""

from .bundle import (
    GROUPS,
    ModelBundle,
    decode_asr_step,
    decoder_inputs,
    decoder_logits,
    embed_speech_states,
    encode_speech,
    encode_speech_batch,
    encode_text,
    encode_text_batch,
    greedy_decode,
    greedy_decode_batch,
    init_bundle,
    pad_frames,
    pad_tokens,
    speech_states,
)
from .checkpoint import (
    CheckpointFile,
    blob_hash,
    file_hash,
    load_checkpoint,
    save_checkpoint,
)
from .decoder import Decoder
from .layers import Module
from .speech_encoder import ProjectionHead, SpeechEncoder
from .text_encoder import TextEncoder

__all__ = [
    "GROUPS",
    "ModelBundle",
    "decode_asr_step",
    "decoder_inputs",
    "decoder_logits",
    "embed_speech_states",
    "encode_speech",
    "encode_speech_batch",
    "encode_text",
    "encode_text_batch",
    "greedy_decode",
    "greedy_decode_batch",
    "init_bundle",
    "pad_frames",
    "pad_tokens",
    "speech_states",
    "CheckpointFile",
    "blob_hash",
    "file_hash",
    "load_checkpoint",
    "save_checkpoint",
    "Decoder",
    "Module",
    "ProjectionHead",
    "SpeechEncoder",
    "TextEncoder",
]
