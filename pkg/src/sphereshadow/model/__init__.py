from .layers import LayerNorm, Linear, Module
from .network import (
    INFRARED,
    VISIBLE,
    Decoder,
    Encoder,
    FeatureBundle,
    ForwardResult,
    ModelDims,
    ShadowRemovalNet,
    SphereTransform,
    decompose,
    fuse,
    pad_to_multiple,
)
from .swin import SwinBlock, WindowAttention, swin_block
