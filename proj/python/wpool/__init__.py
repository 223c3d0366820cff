"""Weight-pool compression and bit-serial lookup inference."""

from ._core import (
    CompressedModel,
    LayerSpec,
    LutTable,
    ModelGraph,
    WpoolError,
    bit_decompose,
    build_lut,
    cli,
    compress,
    compression_ratio,
    compression_report,
    load_tensor,
    lut_storage_bits,
    quantize,
    reference_conv,
    run,
    run_reference,
    save_tensor,
    search_activation_range,
)

__all__ = [
    "CompressedModel",
    "LayerSpec",
    "LutTable",
    "ModelGraph",
    "WpoolError",
    "bit_decompose",
    "build_lut",
    "cli",
    "compress",
    "compression_ratio",
    "compression_report",
    "load_tensor",
    "lut_storage_bits",
    "quantize",
    "reference_conv",
    "run",
    "run_reference",
    "save_tensor",
    "search_activation_range",
]
