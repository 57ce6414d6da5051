"""Lossless coding of integer frame volumes.

The pipeline: motion-compensated temporal lifting, a reversible 5/3
spatial wavelet per output frame, optional boundary re-sorting of detail
bands, and context-adaptive bitplane coding into a self-contained byte
container.
"""

from .container import (
    CodecConfig,
    EncodeStats,
    decode,
    encode,
    encode_with_stats,
    export_planes,
)
from .errors import CodecError, CorruptStreamError, FormatError
from .report import RateReport, analyze_frame, build_report
from .volume_io import (
    Frame,
    PhantomSpec,
    Volume,
    generate_phantom,
    read_volume,
    volume_from_array,
    write_volume,
)

__all__ = [
    "CodecConfig",
    "CodecError",
    "CorruptStreamError",
    "EncodeStats",
    "Frame",
    "FormatError",
    "PhantomSpec",
    "RateReport",
    "Volume",
    "analyze_frame",
    "build_report",
    "decode",
    "encode",
    "encode_with_stats",
    "export_planes",
    "generate_phantom",
    "read_volume",
    "volume_from_array",
    "write_volume",
]

__version__ = "0.1.0"
