"""Python bindings for the icp image container, feature jobs and dispatch matcher."""

from ._core import (  # noqa: F401
    Algorithm,
    BigImage,
    ColorMode,
    IcpError,
    IndexEntry,
    Keypoint,
    PImage,
    PixelMatrix,
    decode_pnm,
    decode_record,
    encode_pnm,
    encode_record,
    filename_id,
    grey_value,
    harris,
    match_params,
    pack_directory,
    partition,
    run_job,
    sift,
    to_grey,
    value_noise,
    white_square,
)

__all__ = [name for name in dir() if not name.startswith("_")]
