"""Wavelet-recurrent raw downscaler: python surface over the C++ core."""

from ._core import (  # noqa: F401
    ContractError,
    IoError,
    downscale,
    dwt2,
    dwt_pyramid,
    generate_pair,
    grad_check_primitives,
    idwt2,
    isp_render,
    lr_schedule,
    nraw_read,
    nraw_write,
    pack_bayer,
    parse_scale,
    pixel_shuffle,
    pixel_unshuffle,
    psnr,
    resample,
    srgb_oetf,
    ssim,
    total_loss,
    unpack_bayer,
    write_ppm,
)

__all__ = [
    "ContractError",
    "IoError",
    "downscale",
    "dwt2",
    "dwt_pyramid",
    "generate_pair",
    "grad_check_primitives",
    "idwt2",
    "isp_render",
    "lr_schedule",
    "nraw_read",
    "nraw_write",
    "pack_bayer",
    "parse_scale",
    "pixel_shuffle",
    "pixel_unshuffle",
    "psnr",
    "resample",
    "srgb_oetf",
    "ssim",
    "total_loss",
    "unpack_bayer",
    "write_ppm",
]
