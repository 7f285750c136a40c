"""Python bindings for the hsplat renderer."""

from ._hsplat import (
    Camera,
    HsplatError,
    Renderer,
    Scene,
    benchmark,
    count_inversions,
    encode_depth_key,
    inspect_ply,
    local_sort,
    psnr,
    radix_sort,
    render,
    ssim,
    to_rgba8,
    write_png,
)

__all__ = [
    "Camera",
    "HsplatError",
    "Renderer",
    "Scene",
    "benchmark",
    "count_inversions",
    "encode_depth_key",
    "inspect_ply",
    "local_sort",
    "psnr",
    "radix_sort",
    "render",
    "ssim",
    "to_rgba8",
    "write_png",
]
