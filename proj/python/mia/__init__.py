"""Multidimensional interactive attention: tensors, training and audits.

Arrays cross the boundary as float64 NumPy arrays in NCHW order.
"""

from ._mia import (
    MiaBlock,
    MiaError,
    Model,
    accuracy,
    apply_attention,
    bottleneck_width,
    build_model,
    channel_descriptor,
    channel_weights,
    confusion_counts,
    cosine_lr,
    cross_entropy_loss,
    dice_coefficient,
    dice_loss,
    encode_pgm,
    evaluate,
    forward,
    fuse_attention,
    gradcheck,
    load_flows_csv,
    param_count,
    precision_recall_f1,
    read_checkpoint,
    run_cli,
    spatial_descriptor,
    spatial_weights,
    synth_blobs,
    synth_masks,
    train,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
