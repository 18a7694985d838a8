#pragma once

#include "mri/autodiff.hpp"

namespace mri {

/// Differentiable counterparts of the evaluation metrics, built from graph
/// primitives so the training loss can be backpropagated. `pred` and
/// `target` are 1x1xHxW magnitude tensors.

/// Mean charbonnier-smoothed absolute difference (smooth L1).
NodeId l1_loss_graph(Tape& t, NodeId pred, NodeId target, double eps = 1e-6);

/// Valid-window Gaussian SSIM, identical constants to the metric side.
NodeId ssim_graph(Tape& t, NodeId pred, NodeId target, double data_range);

/// Multi-scale SSIM with the standard 5-scale exponents; scale count shrinks
/// with the image exactly like the metric (weights renormalized).
NodeId msssim_graph(Tape& t, NodeId pred, NodeId target, double data_range, int scales = 5);

/// alpha * smooth-L1 + beta * (1 - MS-SSIM). Inputs are expected to be
/// normalized to [0, data_range].
NodeId compound_loss_graph(Tape& t, NodeId pred, NodeId target, double alpha = 0.5,
                           double beta = 0.5, double data_range = 1.0, int scales = 5);

} // namespace mri
