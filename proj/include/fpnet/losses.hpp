#ifndef FPNET_LOSSES_HPP
#define FPNET_LOSSES_HPP

#include <vector>

#include "fpnet/tensor.hpp"

namespace fpnet::nn {

/// Cross entropy over softmaxed logits [B, C] against integer labels.
/// Returns the batch-mean loss. If dlogits is non-null it receives
/// (softmax - onehot) / B. If probs_out is non-null it receives the
/// row-wise softmax. Throws on non-finite logits or out-of-range labels.
double softmax_xent_loss(const Tensor& logits, const std::vector<int>& labels,
                         Tensor* dlogits = nullptr,
                         Tensor* probs_out = nullptr);

/// Softmax of a single logit row (utility for inference paths).
std::vector<double> softmax(const std::vector<double>& logits);

/// Mean squared error over all entries: mean((pred - target)^2).
/// If dpred is non-null it receives 2 * (pred - target) / numel.
double mse_loss(const Tensor& pred, const Tensor& target,
                Tensor* dpred = nullptr);

}  // namespace fpnet::nn

#endif  // FPNET_LOSSES_HPP
