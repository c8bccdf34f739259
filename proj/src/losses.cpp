#include "fpnet/losses.hpp"

#include <algorithm>
#include <cmath>

namespace fpnet::nn {

double softmax_xent_loss(const Tensor& logits, const std::vector<int>& labels,
                         Tensor* dlogits, Tensor* probs_out) {
  if (logits.shape.size() != 2)
    throw Error("softmax_xent_loss: logits must be [B,C], got " +
                logits.shape_str());
  const int B = logits.shape[0];
  const int C = logits.shape[1];
  if (static_cast<int>(labels.size()) != B)
    throw Error("softmax_xent_loss: label count mismatch");
  if (B == 0) throw Error("softmax_xent_loss: empty batch");

  if (dlogits) *dlogits = Tensor(logits.shape);
  if (probs_out) *probs_out = Tensor(logits.shape);

  double loss = 0.0;
  for (int b = 0; b < B; ++b) {
    const double* row = logits.data.data() + (size_t)b * C;
    double mx = row[0];
    for (int c = 0; c < C; ++c) {
      if (!std::isfinite(row[c]))
        throw Error("softmax_xent_loss: non-finite logit at row " +
                    std::to_string(b));
      mx = std::max(mx, row[c]);
    }
    double z = 0.0;
    for (int c = 0; c < C; ++c) z += std::exp(row[c] - mx);
    const int lab = labels[(size_t)b];
    if (lab < 0 || lab >= C)
      throw Error("softmax_xent_loss: label " + std::to_string(lab) +
                  " out of range [0," + std::to_string(C) + ")");
    loss += -(row[lab] - mx - std::log(z));
    for (int c = 0; c < C; ++c) {
      const double p = std::exp(row[c] - mx) / z;
      if (probs_out) probs_out->data[(size_t)b * C + c] = p;
      if (dlogits)
        dlogits->data[(size_t)b * C + c] =
            (p - (c == lab ? 1.0 : 0.0)) / B;
    }
  }
  return loss / B;
}

std::vector<double> softmax(const std::vector<double>& logits) {
  if (logits.empty()) throw Error("softmax: empty input");
  double mx = logits[0];
  for (double v : logits) {
    if (!std::isfinite(v)) throw Error("softmax: non-finite logit");
    mx = std::max(mx, v);
  }
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  std::vector<double> p(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) p[i] = std::exp(logits[i] - mx) / z;
  return p;
}

double mse_loss(const Tensor& pred, const Tensor& target, Tensor* dpred) {
  if (!pred.same_shape(target))
    throw Error("mse_loss: shape mismatch " + pred.shape_str() + " vs " +
                target.shape_str());
  const size_t n = pred.data.size();
  if (n == 0) throw Error("mse_loss: empty tensors");
  if (dpred) *dpred = Tensor(pred.shape);
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double d = pred.data[i] - target.data[i];
    acc += d * d;
    if (dpred) dpred->data[i] = 2.0 * d / static_cast<double>(n);
  }
  return acc / static_cast<double>(n);
}

}  // namespace fpnet::nn
