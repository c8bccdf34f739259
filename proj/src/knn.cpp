#include "fpnet/knn.hpp"

#include <algorithm>
#include <cmath>

#include "fpnet/metrics.hpp"

namespace fpnet::baseline {

int knn_predict(const model::BfmDataset& train, const double* query, int k) {
  if (k < 1) throw Error("knn_predict: k must be >= 1");
  if ((size_t)k > train.size())
    throw Error("knn_predict: k = " + std::to_string(k) + " exceeds " +
                std::to_string(train.size()) + " training samples");
  const size_t len = train.sample_len();

  // Max-heap of the current k best (distance, index) pairs; index breaks
  // exact distance ties deterministically.
  using Cand = std::pair<double, size_t>;
  std::vector<Cand> heap;
  heap.reserve((size_t)k);
  for (size_t i = 0; i < train.size(); ++i) {
    const double* row = train.x.data() + i * len;
    double d2 = 0;
    for (size_t j = 0; j < len; ++j) {
      const double d = row[j] - query[j];
      d2 += d * d;
    }
    const Cand c{d2, i};
    if (heap.size() < (size_t)k) {
      heap.push_back(c);
      std::push_heap(heap.begin(), heap.end());
    } else if (c < heap.front()) {
      std::pop_heap(heap.begin(), heap.end());
      heap.back() = c;
      std::push_heap(heap.begin(), heap.end());
    }
  }

  int max_label = 0;
  for (const auto& [d2, i] : heap) max_label = std::max(max_label, train.labels[i]);
  std::vector<double> votes((size_t)max_label + 1, 0.0);
  for (const auto& [d2, i] : heap) {
    const int label = train.labels[i];
    if (label < 0) throw Error("knn_predict: unlabeled training sample");
    votes[(size_t)label] += 1.0 / (std::sqrt(d2) + 1e-12);
  }
  int best = 0;
  for (size_t cls = 1; cls < votes.size(); ++cls)
    if (votes[cls] > votes[(size_t)best]) best = (int)cls;
  return best;
}

std::vector<int> knn_predict_all(const model::BfmDataset& train,
                                 const model::BfmDataset& test, int k) {
  if (train.sample_len() != test.sample_len())
    throw Error("knn_predict_all: feature length mismatch");
  std::vector<int> preds(test.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < (long)test.size(); ++i) {
    preds[(size_t)i] =
        knn_predict(train, test.x.data() + (size_t)i * test.sample_len(), k);
  }
  return preds;
}

double knn_accuracy(const model::BfmDataset& train,
                    const model::BfmDataset& test, int k) {
  return metrics::classification_accuracy(knn_predict_all(train, test, k),
                                          test.labels);
}

}  // namespace fpnet::baseline
