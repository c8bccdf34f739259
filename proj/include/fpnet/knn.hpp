#ifndef FPNET_KNN_HPP
#define FPNET_KNN_HPP

#include <vector>

#include "fpnet/fpnet_model.hpp"

namespace fpnet::baseline {

/// Distance-weighted k-nearest-neighbor vote (weight 1/(d + 1e-12)) in the
/// Euclidean metric over vectorized BFMs. Ties in the vote go to the lower
/// class id. Throws if k exceeds the training-set size.
int knn_predict(const model::BfmDataset& train, const double* query, int k);

/// Predictions for every test row (parallel over queries).
std::vector<int> knn_predict_all(const model::BfmDataset& train,
                                 const model::BfmDataset& test, int k);

double knn_accuracy(const model::BfmDataset& train,
                    const model::BfmDataset& test, int k);

}  // namespace fpnet::baseline

#endif  // FPNET_KNN_HPP
