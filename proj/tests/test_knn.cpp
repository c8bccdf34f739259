#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <vector>

#include "fpnet/knn.hpp"
#include "fpnet/rng.hpp"

using namespace fpnet;
using namespace fpnet::baseline;

namespace {

/// 2-feature dataset builder; n_sc/n_tx/n_streams are shaped so that
/// sample_len() == 2 (1 subcarrier, 1x1, complex entries -> 2 reals).
model::BfmDataset points(const std::vector<std::pair<double, double>>& xy,
                         const std::vector<int>& labels) {
  model::BfmDataset ds;
  ds.n_sc = 1;
  ds.n_tx = 1;
  ds.n_streams = 1;
  for (const auto& [x, y] : xy) {
    ds.x.push_back(x);
    ds.x.push_back(y);
  }
  ds.labels = labels;
  return ds;
}

}  // namespace

TEST_CASE("k=1 on the training set itself is perfect") {
  const model::BfmDataset train = points(
      {{0, 0}, {1, 0}, {0, 1}, {5, 5}, {6, 5}}, {0, 1, 2, 3, 4});
  CHECK(knn_accuracy(train, train, 1) == doctest::Approx(1.0));
}

TEST_CASE("votes are weighted by inverse distance, not by count") {
  // One close class-0 neighbor against two farther class-1 neighbors: a
  // majority vote would say 1, the weighted vote says 0.
  const model::BfmDataset train =
      points({{0.1, 0.0}, {1.0, 0.0}, {0.0, 1.0}}, {0, 1, 1});
  const double query[2] = {0.0, 0.0};
  CHECK(knn_predict(train, query, 3) == 0);

  // With the close neighbor removed the class-1 pair wins.
  const model::BfmDataset far = points({{1.0, 0.0}, {0.0, 1.0}}, {1, 1});
  CHECK(knn_predict(far, query, 2) == 1);
}

TEST_CASE("exact vote ties resolve to the lower class id") {
  const model::BfmDataset train =
      points({{1.0, 0.0}, {-1.0, 0.0}}, {3, 1});
  const double query[2] = {0.0, 0.0};
  CHECK(knn_predict(train, query, 2) == 1);
}

TEST_CASE("a coincident training point dominates the vote") {
  const model::BfmDataset train =
      points({{0.5, 0.5}, {0.6, 0.5}, {0.5, 0.6}}, {2, 0, 0});
  const double query[2] = {0.5, 0.5};
  CHECK(knn_predict(train, query, 3) == 2);
}

TEST_CASE("k outside the valid range throws") {
  const model::BfmDataset train = points({{0, 0}, {1, 1}}, {0, 1});
  const double query[2] = {0.2, 0.2};
  CHECK_THROWS_AS(knn_predict(train, query, 3), Error);
  CHECK_THROWS_AS(knn_predict(train, query, 0), Error);
  CHECK_NOTHROW(knn_predict(train, query, 2));
}

TEST_CASE("unlabeled training samples are rejected") {
  const model::BfmDataset train = points({{0, 0}, {1, 1}}, {0, -1});
  const double query[2] = {0.9, 0.9};
  CHECK_THROWS_AS(knn_predict(train, query, 2), Error);
}

TEST_CASE("batch prediction matches single prediction row by row") {
  Rng rng(2024);
  std::vector<std::pair<double, double>> tr_xy, te_xy;
  std::vector<int> tr_lab, te_lab;
  for (int i = 0; i < 60; ++i) {
    const int c = (int)rng.uniform_int(4);
    tr_xy.push_back({c + rng.uniform(-0.3, 0.3), c + rng.uniform(-0.3, 0.3)});
    tr_lab.push_back(c);
  }
  for (int i = 0; i < 25; ++i) {
    const int c = (int)rng.uniform_int(4);
    te_xy.push_back({c + rng.uniform(-0.3, 0.3), c + rng.uniform(-0.3, 0.3)});
    te_lab.push_back(c);
  }
  const model::BfmDataset train = points(tr_xy, tr_lab);
  const model::BfmDataset test = points(te_xy, te_lab);

  const std::vector<int> all = knn_predict_all(train, test, 5);
  REQUIRE(all.size() == test.size());
  for (size_t i = 0; i < test.size(); ++i)
    CHECK(all[i] == knn_predict(train, test.x.data() + 2 * i, 5));

  // Well-separated clusters classify almost perfectly.
  CHECK(knn_accuracy(train, test, 5) >= 0.9);

  model::BfmDataset wrong = test;
  wrong.n_tx = 2;
  CHECK_THROWS_AS(knn_predict_all(train, wrong, 5), Error);
}
