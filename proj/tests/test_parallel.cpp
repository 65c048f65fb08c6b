#include <doctest.h>

#include "pon/baselines.hpp"
#include "pon/nn.hpp"

// The OpenMP kernels must be bitwise-equal to the serial reference: per-item
// work is independent and the reductions run in fixed item order.

using namespace pon;

namespace {

Dataset small_dataset(std::uint64_t seed) {
  GenConfig gen;
  gen.per_class = 12;
  gen.seed = seed;
  return generate_dataset(gen, {}, Exec::serial);
}

}  // namespace

TEST_CASE("dataset generation: serial and parallel agree bitwise") {
  GenConfig gen;
  gen.per_class = 20;
  gen.seed = 404;
  const auto serial = generate_dataset(gen, {}, Exec::serial);
  const auto parallel = generate_dataset(gen, {}, Exec::parallel);
  REQUIRE(serial.windows.size() == parallel.windows.size());
  for (std::size_t i = 0; i < serial.windows.size(); ++i) {
    CHECK(serial.windows[i].values == parallel.windows[i].values);
    CHECK(*serial.windows[i].label == *parallel.windows[i].label);
  }
}

TEST_CASE("batch gradients: serial and parallel agree bitwise") {
  const auto ds = small_dataset(7);
  ModelSpec spec;
  spec.lstm_hidden = {12};
  spec.dense_units = 8;
  LstmClassifier model(spec);
  const auto params = init_params(model, 3);

  std::vector<int> idx;
  for (int i = 0; i < static_cast<int>(ds.windows.size()); ++i) idx.push_back(i);

  BatchScratch s1, s2;
  std::vector<double> g1, g2;
  const double l1 = batch_loss_grad(model, params.data(), ds, idx, g1, Exec::serial, s1);
  const double l2 = batch_loss_grad(model, params.data(), ds, idx, g2, Exec::parallel, s2);
  CHECK(l1 == l2);
  CHECK(g1 == g2);
}

TEST_CASE("training: serial and parallel agree bitwise") {
  const auto ds = small_dataset(8);
  ModelSpec spec;
  spec.lstm_hidden = {8};
  spec.dense_units = 4;
  LstmClassifier model(spec);

  TrainConfig cfg;
  cfg.seed = 5;
  cfg.batch_size = 16;
  cfg.max_epochs = 3;

  cfg.exec = Exec::serial;
  const auto a = train(model, ds, ds, cfg);
  cfg.exec = Exec::parallel;
  const auto b = train(model, ds, ds, cfg);
  CHECK(a.best_params == b.best_params);
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
    CHECK(a.history[e].val_accuracy == b.history[e].val_accuracy);
  }
}

TEST_CASE("evaluation: serial and parallel agree exactly") {
  const auto ds = small_dataset(9);
  ModelSpec spec;
  spec.lstm_hidden = {8};
  LstmClassifier model(spec);
  const auto params = init_params(model, 50);

  const auto a = evaluate(model, params.data(), ds, Exec::serial);
  const auto b = evaluate(model, params.data(), ds, Exec::parallel);
  CHECK(a.counts == b.counts);
  CHECK(a.mean_loss == b.mean_loss);
  CHECK(a.mean_class_accuracy == b.mean_class_accuracy);
}
