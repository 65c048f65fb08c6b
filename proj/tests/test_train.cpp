#include <doctest.h>

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "pon/nn.hpp"

using namespace pon;

namespace {

// Small balanced dataset the model can overfit.
Dataset toy_dataset(int per_class, std::uint64_t seed) {
  GenConfig gen;
  gen.per_class = per_class;
  gen.psnr_min_db = 20.0;  // mild noise keeps the toy set separable
  gen.psnr_max_db = 30.0;
  gen.ratio_min = 0.05;
  gen.ratio_max = 0.3;
  gen.seed = seed;
  return generate_dataset(gen, {}, Exec::parallel);
}

}  // namespace

TEST_CASE("train overfits a small balanced toy set") {
  const auto ds = toy_dataset(15, 42);  // 105 windows
  ModelSpec spec;
  spec.lstm_hidden = {16};
  spec.dense_units = 8;
  LstmClassifier model(spec);

  TrainConfig cfg;
  cfg.seed = 7;
  cfg.batch_size = 16;
  cfg.max_epochs = 200;
  cfg.patience = 200;  // no early stop; we want the training fit

  const auto out = train(model, ds, ds, cfg);
  const auto eval = evaluate(model, out.best_params.data(), ds);
  CHECK(eval.mean_class_accuracy == doctest::Approx(1.0));
  CHECK(out.history.size() <= 200);

  SUBCASE("loss decreases over the first epochs") {
    int drops = 0;
    for (int e = 1; e <= 5 && e < static_cast<int>(out.history.size()); ++e)
      drops += out.history[e].train_loss <= out.history[e - 1].train_loss;
    CHECK(drops >= 4);
  }
}

TEST_CASE("train is bitwise deterministic given the seed") {
  const auto ds = toy_dataset(6, 11);
  ModelSpec spec;
  spec.lstm_hidden = {8};
  spec.dense_units = 4;
  LstmClassifier model(spec);

  TrainConfig cfg;
  cfg.seed = 3;
  cfg.batch_size = 8;
  cfg.max_epochs = 4;

  const auto a = train(model, ds, ds, cfg);
  const auto b = train(model, ds, ds, cfg);
  CHECK(a.best_params == b.best_params);  // bitwise
  REQUIRE(a.history.size() == b.history.size());
  for (std::size_t e = 0; e < a.history.size(); ++e) {
    CHECK(a.history[e].train_loss == b.history[e].train_loss);
    CHECK(a.history[e].val_loss == b.history[e].val_loss);
  }
}

TEST_CASE("train rejects empty and unlabeled input") {
  ModelSpec spec;
  spec.lstm_hidden = {4};
  LstmClassifier model(spec);
  TrainConfig cfg;
  Dataset empty;
  CHECK_THROWS_AS(train(model, empty, empty, cfg), std::invalid_argument);
}

TEST_CASE("evaluate: perfect predictor yields the identity confusion matrix") {
  // One window per class, each window labeled; a predictor stub is simulated
  // by evaluating a model against a dataset whose labels equal the model's
  // own predictions.
  const auto ds = toy_dataset(3, 99);
  ModelSpec spec;
  spec.lstm_hidden = {6};
  spec.dense_units = 4;
  LstmClassifier model(spec);
  auto params = init_params(model, 5);

  Dataset echo = ds;
  for (auto& w : echo.windows) w.label = predict(model, params.data(), w.values).first;
  bool all_present = true;
  for (int c = 0; c < kNumClasses; ++c) {
    int n = 0;
    for (const auto& w : echo.windows) n += static_cast<int>(*w.label) == c;
    all_present = all_present && n > 0;
  }
  if (all_present) {
    const auto eval = evaluate(model, params.data(), echo);
    CHECK(eval.mean_class_accuracy == doctest::Approx(1.0));
    for (int i = 0; i < kNumClasses; ++i)
      for (int j = 0; j < kNumClasses; ++j)
        CHECK(eval.confusion[i][j] == (i == j ? 1.0 : 0.0));
  }

  SUBCASE("a dataset with an empty class is rejected") {
    Dataset missing = ds;
    std::erase_if(missing.windows,
                  [](const Window& w) { return *w.label == EventClass::C3; });
    missing.recount();
    CHECK_THROWS(evaluate(model, params.data(), missing));
  }
}

TEST_CASE("training history is written as CSV") {
  std::vector<EpochStats> hist{{1, 0.9, 0.8, 0.3}, {2, 0.5, 0.45, 0.6}};
  const std::string path = "history_test.csv";
  save_history_csv(hist, path, "{\"note\":\"test\"}");

  std::ifstream in(path);
  std::string line;
  std::getline(in, line);
  CHECK(line.rfind("# config=", 0) == 0);
  std::getline(in, line);
  CHECK(line == "epoch,train_loss,val_loss,val_acc");
  std::getline(in, line);
  CHECK(line.rfind("1,", 0) == 0);
  std::remove(path.c_str());
}
