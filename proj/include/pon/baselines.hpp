#pragma once

#include <array>
#include <functional>
#include <string>
#include <vector>

#include "pon/dataset.hpp"
#include "pon/nn.hpp"

namespace pon {

// Gaussian naive Bayes over the 60 window amplitudes, log-space throughout.
struct GnbModel {
  int num_features = kWindowLen;
  std::array<double, kNumClasses> priors{};
  std::vector<double> mean;  // class-major, kNumClasses * num_features
  std::vector<double> var;   // floored at kVarFloor

  static constexpr double kVarFloor = 1e-9;
  double log_posterior(int cls, const std::vector<double>& window) const;
};

GnbModel fit_gnb(const Dataset& train);
EventClass predict_gnb(const GnbModel& m, const std::vector<double>& window);
EvalResult evaluate_gnb(const GnbModel& m, const Dataset& ds);

// Feed-forward baseline: flattened window -> dense(32, tanh) ->
// dense(16, tanh) -> dense(num_classes) -> softmax. Trains with the same
// Adam loop as the sequence model.
class MlpClassifier : public Classifier {
 public:
  explicit MlpClassifier(MlpSpec spec);

  const ParamLayout& layout() const override { return layout_; }
  int input_len() const override { return spec_.input_len; }
  int num_classes() const override { return spec_.num_classes; }
  std::unique_ptr<Cache> make_cache() const override;
  void forward(const double* params, const double* x, double* probs,
               Cache& cache) const override;
  void backward(const double* params, int label, Cache& cache,
                double* grad) const override;

  const MlpSpec& spec() const { return spec_; }

 private:
  MlpSpec spec_;
  ParamLayout layout_;
};

Checkpoint fit_ann(const Dataset& train_ds, const Dataset& val_ds,
                   const TrainConfig& cfg, const MlpSpec& spec = MlpSpec{});

// --- timing harness -----------------------------------------------------------

struct BenchRow {
  std::string model;
  std::string phase;  // "train" or "inference"
  int input_size = 0;
  double seconds = 0.0;
};

// Median wall-clock seconds over `repetitions` runs of fn().
double median_seconds(int repetitions, const std::function<void()>& fn);

// Fig-14-style comparison: inference on the full set plus training time as a
// function of input size, for the LSTM checkpoint, the dense ANN and GNB.
// Runs single-threaded so timings are stable.
std::vector<BenchRow> benchmark_models(const Checkpoint& lstm_ck, const Dataset& ds,
                                       const std::vector<int>& train_sizes,
                                       int repetitions, int train_epochs = 1);

void save_bench_csv(const std::vector<BenchRow>& rows, const std::string& path,
                    const std::string& config_snapshot);

}  // namespace pon
