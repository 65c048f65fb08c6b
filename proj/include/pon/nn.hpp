#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "pon/common.hpp"
#include "pon/dataset.hpp"

namespace pon {

struct ModelSpec {
  int input_size = 1;
  int seq_len = kWindowLen;
  std::vector<int> lstm_hidden = {32};  // one entry per stacked layer
  int dense_units = 16;
  int num_classes = kNumClasses;
};

struct MlpSpec {
  int input_len = kWindowLen;
  std::vector<int> hidden = {32, 16};
  int num_classes = kNumClasses;
};

struct TensorInfo {
  std::string name;
  int rows = 0, cols = 0, offset = 0;
  int size() const { return rows * cols; }
};

struct ParamLayout {
  std::vector<TensorInfo> tensors;
  int total = 0;

  int add(const std::string& name, int rows, int cols);
  const TensorInfo& find(const std::string& name) const;
};

// Opaque per-sample forward state kept for backpropagation.
struct Cache {
  virtual ~Cache() = default;
};

// A fixed-architecture differentiable classifier over a flat parameter
// vector. Parameters are owned by the caller; forward/backward are pure with
// respect to them, so batches can run in parallel over samples.
class Classifier {
 public:
  virtual ~Classifier() = default;
  virtual const ParamLayout& layout() const = 0;
  virtual int input_len() const = 0;
  virtual int num_classes() const = 0;
  virtual std::unique_ptr<Cache> make_cache() const = 0;
  virtual void forward(const double* params, const double* x, double* probs,
                       Cache& cache) const = 0;
  // Gradient of -log(probs[label]) w.r.t. every parameter; overwrites grad.
  virtual void backward(const double* params, int label, Cache& cache,
                        double* grad) const = 0;
};

// --- LSTM primitives ---------------------------------------------------------

// Gate order used throughout: forget, input, candidate, output.
enum LstmGate { kForget = 0, kInput = 1, kCandidate = 2, kOutput = 3 };

// Non-owning view of one LSTM layer's parameters.
struct LstmLayerParams {
  int input_size = 0;
  int hidden_size = 0;
  const double* W_x[4] = {};  // hidden x input, row-major
  const double* W_h[4] = {};  // hidden x hidden, row-major
  const double* b[4] = {};
};

// One cell update. Writes the gate activations and the new cell/hidden state;
// all output arrays are hidden_size long.
void lstm_cell_forward(const LstmLayerParams& p, const double* x,
                       const double* h_prev, const double* c_prev,
                       double* gate_f, double* gate_i, double* gate_c,
                       double* gate_o, double* c_out, double* h_out);

// Full trajectory of one layer over a sequence, starting from zero state.
struct LstmTrajectory {
  int seq_len = 0, hidden = 0;
  std::vector<double> f, i, g, o, c, h, tanh_c;  // each seq_len * hidden
  const double* h_at(int t) const { return h.data() + static_cast<std::size_t>(t) * hidden; }
  const double* h_last() const { return h_at(seq_len - 1); }
};

LstmTrajectory lstm_sequence_forward(const LstmLayerParams& p, const double* x_seq,
                                     int seq_len);

std::vector<double> softmax(const std::vector<double>& z);
double cross_entropy(const double* probs, int n, int label);
inline double cross_entropy(const std::vector<double>& probs, int label) {
  return cross_entropy(probs.data(), static_cast<int>(probs.size()), label);
}

// --- the sequence classifier ---------------------------------------------------

class LstmClassifier : public Classifier {
 public:
  explicit LstmClassifier(ModelSpec spec);

  const ParamLayout& layout() const override { return layout_; }
  int input_len() const override { return spec_.seq_len * spec_.input_size; }
  int num_classes() const override { return spec_.num_classes; }
  std::unique_ptr<Cache> make_cache() const override;
  void forward(const double* params, const double* x, double* probs,
               Cache& cache) const override;
  void backward(const double* params, int label, Cache& cache,
                double* grad) const override;

  const ModelSpec& spec() const { return spec_; }
  LstmLayerParams layer_view(const double* params, int layer) const;

 private:
  ModelSpec spec_;
  ParamLayout layout_;
};

// --- training ------------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int batch_size = 64;
  int max_epochs = 30;
  int patience = 10;  // early stop on validation loss
  std::uint64_t seed = 0;
  Exec exec = Exec::parallel;

  void validate() const;
};

struct AdamState {
  std::vector<double> m, v;
  long long t = 0;
  void init(int n);
};

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg);

// Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases.
std::vector<double> init_params(const Classifier& model, std::uint64_t seed);

// Reusable buffers for the batch kernels; sized lazily.
struct BatchScratch {
  std::vector<std::vector<double>> slot_grad;
  std::vector<double> slot_loss;
  std::vector<std::unique_ptr<Cache>> caches;  // one per thread
};

// Mean loss and mean gradient over the given samples. Per-sample work may run
// in parallel; the reduction is always in sample order, so serial and
// parallel execution produce bitwise-identical results.
double batch_loss_grad(const Classifier& model, const double* params,
                       const Dataset& ds, const std::vector<int>& indices,
                       std::vector<double>& grad, Exec exec, BatchScratch& scratch);

double mean_loss(const Classifier& model, const double* params, const Dataset& ds,
                 Exec exec);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct TrainOutput {
  std::vector<double> best_params;
  std::vector<EpochStats> history;
  int best_epoch = 0;
};

TrainOutput train(const Classifier& model, const Dataset& train_ds,
                  const Dataset& val_ds, const TrainConfig& cfg);

struct EvalResult {
  std::array<std::array<int, kNumClasses>, kNumClasses> counts{};      // [true][pred]
  std::array<std::array<double, kNumClasses>, kNumClasses> confusion{};  // row-normalized
  double mean_class_accuracy = 0.0;
  double mean_loss = 0.0;
};

EvalResult evaluate(const Classifier& model, const double* params, const Dataset& ds,
                    Exec exec = Exec::parallel);

std::pair<EventClass, std::array<double, kNumClasses>> predict(
    const Classifier& model, const double* params, const std::vector<double>& window);

// Max relative error between analytic gradients and central differences.
double gradient_check(const Classifier& model, const std::vector<double>& params,
                      const std::vector<double>& x, int label, double eps = 1e-5);

// --- checkpointing ----------------------------------------------------------------

struct Checkpoint {
  int format_version = 1;
  std::string kind = "lstm";  // "lstm" or "mlp"
  ModelSpec lstm;
  MlpSpec mlp;
  std::vector<double> params;
  TrainConfig hyper;
};

std::string checkpoint_to_json(const Checkpoint& ck);
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ck, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);
std::unique_ptr<Classifier> make_classifier(const Checkpoint& ck);

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path,
                      const std::string& config_snapshot);

}  // namespace pon
