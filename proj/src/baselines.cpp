#include "pon/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <numeric>
#include <stdexcept>

namespace pon {

// --- Gaussian naive Bayes -------------------------------------------------------

GnbModel fit_gnb(const Dataset& train) {
  if (train.windows.empty()) throw std::invalid_argument("empty training set");
  const int F = static_cast<int>(train.windows.front().values.size());
  GnbModel m;
  m.num_features = F;
  m.mean.assign(static_cast<std::size_t>(kNumClasses) * F, 0.0);
  m.var.assign(static_cast<std::size_t>(kNumClasses) * F, 0.0);

  std::array<int, kNumClasses> counts{};
  for (const auto& w : train.windows) {
    if (!w.label) throw std::invalid_argument("unlabeled window in fit_gnb");
    if (static_cast<int>(w.values.size()) != F)
      throw std::invalid_argument("inconsistent window length in fit_gnb");
    const int c = static_cast<int>(*w.label);
    ++counts[static_cast<std::size_t>(c)];
    double* mu = m.mean.data() + static_cast<std::size_t>(c) * F;
    for (int j = 0; j < F; ++j) mu[j] += w.values[static_cast<std::size_t>(j)];
  }
  for (int c = 0; c < kNumClasses; ++c) {
    if (counts[static_cast<std::size_t>(c)] == 0)
      throw std::runtime_error(std::string("fit_gnb: class ") +
                               to_string(static_cast<EventClass>(c)) + " missing");
    double* mu = m.mean.data() + static_cast<std::size_t>(c) * F;
    for (int j = 0; j < F; ++j) mu[j] /= counts[static_cast<std::size_t>(c)];
    m.priors[static_cast<std::size_t>(c)] =
        static_cast<double>(counts[static_cast<std::size_t>(c)]) / train.windows.size();
  }
  for (const auto& w : train.windows) {
    const int c = static_cast<int>(*w.label);
    const double* mu = m.mean.data() + static_cast<std::size_t>(c) * F;
    double* var = m.var.data() + static_cast<std::size_t>(c) * F;
    for (int j = 0; j < F; ++j) {
      const double d = w.values[static_cast<std::size_t>(j)] - mu[j];
      var[j] += d * d;
    }
  }
  for (int c = 0; c < kNumClasses; ++c) {
    double* var = m.var.data() + static_cast<std::size_t>(c) * F;
    for (int j = 0; j < F; ++j)
      var[j] = std::max(var[j] / counts[static_cast<std::size_t>(c)], GnbModel::kVarFloor);
  }
  return m;
}

double GnbModel::log_posterior(int cls, const std::vector<double>& window) const {
  if (static_cast<int>(window.size()) != num_features)
    throw std::invalid_argument("window length does not match the model");
  const double* mu = mean.data() + static_cast<std::size_t>(cls) * num_features;
  const double* v = var.data() + static_cast<std::size_t>(cls) * num_features;
  double lp = std::log(priors[static_cast<std::size_t>(cls)]);
  constexpr double kLog2Pi = 1.8378770664093453;
  for (int j = 0; j < num_features; ++j) {
    const double d = window[static_cast<std::size_t>(j)] - mu[j];
    lp -= 0.5 * (kLog2Pi + std::log(v[j]) + d * d / v[j]);
  }
  return lp;
}

EventClass predict_gnb(const GnbModel& m, const std::vector<double>& window) {
  int arg = 0;
  double best = m.log_posterior(0, window);
  for (int c = 1; c < kNumClasses; ++c) {
    const double lp = m.log_posterior(c, window);
    if (lp > best) {
      best = lp;
      arg = c;
    }
  }
  return static_cast<EventClass>(arg);
}

EvalResult evaluate_gnb(const GnbModel& m, const Dataset& ds) {
  if (ds.windows.empty()) throw std::invalid_argument("empty dataset");
  EvalResult res;
  for (const auto& w : ds.windows) {
    const int truth = static_cast<int>(*w.label);
    const int pred = static_cast<int>(predict_gnb(m, w.values));
    ++res.counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)];
  }
  double diag = 0.0;
  for (int i = 0; i < kNumClasses; ++i) {
    int row = 0;
    for (int j = 0; j < kNumClasses; ++j)
      row += res.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (row == 0)
      throw std::runtime_error(std::string("evaluate_gnb: class ") +
                               to_string(static_cast<EventClass>(i)) + " has no samples");
    for (int j = 0; j < kNumClasses; ++j)
      res.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(res.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) / row;
    diag += res.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  }
  res.mean_class_accuracy = diag / kNumClasses;
  return res;
}

// --- dense ANN baseline ----------------------------------------------------------

namespace {

struct MlpCache : Cache {
  std::vector<double> x;
  std::vector<std::vector<double>> act;  // tanh activations per hidden layer
  std::vector<double> probs;
  std::vector<std::vector<double>> delta;
};

}  // namespace

MlpClassifier::MlpClassifier(MlpSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_len < 1 || spec_.num_classes < 2)
    throw std::invalid_argument("malformed mlp spec");
  int in = spec_.input_len;
  for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
    const int out = spec_.hidden[l];
    if (out < 1) throw std::invalid_argument("hidden size must be positive");
    const std::string prefix = "fc" + std::to_string(l) + ".";
    layout_.add(prefix + "W", out, in);
    layout_.add(prefix + "b", out, 1);
    in = out;
  }
  layout_.add("out.W", spec_.num_classes, in);
  layout_.add("out.b", spec_.num_classes, 1);
}

std::unique_ptr<Cache> MlpClassifier::make_cache() const {
  auto cache = std::make_unique<MlpCache>();
  cache->act.resize(spec_.hidden.size());
  cache->delta.resize(spec_.hidden.size());
  for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
    cache->act[l].resize(static_cast<std::size_t>(spec_.hidden[l]));
    cache->delta[l].resize(static_cast<std::size_t>(spec_.hidden[l]));
  }
  cache->probs.resize(static_cast<std::size_t>(spec_.num_classes));
  return cache;
}

void MlpClassifier::forward(const double* params, const double* x, double* probs,
                            Cache& cache0) const {
  auto& cache = static_cast<MlpCache&>(cache0);
  cache.x.assign(x, x + spec_.input_len);
  const double* in = cache.x.data();
  int in_n = spec_.input_len;
  for (std::size_t l = 0; l < spec_.hidden.size(); ++l) {
    const auto& W = layout_.tensors[2 * l];      // fc{l}.W
    const auto& b = layout_.tensors[2 * l + 1];  // fc{l}.b
    auto& out = cache.act[l];
    for (int r = 0; r < W.rows; ++r) {
      double s = params[b.offset + r];
      const double* w = params + W.offset + static_cast<std::size_t>(r) * in_n;
      for (int q = 0; q < in_n; ++q) s += w[q] * in[q];
      out[static_cast<std::size_t>(r)] = std::tanh(s);
    }
    in = out.data();
    in_n = W.rows;
  }
  const auto& Wo = layout_.find("out.W");
  const auto& bo = layout_.find("out.b");
  std::vector<double> z(static_cast<std::size_t>(spec_.num_classes));
  for (int c = 0; c < spec_.num_classes; ++c) {
    double s = params[bo.offset + c];
    const double* w = params + Wo.offset + static_cast<std::size_t>(c) * in_n;
    for (int q = 0; q < in_n; ++q) s += w[q] * in[q];
    z[static_cast<std::size_t>(c)] = s;
  }
  const auto p = softmax(z);
  std::copy(p.begin(), p.end(), cache.probs.begin());
  std::copy(p.begin(), p.end(), probs);
}

void MlpClassifier::backward(const double* params, int label, Cache& cache0,
                             double* grad) const {
  auto& cache = static_cast<MlpCache&>(cache0);
  if (cache.x.empty()) throw std::invalid_argument("backward without matching forward");
  std::fill(grad, grad + layout_.total, 0.0);
  const int C = spec_.num_classes;
  const int L = static_cast<int>(spec_.hidden.size());

  std::vector<double> dz(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c)
    dz[static_cast<std::size_t>(c)] =
        cache.probs[static_cast<std::size_t>(c)] - (c == label ? 1.0 : 0.0);

  const auto& Wo = layout_.find("out.W");
  const auto& bo = layout_.find("out.b");
  const double* top = L > 0 ? cache.act[static_cast<std::size_t>(L - 1)].data() : cache.x.data();
  const int top_n = L > 0 ? spec_.hidden[static_cast<std::size_t>(L - 1)] : spec_.input_len;
  std::vector<double> dtop(static_cast<std::size_t>(top_n), 0.0);
  for (int c = 0; c < C; ++c) {
    grad[bo.offset + c] += dz[static_cast<std::size_t>(c)];
    double* gw = grad + Wo.offset + static_cast<std::size_t>(c) * top_n;
    const double* w = params + Wo.offset + static_cast<std::size_t>(c) * top_n;
    for (int q = 0; q < top_n; ++q) {
      gw[q] += dz[static_cast<std::size_t>(c)] * top[q];
      dtop[static_cast<std::size_t>(q)] += w[q] * dz[static_cast<std::size_t>(c)];
    }
  }

  std::vector<double> dnext = std::move(dtop);
  for (int l = L - 1; l >= 0; --l) {
    const auto& W = layout_.tensors[static_cast<std::size_t>(2 * l)];
    const auto& b = layout_.tensors[static_cast<std::size_t>(2 * l + 1)];
    const double* in = l > 0 ? cache.act[static_cast<std::size_t>(l - 1)].data() : cache.x.data();
    const int in_n = l > 0 ? spec_.hidden[static_cast<std::size_t>(l - 1)] : spec_.input_len;
    std::vector<double> din(static_cast<std::size_t>(in_n), 0.0);
    for (int r = 0; r < W.rows; ++r) {
      const double a = cache.act[static_cast<std::size_t>(l)][static_cast<std::size_t>(r)];
      const double d = dnext[static_cast<std::size_t>(r)] * (1.0 - a * a);
      grad[b.offset + r] += d;
      double* gw = grad + W.offset + static_cast<std::size_t>(r) * in_n;
      const double* w = params + W.offset + static_cast<std::size_t>(r) * in_n;
      for (int q = 0; q < in_n; ++q) {
        gw[q] += d * in[q];
        din[static_cast<std::size_t>(q)] += w[q] * d;
      }
    }
    dnext = std::move(din);
  }
}

Checkpoint fit_ann(const Dataset& train_ds, const Dataset& val_ds,
                   const TrainConfig& cfg, const MlpSpec& spec) {
  MlpClassifier model(spec);
  const auto out = train(model, train_ds, val_ds, cfg);
  Checkpoint ck;
  ck.kind = "mlp";
  ck.mlp = spec;
  ck.params = out.best_params;
  ck.hyper = cfg;
  return ck;
}

std::unique_ptr<Classifier> make_classifier(const Checkpoint& ck) {
  if (ck.kind == "lstm") return std::make_unique<LstmClassifier>(ck.lstm);
  if (ck.kind == "mlp") return std::make_unique<MlpClassifier>(ck.mlp);
  throw std::runtime_error("unknown checkpoint kind: " + ck.kind);
}

// --- timing harness -----------------------------------------------------------------

double median_seconds(int repetitions, const std::function<void()>& fn) {
  if (repetitions < 3) throw std::invalid_argument("repetitions must be >= 3");
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(repetitions));
  for (int r = 0; r < repetitions; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  const std::size_t n = times.size();
  return n % 2 ? times[n / 2] : 0.5 * (times[n / 2 - 1] + times[n / 2]);
}

namespace {

Dataset head_of(const Dataset& ds, int n) {
  Dataset out;
  out.seed = ds.seed;
  out.config_snapshot = ds.config_snapshot;
  // round-robin over classes so every prefix stays stratified
  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < ds.windows.size(); ++i)
    by_class[static_cast<std::size_t>(static_cast<int>(*ds.windows[i].label))].push_back(i);
  std::size_t round = 0;
  while (static_cast<int>(out.windows.size()) < n) {
    bool any = false;
    for (int c = 0; c < kNumClasses; ++c) {
      auto& idx = by_class[static_cast<std::size_t>(c)];
      if (round < idx.size() && static_cast<int>(out.windows.size()) < n) {
        out.windows.push_back(ds.windows[idx[round]]);
        any = true;
      }
    }
    if (!any) break;
    ++round;
  }
  out.recount();
  return out;
}

}  // namespace

std::vector<BenchRow> benchmark_models(const Checkpoint& lstm_ck, const Dataset& ds,
                                       const std::vector<int>& train_sizes,
                                       int repetitions, int train_epochs) {
  std::vector<BenchRow> rows;
  auto lstm = make_classifier(lstm_ck);
  MlpSpec mlp_spec;
  mlp_spec.input_len = lstm->input_len();
  MlpClassifier mlp(mlp_spec);

  const int n = static_cast<int>(ds.windows.size());

  // inference timing on the full set, single-threaded
  rows.push_back({"lstm", "inference", n, median_seconds(repetitions, [&] {
                    evaluate(*lstm, lstm_ck.params.data(), ds, Exec::serial);
                  })});
  {
    const auto gnb = fit_gnb(ds);
    rows.push_back({"gnb", "inference", n, median_seconds(repetitions, [&] {
                      for (const auto& w : ds.windows) predict_gnb(gnb, w.values);
                    })});
    auto mlp_params = init_params(mlp, lstm_ck.hyper.seed);
    rows.push_back({"ann", "inference", n, median_seconds(repetitions, [&] {
                      evaluate(mlp, mlp_params.data(), ds, Exec::serial);
                    })});
  }

  // training time vs input size
  for (int size : train_sizes) {
    const Dataset sub = head_of(ds, size);
    const auto split = split_dataset(sub, 0.8, 0.1, 0.1, lstm_ck.hyper.seed);
    TrainConfig cfg = lstm_ck.hyper;
    cfg.max_epochs = train_epochs;
    cfg.patience = train_epochs;
    cfg.exec = Exec::serial;

    rows.push_back({"lstm", "train", size, median_seconds(repetitions, [&] {
                      train(*lstm, split.train, split.val, cfg);
                    })});
    rows.push_back({"ann", "train", size, median_seconds(repetitions, [&] {
                      train(mlp, split.train, split.val, cfg);
                    })});
    rows.push_back({"gnb", "train", size, median_seconds(repetitions, [&] {
                      fit_gnb(sub);
                    })});
  }
  return rows;
}

void save_bench_csv(const std::vector<BenchRow>& rows, const std::string& path,
                    const std::string& config_snapshot) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write benchmark file: " + path);
  if (!config_snapshot.empty()) out << "# config=" << config_snapshot << '\n';
  out << "model,phase,input_size,seconds\n";
  for (const auto& r : rows)
    out << r.model << ',' << r.phase << ',' << r.input_size << ','
        << format_double(r.seconds) << '\n';
}

}  // namespace pon
