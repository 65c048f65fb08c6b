#include "pon/nn.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pon {

namespace {

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kProbFloor = 1e-12;

template <class F>
void for_each_item(int n, Exec exec, F&& fn) {
#ifdef _OPENMP
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) fn(i, omp_get_thread_num());
    return;
  }
#endif
  (void)exec;
  for (int i = 0; i < n; ++i) fn(i, 0);
}

}  // namespace

int ParamLayout::add(const std::string& name, int rows, int cols) {
  TensorInfo t{name, rows, cols, total};
  total += rows * cols;
  tensors.push_back(std::move(t));
  return tensors.back().offset;
}

const TensorInfo& ParamLayout::find(const std::string& name) const {
  for (const auto& t : tensors)
    if (t.name == name) return t;
  throw std::invalid_argument("unknown tensor: " + name);
}

// --- primitives ---------------------------------------------------------------

std::vector<double> softmax(const std::vector<double>& z) {
  std::vector<double> p(z.size());
  double zmax = -std::numeric_limits<double>::infinity();
  for (double v : z) zmax = std::max(zmax, v);
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    p[i] = std::exp(z[i] - zmax);
    sum += p[i];
  }
  for (auto& v : p) v /= sum;
  return p;
}

double cross_entropy(const double* probs, int n, int label) {
  if (label < 0 || label >= n) throw std::invalid_argument("label out of range");
  return -std::log(std::max(probs[label], kProbFloor));
}

namespace {

// Shared cell update; h_prev / c_prev may be null (zero state). Also emits
// tanh(c) which the backward pass reuses.
void lstm_step(const LstmLayerParams& p, const double* x, const double* h_prev,
               const double* c_prev, double* f, double* i, double* g, double* o,
               double* c, double* h, double* tanh_c) {
  const int H = p.hidden_size;
  const int I = p.input_size;
  double* acts[4] = {f, i, g, o};
  for (int k = 0; k < 4; ++k) {
    const double* Wx = p.W_x[k];
    const double* Wh = p.W_h[k];
    const double* b = p.b[k];
    double* a = acts[k];
    for (int r = 0; r < H; ++r) {
      double s = b[r];
      const double* wx = Wx + static_cast<std::size_t>(r) * I;
      for (int q = 0; q < I; ++q) s += wx[q] * x[q];
      if (h_prev) {
        const double* wh = Wh + static_cast<std::size_t>(r) * H;
        for (int q = 0; q < H; ++q) s += wh[q] * h_prev[q];
      }
      a[r] = s;
    }
  }
  for (int r = 0; r < H; ++r) {
    f[r] = sigmoid(f[r]);
    i[r] = sigmoid(i[r]);
    g[r] = std::tanh(g[r]);
    o[r] = sigmoid(o[r]);
    const double cp = c_prev ? c_prev[r] : 0.0;
    c[r] = f[r] * cp + i[r] * g[r];
    tanh_c[r] = std::tanh(c[r]);
    h[r] = o[r] * tanh_c[r];
  }
}

}  // namespace

void lstm_cell_forward(const LstmLayerParams& p, const double* x,
                       const double* h_prev, const double* c_prev,
                       double* gate_f, double* gate_i, double* gate_c,
                       double* gate_o, double* c_out, double* h_out) {
  std::vector<double> tanh_c(static_cast<std::size_t>(p.hidden_size));
  lstm_step(p, x, h_prev, c_prev, gate_f, gate_i, gate_c, gate_o, c_out, h_out,
            tanh_c.data());
}

LstmTrajectory lstm_sequence_forward(const LstmLayerParams& p, const double* x_seq,
                                     int seq_len) {
  if (seq_len <= 0) throw std::invalid_argument("sequence length must be positive");
  LstmTrajectory tr;
  tr.seq_len = seq_len;
  tr.hidden = p.hidden_size;
  const std::size_t n = static_cast<std::size_t>(seq_len) * p.hidden_size;
  for (auto* v : {&tr.f, &tr.i, &tr.g, &tr.o, &tr.c, &tr.h, &tr.tanh_c}) v->assign(n, 0.0);
  const int H = p.hidden_size;
  for (int t = 0; t < seq_len; ++t) {
    const std::size_t at = static_cast<std::size_t>(t) * H;
    lstm_step(p, x_seq + static_cast<std::size_t>(t) * p.input_size,
              t ? &tr.h[at - H] : nullptr, t ? &tr.c[at - H] : nullptr, &tr.f[at],
              &tr.i[at], &tr.g[at], &tr.o[at], &tr.c[at], &tr.h[at], &tr.tanh_c[at]);
  }
  return tr;
}

// --- LstmClassifier --------------------------------------------------------------

namespace {

struct LstmCache : Cache {
  std::vector<double> x;                  // copied input sequence
  std::vector<LstmTrajectory> layers;
  std::vector<double> a1;                 // dense hidden activations
  std::vector<double> probs;
  // backward scratch
  std::vector<double> da[4];
  std::vector<double> dh_rec, dc_rec, dh_t, dc_t, dz1, dz2, da1;
  std::vector<double> ext, dx;            // external dh per step / input grads
};

const char* kGateNames[4] = {"f", "i", "c", "o"};

}  // namespace

LstmClassifier::LstmClassifier(ModelSpec spec) : spec_(std::move(spec)) {
  if (spec_.lstm_hidden.empty()) throw std::invalid_argument("need at least one LSTM layer");
  if (spec_.seq_len < 1 || spec_.input_size < 1 || spec_.dense_units < 1 ||
      spec_.num_classes < 2)
    throw std::invalid_argument("malformed model spec");
  int in = spec_.input_size;
  for (std::size_t l = 0; l < spec_.lstm_hidden.size(); ++l) {
    const int H = spec_.lstm_hidden[l];
    if (H < 1) throw std::invalid_argument("hidden size must be positive");
    const std::string prefix = "l" + std::to_string(l) + ".";
    for (int k = 0; k < 4; ++k) layout_.add(prefix + "Wx." + kGateNames[k], H, in);
    for (int k = 0; k < 4; ++k) layout_.add(prefix + "Wh." + kGateNames[k], H, H);
    for (int k = 0; k < 4; ++k) layout_.add(prefix + "b." + kGateNames[k], H, 1);
    in = H;
  }
  layout_.add("dense1.W", spec_.dense_units, in);
  layout_.add("dense1.b", spec_.dense_units, 1);
  layout_.add("out.W", spec_.num_classes, spec_.dense_units);
  layout_.add("out.b", spec_.num_classes, 1);
}

LstmLayerParams LstmClassifier::layer_view(const double* params, int layer) const {
  LstmLayerParams p;
  p.input_size = layer == 0 ? spec_.input_size : spec_.lstm_hidden[layer - 1];
  p.hidden_size = spec_.lstm_hidden[layer];
  const int per_layer = 12;  // 4 Wx + 4 Wh + 4 b
  const int base = layer * per_layer;
  for (int k = 0; k < 4; ++k) {
    p.W_x[k] = params + layout_.tensors[base + k].offset;
    p.W_h[k] = params + layout_.tensors[base + 4 + k].offset;
    p.b[k] = params + layout_.tensors[base + 8 + k].offset;
  }
  return p;
}

std::unique_ptr<Cache> LstmClassifier::make_cache() const {
  auto cache = std::make_unique<LstmCache>();
  cache->layers.resize(spec_.lstm_hidden.size());
  int max_h = spec_.input_size;
  for (int h : spec_.lstm_hidden) max_h = std::max(max_h, h);
  for (int k = 0; k < 4; ++k) cache->da[k].resize(static_cast<std::size_t>(max_h));
  for (auto* v : {&cache->dh_rec, &cache->dc_rec, &cache->dh_t, &cache->dc_t})
    v->resize(static_cast<std::size_t>(max_h));
  cache->a1.resize(static_cast<std::size_t>(spec_.dense_units));
  cache->da1.resize(static_cast<std::size_t>(spec_.dense_units));
  cache->dz1.resize(static_cast<std::size_t>(spec_.dense_units));
  cache->probs.resize(static_cast<std::size_t>(spec_.num_classes));
  cache->dz2.resize(static_cast<std::size_t>(spec_.num_classes));
  cache->ext.resize(static_cast<std::size_t>(spec_.seq_len) * max_h);
  cache->dx.resize(static_cast<std::size_t>(spec_.seq_len) * max_h);
  return cache;
}

void LstmClassifier::forward(const double* params, const double* x, double* probs,
                             Cache& cache0) const {
  auto& cache = static_cast<LstmCache&>(cache0);
  const int T = spec_.seq_len;
  cache.x.assign(x, x + input_len());

  const double* seq = cache.x.data();
  for (std::size_t l = 0; l < spec_.lstm_hidden.size(); ++l) {
    const auto view = layer_view(params, static_cast<int>(l));
    cache.layers[l] = lstm_sequence_forward(view, seq, T);
    seq = cache.layers[l].h.data();
  }

  const auto& top = cache.layers.back();
  const double* h_last = top.h_last();
  const int H = top.hidden;
  const int D = spec_.dense_units;
  const int C = spec_.num_classes;
  const double* W1 = params + layout_.find("dense1.W").offset;
  const double* b1 = params + layout_.find("dense1.b").offset;
  const double* W2 = params + layout_.find("out.W").offset;
  const double* b2 = params + layout_.find("out.b").offset;

  for (int d = 0; d < D; ++d) {
    double s = b1[d];
    const double* w = W1 + static_cast<std::size_t>(d) * H;
    for (int j = 0; j < H; ++j) s += w[j] * h_last[j];
    cache.a1[static_cast<std::size_t>(d)] = std::tanh(s);
  }
  std::vector<double> z(static_cast<std::size_t>(C));
  for (int c = 0; c < C; ++c) {
    double s = b2[c];
    const double* w = W2 + static_cast<std::size_t>(c) * D;
    for (int d = 0; d < D; ++d) s += w[d] * cache.a1[static_cast<std::size_t>(d)];
    z[static_cast<std::size_t>(c)] = s;
  }
  const auto p = softmax(z);
  std::copy(p.begin(), p.end(), cache.probs.begin());
  std::copy(p.begin(), p.end(), probs);
}

void LstmClassifier::backward(const double* params, int label, Cache& cache0,
                              double* grad) const {
  auto& cache = static_cast<LstmCache&>(cache0);
  const int T = spec_.seq_len;
  const int D = spec_.dense_units;
  const int C = spec_.num_classes;
  const int n_layers = static_cast<int>(spec_.lstm_hidden.size());
  if (label < 0 || label >= C) throw std::invalid_argument("label out of range");
  if (cache.x.empty()) throw std::invalid_argument("backward without matching forward");
  std::fill(grad, grad + layout_.total, 0.0);

  const auto& top = cache.layers.back();
  const double* h_last = top.h_last();
  const int H_top = top.hidden;

  const double* W1 = params + layout_.find("dense1.W").offset;
  const double* W2 = params + layout_.find("out.W").offset;
  double* gW1 = grad + layout_.find("dense1.W").offset;
  double* gb1 = grad + layout_.find("dense1.b").offset;
  double* gW2 = grad + layout_.find("out.W").offset;
  double* gb2 = grad + layout_.find("out.b").offset;

  // softmax + cross-entropy collapses to probs - one_hot
  for (int c = 0; c < C; ++c)
    cache.dz2[static_cast<std::size_t>(c)] =
        cache.probs[static_cast<std::size_t>(c)] - (c == label ? 1.0 : 0.0);

  std::fill(cache.da1.begin(), cache.da1.end(), 0.0);
  for (int c = 0; c < C; ++c) {
    const double dz = cache.dz2[static_cast<std::size_t>(c)];
    gb2[c] += dz;
    double* gw = gW2 + static_cast<std::size_t>(c) * D;
    const double* w = W2 + static_cast<std::size_t>(c) * D;
    for (int d = 0; d < D; ++d) {
      gw[d] += dz * cache.a1[static_cast<std::size_t>(d)];
      cache.da1[static_cast<std::size_t>(d)] += w[d] * dz;
    }
  }
  // top-layer final hidden-state gradient, via the tanh dense layer
  std::fill(cache.ext.begin(), cache.ext.end(), 0.0);
  double* dh_top = cache.ext.data() + static_cast<std::size_t>(T - 1) * H_top;
  for (int d = 0; d < D; ++d) {
    const double a = cache.a1[static_cast<std::size_t>(d)];
    const double dz = cache.da1[static_cast<std::size_t>(d)] * (1.0 - a * a);
    cache.dz1[static_cast<std::size_t>(d)] = dz;
    gb1[d] += dz;
    double* gw = gW1 + static_cast<std::size_t>(d) * H_top;
    const double* w = W1 + static_cast<std::size_t>(d) * H_top;
    for (int j = 0; j < H_top; ++j) {
      gw[j] += dz * h_last[j];
      dh_top[j] += w[j] * dz;
    }
  }

  // BPTT, top layer down
  for (int l = n_layers - 1; l >= 0; --l) {
    const auto view = layer_view(params, l);
    const int H = view.hidden_size;
    const int I = view.input_size;
    const auto& tr = cache.layers[static_cast<std::size_t>(l)];
    const double* in_seq =
        l == 0 ? cache.x.data() : cache.layers[static_cast<std::size_t>(l - 1)].h.data();
    const int per_layer = 12;
    double* gWx[4];
    double* gWh[4];
    double* gb[4];
    for (int k = 0; k < 4; ++k) {
      gWx[k] = grad + layout_.tensors[static_cast<std::size_t>(l * per_layer + k)].offset;
      gWh[k] = grad + layout_.tensors[static_cast<std::size_t>(l * per_layer + 4 + k)].offset;
      gb[k] = grad + layout_.tensors[static_cast<std::size_t>(l * per_layer + 8 + k)].offset;
    }

    if (l > 0) std::fill(cache.dx.begin(), cache.dx.end(), 0.0);
    std::fill(cache.dh_rec.begin(), cache.dh_rec.end(), 0.0);
    std::fill(cache.dc_rec.begin(), cache.dc_rec.end(), 0.0);

    for (int t = T - 1; t >= 0; --t) {
      const std::size_t at = static_cast<std::size_t>(t) * H;
      const double* f = &tr.f[at];
      const double* ig = &tr.i[at];
      const double* g = &tr.g[at];
      const double* o = &tr.o[at];
      const double* tc = &tr.tanh_c[at];
      const double* c_prev = t ? &tr.c[at - H] : nullptr;
      const double* h_prev = t ? &tr.h[at - H] : nullptr;
      const double* xt = in_seq + static_cast<std::size_t>(t) * I;

      for (int j = 0; j < H; ++j) {
        const double dh = cache.dh_rec[static_cast<std::size_t>(j)] +
                          cache.ext[at + static_cast<std::size_t>(j)];
        const double dc = cache.dc_rec[static_cast<std::size_t>(j)] +
                          dh * o[j] * (1.0 - tc[j] * tc[j]);
        const double cp = c_prev ? c_prev[j] : 0.0;
        cache.da[kForget][static_cast<std::size_t>(j)] = dc * cp * f[j] * (1.0 - f[j]);
        cache.da[kInput][static_cast<std::size_t>(j)] = dc * g[j] * ig[j] * (1.0 - ig[j]);
        cache.da[kCandidate][static_cast<std::size_t>(j)] = dc * ig[j] * (1.0 - g[j] * g[j]);
        cache.da[kOutput][static_cast<std::size_t>(j)] = dh * tc[j] * o[j] * (1.0 - o[j]);
        cache.dc_rec[static_cast<std::size_t>(j)] = dc * f[j];
      }

      std::fill(cache.dh_rec.begin(), cache.dh_rec.begin() + H, 0.0);
      double* dxt = l > 0 ? cache.dx.data() + static_cast<std::size_t>(t) * I : nullptr;
      for (int k = 0; k < 4; ++k) {
        const double* da = cache.da[k].data();
        const double* Wx = view.W_x[k];
        const double* Wh = view.W_h[k];
        for (int r = 0; r < H; ++r) {
          const double dar = da[r];
          gb[k][r] += dar;
          double* gwx = gWx[k] + static_cast<std::size_t>(r) * I;
          for (int q = 0; q < I; ++q) gwx[q] += dar * xt[q];
          if (h_prev) {
            double* gwh = gWh[k] + static_cast<std::size_t>(r) * H;
            for (int q = 0; q < H; ++q) gwh[q] += dar * h_prev[q];
          }
          if (dxt) {
            const double* wx = Wx + static_cast<std::size_t>(r) * I;
            for (int q = 0; q < I; ++q) dxt[q] += wx[q] * dar;
          }
          const double* wh = Wh + static_cast<std::size_t>(r) * H;
          for (int q = 0; q < H; ++q) cache.dh_rec[static_cast<std::size_t>(q)] += wh[q] * dar;
        }
      }
    }
    if (l > 0) cache.ext.swap(cache.dx);
  }
}

// --- optimizer and training --------------------------------------------------------

void TrainConfig::validate() const {
  if (learning_rate <= 0.0) throw std::invalid_argument("learning_rate must be > 0");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0)
    throw std::invalid_argument("betas must be in [0,1)");
  if (epsilon <= 0.0) throw std::invalid_argument("epsilon must be > 0");
  if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs < 1) throw std::invalid_argument("max_epochs must be >= 1");
  if (patience < 0) throw std::invalid_argument("patience must be >= 0");
}

void AdamState::init(int n) {
  m.assign(static_cast<std::size_t>(n), 0.0);
  v.assign(static_cast<std::size_t>(n), 0.0);
  t = 0;
}

void adam_step(std::vector<double>& params, const std::vector<double>& grad,
               AdamState& state, const TrainConfig& cfg) {
  if (params.size() != grad.size() || params.size() != state.m.size())
    throw std::invalid_argument("adam_step size mismatch");
  state.t += 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad[i];
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
    const double mhat = state.m[i] / c1;
    const double vhat = state.v[i] / c2;
    params[i] -= cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.epsilon);
  }
}

std::vector<double> init_params(const Classifier& model, std::uint64_t seed) {
  const auto& layout = model.layout();
  std::vector<double> params(static_cast<std::size_t>(layout.total), 0.0);
  std::mt19937_64 rng(seed);
  for (const auto& t : layout.tensors) {
    if (t.name.find(".b") != std::string::npos) continue;  // biases stay zero
    const double limit = std::sqrt(6.0 / (t.rows + t.cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (int i = 0; i < t.size(); ++i)
      params[static_cast<std::size_t>(t.offset + i)] = dist(rng);
  }
  return params;
}

double batch_loss_grad(const Classifier& model, const double* params,
                       const Dataset& ds, const std::vector<int>& indices,
                       std::vector<double>& grad, Exec exec, BatchScratch& scratch) {
  const int n = static_cast<int>(indices.size());
  if (n == 0) throw std::invalid_argument("empty batch");
  const int total = model.layout().total;
  const int threads = std::max(1, max_threads());
  if (static_cast<int>(scratch.slot_grad.size()) < n) scratch.slot_grad.resize(n);
  scratch.slot_loss.assign(static_cast<std::size_t>(n), 0.0);
  if (static_cast<int>(scratch.caches.size()) < threads) scratch.caches.resize(threads);

  for_each_item(n, exec, [&](int k, int tid) {
    auto& cache = scratch.caches[static_cast<std::size_t>(tid)];
    if (!cache) cache = model.make_cache();
    auto& slot = scratch.slot_grad[static_cast<std::size_t>(k)];
    slot.resize(static_cast<std::size_t>(total));
    const Window& w = ds.windows[static_cast<std::size_t>(indices[static_cast<std::size_t>(k)])];
    if (static_cast<int>(w.values.size()) != model.input_len())
      throw std::invalid_argument("window length does not match the model");
    std::array<double, 64> probs{};
    model.forward(params, w.values.data(), probs.data(), *cache);
    const int label = static_cast<int>(*w.label);
    scratch.slot_loss[static_cast<std::size_t>(k)] =
        cross_entropy(probs.data(), model.num_classes(), label);
    model.backward(params, label, *cache, slot.data());
  });

  // fixed-order reduction: independent of thread count and scheduling
  grad.assign(static_cast<std::size_t>(total), 0.0);
  double loss = 0.0;
  for (int k = 0; k < n; ++k) {
    loss += scratch.slot_loss[static_cast<std::size_t>(k)];
    const auto& slot = scratch.slot_grad[static_cast<std::size_t>(k)];
    for (int j = 0; j < total; ++j) grad[static_cast<std::size_t>(j)] += slot[static_cast<std::size_t>(j)];
  }
  const double inv = 1.0 / n;
  loss *= inv;
  for (auto& g : grad) g *= inv;
  return loss;
}

double mean_loss(const Classifier& model, const double* params, const Dataset& ds,
                 Exec exec) {
  const int n = static_cast<int>(ds.windows.size());
  if (n == 0) throw std::invalid_argument("empty dataset");
  const int threads = std::max(1, max_threads());
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<std::unique_ptr<Cache>> caches(static_cast<std::size_t>(threads));
  for_each_item(n, exec, [&](int k, int tid) {
    auto& cache = caches[static_cast<std::size_t>(tid)];
    if (!cache) cache = model.make_cache();
    const Window& w = ds.windows[static_cast<std::size_t>(k)];
    std::array<double, 64> probs{};
    model.forward(params, w.values.data(), probs.data(), *cache);
    losses[static_cast<std::size_t>(k)] =
        cross_entropy(probs.data(), model.num_classes(), static_cast<int>(*w.label));
  });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum / n;
}

TrainOutput train(const Classifier& model, const Dataset& train_ds,
                  const Dataset& val_ds, const TrainConfig& cfg) {
  cfg.validate();
  if (train_ds.windows.empty() || val_ds.windows.empty())
    throw std::invalid_argument("train/validation datasets must be nonempty");
  for (const auto& w : train_ds.windows)
    if (!w.label) throw std::invalid_argument("unlabeled training window");

  auto params = init_params(model, cfg.seed);
  AdamState opt;
  opt.init(model.layout().total);
  BatchScratch scratch;
  std::vector<double> grad;

  const int n = static_cast<int>(train_ds.windows.size());
  std::vector<int> order(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
  std::mt19937_64 shuffle_rng(mix_seed(cfg.seed, 0x7261696eULL));

  TrainOutput out;
  out.best_params = params;
  double best_val = std::numeric_limits<double>::infinity();
  int stale = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    for (int start = 0; start < n; start += cfg.batch_size) {
      const int stop = std::min(n, start + cfg.batch_size);
      std::vector<int> batch(order.begin() + start, order.begin() + stop);
      const double loss =
          batch_loss_grad(model, params.data(), train_ds, batch, grad, cfg.exec, scratch);
      if (!std::isfinite(loss))
        throw std::runtime_error("training aborted: non-finite loss at epoch " +
                                 std::to_string(epoch));
      adam_step(params, grad, opt, cfg);
      loss_sum += loss * (stop - start);
    }

    const auto val = evaluate(model, params.data(), val_ds, cfg.exec);
    EpochStats st;
    st.epoch = epoch;
    st.train_loss = loss_sum / n;
    st.val_loss = val.mean_loss;
    st.val_accuracy = val.mean_class_accuracy;
    out.history.push_back(st);

    if (st.val_loss < best_val) {
      best_val = st.val_loss;
      out.best_params = params;
      out.best_epoch = epoch;
      stale = 0;
    } else if (++stale > cfg.patience) {
      break;
    }
  }
  return out;
}

EvalResult evaluate(const Classifier& model, const double* params, const Dataset& ds,
                    Exec exec) {
  const int n = static_cast<int>(ds.windows.size());
  if (n == 0) throw std::invalid_argument("empty dataset");
  const int C = model.num_classes();
  const int threads = std::max(1, max_threads());
  std::vector<int> preds(static_cast<std::size_t>(n), 0);
  std::vector<double> losses(static_cast<std::size_t>(n), 0.0);
  std::vector<std::unique_ptr<Cache>> caches(static_cast<std::size_t>(threads));

  for_each_item(n, exec, [&](int k, int tid) {
    auto& cache = caches[static_cast<std::size_t>(tid)];
    if (!cache) cache = model.make_cache();
    const Window& w = ds.windows[static_cast<std::size_t>(k)];
    if (!w.label) throw std::invalid_argument("unlabeled window in evaluate");
    std::array<double, 64> probs{};
    model.forward(params, w.values.data(), probs.data(), *cache);
    int arg = 0;
    for (int c = 1; c < C; ++c)
      if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(arg)]) arg = c;
    preds[static_cast<std::size_t>(k)] = arg;
    losses[static_cast<std::size_t>(k)] =
        cross_entropy(probs.data(), C, static_cast<int>(*w.label));
  });

  EvalResult res;
  double loss_sum = 0.0;
  for (int k = 0; k < n; ++k) {
    const int truth = static_cast<int>(*ds.windows[static_cast<std::size_t>(k)].label);
    ++res.counts[static_cast<std::size_t>(truth)][static_cast<std::size_t>(preds[static_cast<std::size_t>(k)])];
    loss_sum += losses[static_cast<std::size_t>(k)];
  }
  res.mean_loss = loss_sum / n;

  double diag_sum = 0.0;
  for (int i = 0; i < kNumClasses; ++i) {
    int row = 0;
    for (int j = 0; j < kNumClasses; ++j) row += res.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    if (row == 0)
      throw std::runtime_error(std::string("evaluate: class ") +
                               to_string(static_cast<EventClass>(i)) + " has no samples");
    for (int j = 0; j < kNumClasses; ++j)
      res.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<double>(res.counts[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]) / row;
    diag_sum += res.confusion[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)];
  }
  res.mean_class_accuracy = diag_sum / kNumClasses;
  return res;
}

std::pair<EventClass, std::array<double, kNumClasses>> predict(
    const Classifier& model, const double* params, const std::vector<double>& window) {
  if (static_cast<int>(window.size()) != model.input_len())
    throw std::invalid_argument("window length does not match the model");
  for (double v : window)
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite window value");
  auto cache = model.make_cache();
  std::array<double, kNumClasses> probs{};
  model.forward(params, window.data(), probs.data(), *cache);
  int arg = 0;
  for (int c = 1; c < model.num_classes(); ++c)
    if (probs[static_cast<std::size_t>(c)] > probs[static_cast<std::size_t>(arg)]) arg = c;
  return {static_cast<EventClass>(arg), probs};
}

double gradient_check(const Classifier& model, const std::vector<double>& params,
                      const std::vector<double>& x, int label, double eps) {
  if (eps <= 0.0) throw std::invalid_argument("eps must be > 0");
  auto cache = model.make_cache();
  std::vector<double> probs(static_cast<std::size_t>(model.num_classes()));
  std::vector<double> analytic(static_cast<std::size_t>(model.layout().total));
  model.forward(params.data(), x.data(), probs.data(), *cache);
  model.backward(params.data(), label, *cache, analytic.data());

  std::vector<double> theta = params;
  auto loss_at = [&]() {
    model.forward(theta.data(), x.data(), probs.data(), *cache);
    return cross_entropy(probs.data(), model.num_classes(), label);
  };

  double max_rel = 0.0;
  for (std::size_t p = 0; p < theta.size(); ++p) {
    const double keep = theta[p];
    theta[p] = keep + eps;
    const double lp = loss_at();
    theta[p] = keep - eps;
    const double lm = loss_at();
    theta[p] = keep;
    const double numeric = (lp - lm) / (2.0 * eps);
    const double a = analytic[p];
    const double rel = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), 1e-12});
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

// --- checkpoint files -----------------------------------------------------------

namespace {

nlohmann::json hyper_to_json(const TrainConfig& h) {
  return {{"learning_rate", h.learning_rate}, {"beta1", h.beta1},
          {"beta2", h.beta2},                 {"epsilon", h.epsilon},
          {"batch_size", h.batch_size},       {"max_epochs", h.max_epochs},
          {"patience", h.patience},           {"seed", h.seed}};
}

TrainConfig hyper_from_json(const nlohmann::json& j) {
  TrainConfig h;
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.beta1 = j.value("beta1", h.beta1);
  h.beta2 = j.value("beta2", h.beta2);
  h.epsilon = j.value("epsilon", h.epsilon);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.max_epochs = j.value("max_epochs", h.max_epochs);
  h.patience = j.value("patience", h.patience);
  h.seed = j.value("seed", h.seed);
  return h;
}

}  // namespace

std::string checkpoint_to_json(const Checkpoint& ck) {
  auto model = make_classifier(ck);
  if (model->layout().total != static_cast<int>(ck.params.size()))
    throw std::invalid_argument("checkpoint parameter count does not match its spec");
  nlohmann::json j;
  j["format_version"] = ck.format_version;
  j["kind"] = ck.kind;
  if (ck.kind == "lstm") {
    j["spec"] = {{"input_size", ck.lstm.input_size},
                 {"seq_len", ck.lstm.seq_len},
                 {"lstm_hidden", ck.lstm.lstm_hidden},
                 {"dense_units", ck.lstm.dense_units},
                 {"num_classes", ck.lstm.num_classes}};
  } else {
    j["spec"] = {{"input_len", ck.mlp.input_len},
                 {"hidden", ck.mlp.hidden},
                 {"num_classes", ck.mlp.num_classes}};
  }
  j["hyper"] = hyper_to_json(ck.hyper);
  j["tensors"] = nlohmann::json::array();
  for (const auto& t : model->layout().tensors) {
    std::vector<double> values(ck.params.begin() + t.offset,
                               ck.params.begin() + t.offset + t.size());
    j["tensors"].push_back(
        {{"name", t.name}, {"rows", t.rows}, {"cols", t.cols}, {"values", values}});
  }
  return j.dump(2);
}

Checkpoint checkpoint_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  Checkpoint ck;
  ck.format_version = j.at("format_version").get<int>();
  if (ck.format_version != 1)
    throw std::runtime_error("unsupported checkpoint format version " +
                             std::to_string(ck.format_version));
  ck.kind = j.at("kind").get<std::string>();
  const auto& s = j.at("spec");
  if (ck.kind == "lstm") {
    ck.lstm.input_size = s.at("input_size").get<int>();
    ck.lstm.seq_len = s.at("seq_len").get<int>();
    ck.lstm.lstm_hidden = s.at("lstm_hidden").get<std::vector<int>>();
    ck.lstm.dense_units = s.at("dense_units").get<int>();
    ck.lstm.num_classes = s.at("num_classes").get<int>();
  } else if (ck.kind == "mlp") {
    ck.mlp.input_len = s.at("input_len").get<int>();
    ck.mlp.hidden = s.at("hidden").get<std::vector<int>>();
    ck.mlp.num_classes = s.at("num_classes").get<int>();
  } else {
    throw std::runtime_error("unknown checkpoint kind: " + ck.kind);
  }
  ck.hyper = hyper_from_json(j.at("hyper"));

  auto model = make_classifier(ck);
  ck.params.assign(static_cast<std::size_t>(model->layout().total), 0.0);
  for (const auto& tj : j.at("tensors")) {
    const auto& t = model->layout().find(tj.at("name").get<std::string>());
    if (t.rows != tj.at("rows").get<int>() || t.cols != tj.at("cols").get<int>())
      throw std::runtime_error("checkpoint tensor shape mismatch for " + t.name);
    const auto values = tj.at("values").get<std::vector<double>>();
    if (static_cast<int>(values.size()) != t.size())
      throw std::runtime_error("checkpoint tensor size mismatch for " + t.name);
    std::copy(values.begin(), values.end(), ck.params.begin() + t.offset);
  }
  return ck;
}

void save_checkpoint(const Checkpoint& ck, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint file: " + path);
  out << checkpoint_to_json(ck) << '\n';
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return checkpoint_from_json(ss.str());
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path,
                      const std::string& config_snapshot) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write history file: " + path);
  if (!config_snapshot.empty()) out << "# config=" << config_snapshot << '\n';
  out << "epoch,train_loss,val_loss,val_acc\n";
  for (const auto& e : history)
    out << e.epoch << ',' << format_double(e.train_loss) << ','
        << format_double(e.val_loss) << ',' << format_double(e.val_accuracy) << '\n';
}

}  // namespace pon
