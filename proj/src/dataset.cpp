#include "pon/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
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

const char* to_string(EventClass c) {
  static const char* names[] = {"C0", "C1", "C2", "C3", "C4", "C5", "C6"};
  return names[static_cast<int>(c)];
}

EventClass event_class_from_string(const std::string& s) {
  for (int i = 0; i < kNumClasses; ++i)
    if (s == to_string(static_cast<EventClass>(i))) return static_cast<EventClass>(i);
  throw std::invalid_argument("unknown event class: " + s);
}

int reflections_required(EventClass c) {
  switch (c) {
    case EventClass::C0:
    case EventClass::C1:
    case EventClass::C2:
    case EventClass::C3:
      return 2;
    case EventClass::C4:
    case EventClass::C5:
      return 1;
    case EventClass::C6:
      return 0;
  }
  return 0;
}

void Dataset::recount() {
  class_counts.fill(0);
  for (const auto& w : windows) {
    if (!w.label) throw std::runtime_error("dataset window missing label");
    ++class_counts[static_cast<int>(*w.label)];
  }
}

bool Dataset::counts_consistent() const {
  std::array<int, kNumClasses> c{};
  for (const auto& w : windows) {
    if (!w.label) return false;
    ++c[static_cast<int>(*w.label)];
  }
  return c == class_counts;
}

void GenConfig::validate() const {
  if (per_class < 1) throw std::invalid_argument("per_class must be >= 1");
  if (!(0.0 < ratio_min && ratio_min < ratio_max && ratio_max <= 1.0))
    throw std::invalid_argument("require 0 < ratio_min < ratio_max <= 1");
  if (!(psnr_min_db <= psnr_max_db))
    throw std::invalid_argument("psnr range is empty");
  if (window_len < 2) throw std::invalid_argument("window_len too small");
  if (break_fraction < 0.0 || break_fraction > 1.0)
    throw std::invalid_argument("break_fraction must be in [0,1]");
  if (!(0.0 < spacing_min_m && spacing_min_m <= spacing_max_m))
    throw std::invalid_argument("bad spacing range");
  if (reference_height <= 0.0) throw std::invalid_argument("reference_height must be > 0");
  otdr.validate();
}

std::string GenConfig::to_json() const {
  nlohmann::json j;
  j["per_class"] = per_class;
  j["ratio_min"] = ratio_min;
  j["ratio_max"] = ratio_max;
  j["psnr_min_db"] = psnr_min_db;
  j["psnr_max_db"] = psnr_max_db;
  j["window_len"] = window_len;
  j["break_fraction"] = break_fraction;
  j["reference_height"] = reference_height;
  j["spacing_min_m"] = spacing_min_m;
  j["spacing_max_m"] = spacing_max_m;
  j["seed"] = seed;
  j["otdr"] = {{"sampling_time_ns", otdr.sampling_time_ns},
               {"pulse_width_ns", otdr.pulse_width_ns},
               {"group_index", otdr.group_index},
               {"baseline_level", otdr.baseline_level},
               {"reflection_extent_samples", otdr.reflection_extent_samples},
               {"trace_len_samples", otdr.trace_len_samples}};
  return j.dump();
}

GenConfig GenConfig::from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  GenConfig g;
  g.per_class = j.value("per_class", g.per_class);
  g.ratio_min = j.value("ratio_min", g.ratio_min);
  g.ratio_max = j.value("ratio_max", g.ratio_max);
  g.psnr_min_db = j.value("psnr_min_db", g.psnr_min_db);
  g.psnr_max_db = j.value("psnr_max_db", g.psnr_max_db);
  g.window_len = j.value("window_len", g.window_len);
  g.break_fraction = j.value("break_fraction", g.break_fraction);
  g.reference_height = j.value("reference_height", g.reference_height);
  g.spacing_min_m = j.value("spacing_min_m", g.spacing_min_m);
  g.spacing_max_m = j.value("spacing_max_m", g.spacing_max_m);
  g.seed = j.value("seed", g.seed);
  if (j.contains("otdr")) {
    const auto& o = j["otdr"];
    g.otdr.sampling_time_ns = o.value("sampling_time_ns", g.otdr.sampling_time_ns);
    g.otdr.pulse_width_ns = o.value("pulse_width_ns", g.otdr.pulse_width_ns);
    g.otdr.group_index = o.value("group_index", g.otdr.group_index);
    g.otdr.baseline_level = o.value("baseline_level", g.otdr.baseline_level);
    g.otdr.reflection_extent_samples =
        o.value("reflection_extent_samples", g.otdr.reflection_extent_samples);
    g.otdr.trace_len_samples = o.value("trace_len_samples", g.otdr.trace_len_samples);
  }
  return g;
}

// --- splitting and labeling -------------------------------------------------

std::vector<Window> split_into_windows(const OtdrTrace& trace, int start_index,
                                       int stride, const PonTopology* topo,
                                       const OtdrConfig* cfg, int window_len) {
  const int len = static_cast<int>(trace.samples.size());
  if (start_index < 0 || start_index >= len)
    throw std::invalid_argument("start_index out of range");
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");

  std::vector<int> centers;
  std::vector<int> ids;
  if (topo && cfg) {
    OtdrConfig unbounded = *cfg;
    unbounded.trace_len_samples = 0;
    for (const auto& b : topo->branches) {
      centers.push_back(reflection_center_index(*topo, b, unbounded));
      ids.push_back(b.id);
    }
  }

  std::vector<Window> out;
  for (int off = start_index; off + window_len <= len; off += stride) {
    Window w;
    w.source_offset = off;
    w.values.assign(trace.samples.begin() + off,
                    trace.samples.begin() + off + window_len);
    for (std::size_t j = 0; j < centers.size(); ++j)
      if (centers[j] >= off && centers[j] < off + window_len)
        w.covered_branch_ids.push_back(ids[j]);
    out.push_back(std::move(w));
  }
  return out;
}

std::vector<double> normalize(const std::vector<double>& values) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double v : values) {
    if (!std::isfinite(v)) throw std::invalid_argument("non-finite value in normalize");
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  std::vector<double> out(values.size(), 0.0);
  if (values.empty() || hi == lo) return out;
  const double scale = 1.0 / (hi - lo);
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - lo) * scale;
  return out;
}

EventClass label_window(const std::vector<int>& covered_branch_ids,
                        const std::set<int>& faulty_ids) {
  const std::size_t n = covered_branch_ids.size();
  if (n > 2) throw std::invalid_argument("window covers more than two branches");
  if (n == 0) return EventClass::C6;
  const bool first_faulty = faulty_ids.count(covered_branch_ids[0]) > 0;
  if (n == 1) return first_faulty ? EventClass::C5 : EventClass::C4;
  const bool second_faulty = faulty_ids.count(covered_branch_ids[1]) > 0;
  if (first_faulty && second_faulty) return EventClass::C3;
  if (first_faulty) return EventClass::C1;
  if (second_faulty) return EventClass::C2;
  return EventClass::C0;
}

// --- augmentation ------------------------------------------------------------

WindowSource make_window_source(const PonTopology& topo, const OtdrConfig& cfg,
                                int start_index, int window_len) {
  WindowSource src;
  src.source_offset = start_index;
  src.baseline_level = cfg.baseline_level;
  src.base.assign(static_cast<std::size_t>(window_len), cfg.baseline_level);

  OtdrConfig unbounded = cfg;
  unbounded.trace_len_samples = 0;
  for (const auto& b : topo.branches) {
    const int center = reflection_center_index(topo, b, unbounded);
    const bool covered = center >= start_index && center < start_index + window_len;
    if (covered) {
      WindowReflection r;
      r.branch_id = b.id;
      r.center_offset = center - start_index;
      r.healthy_height = b.reflect_height;
      r.excess.assign(static_cast<std::size_t>(window_len), 0.0);
      for (int k = 0; k < window_len; ++k)
        r.excess[static_cast<std::size_t>(k)] =
            b.reflect_height * pulse_shape(start_index + k - center, cfg);
      src.reflections.push_back(std::move(r));
    } else {
      // Clipped tail of an uncovered neighbor stays in the data, unlabeled.
      for (int k = 0; k < window_len; ++k)
        src.base[static_cast<std::size_t>(k)] +=
            b.reflect_height * pulse_shape(start_index + k - center, cfg);
    }
  }
  if (src.reflections.size() > 2)
    throw std::runtime_error("window covers more than two reflections");
  return src;
}

namespace {

std::vector<int> designated_for(EventClass target) {
  switch (target) {
    case EventClass::C1: return {0};
    case EventClass::C2: return {1};
    case EventClass::C3: return {0, 1};
    case EventClass::C5: return {0};
    default: return {};
  }
}

double draw_uniform(std::mt19937_64& rng, double lo, double hi) {
  if (lo == hi) return lo;  // also covers the +inf "no noise" sentinel
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

EventClass content_label(const std::vector<bool>& visible,
                         const std::vector<bool>& faulty) {
  int n = 0;
  std::vector<bool> vis_faulty;
  for (std::size_t i = 0; i < visible.size(); ++i) {
    if (!visible[i]) continue;
    ++n;
    vis_faulty.push_back(faulty[i]);
  }
  if (n == 0) return EventClass::C6;
  if (n == 1) return vis_faulty[0] ? EventClass::C5 : EventClass::C4;
  if (vis_faulty[0] && vis_faulty[1]) return EventClass::C3;
  if (vis_faulty[0]) return EventClass::C1;
  if (vis_faulty[1]) return EventClass::C2;
  return EventClass::C0;
}

Window augment_with(const WindowSource& src, EventClass target,
                    const GenConfig& gen, std::mt19937_64& rng,
                    const std::set<int>* forced_breaks) {
  const int need = reflections_required(target);
  if (static_cast<int>(src.reflections.size()) != need)
    throw std::invalid_argument(std::string("window has wrong reflection count for ") +
                                to_string(target));
  const int wlen = static_cast<int>(src.base.size());

  std::vector<double> ratios(src.reflections.size(), 1.0);
  std::vector<bool> faulty(src.reflections.size(), false);
  for (int d : designated_for(target)) {
    bool brk;
    if (forced_breaks) {
      brk = forced_breaks->count(d) > 0;
    } else {
      brk = gen.break_fraction > 0.0 &&
            std::uniform_real_distribution<double>(0.0, 1.0)(rng) < gen.break_fraction;
    }
    ratios[static_cast<std::size_t>(d)] =
        brk ? 0.0 : draw_uniform(rng, gen.ratio_min, gen.ratio_max);
    faulty[static_cast<std::size_t>(d)] = true;
  }
  const double psnr_db = draw_uniform(rng, gen.psnr_min_db, gen.psnr_max_db);

  // Normalization/noise anchor: tallest healthy covered reflection, or the
  // nominal reference height when the window covers none.
  double anchor = 0.0;
  for (const auto& r : src.reflections) anchor = std::max(anchor, r.healthy_height);
  if (anchor == 0.0) anchor = gen.reference_height;

  std::vector<double> raw = src.base;
  for (std::size_t i = 0; i < src.reflections.size(); ++i) {
    const auto& ex = src.reflections[i].excess;
    for (int k = 0; k < wlen; ++k) raw[static_cast<std::size_t>(k)] += ratios[i] * ex[k];
  }
  const double sigma = awgn_sigma(anchor, psnr_db);
  if (sigma > 0.0) {
    std::normal_distribution<double> noise(0.0, sigma);
    for (auto& v : raw) v += noise(rng);
  }

  Window w;
  w.source_offset = src.source_offset;
  w.values.resize(static_cast<std::size_t>(wlen));
  const double inv = 1.0 / anchor;
  for (int k = 0; k < wlen; ++k) {
    const double v = (raw[static_cast<std::size_t>(k)] - src.baseline_level) * inv;
    w.values[static_cast<std::size_t>(k)] = std::clamp(v, 0.0, 1.0);
  }
  for (const auto& r : src.reflections) w.covered_branch_ids.push_back(r.branch_id);

  bool any_break = false;
  std::vector<bool> visible(src.reflections.size(), true);
  for (std::size_t i = 0; i < ratios.size(); ++i)
    if (ratios[i] == 0.0) { visible[i] = false; any_break = true; }
  w.label = any_break ? content_label(visible, faulty) : target;
  return w;
}

}  // namespace

Window augment_window(const WindowSource& source, EventClass target_class,
                      const GenConfig& gen, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return augment_with(source, target_class, gen, rng, nullptr);
}

// --- generation --------------------------------------------------------------

namespace {

struct StartRange {
  int lo = 0, hi = -1;
  bool ok() const { return lo <= hi; }
};

// Window start positions that cover exactly the branches [first, first+count)
// of the sorted center list and nothing else.
StartRange exact_cover_range(const std::vector<int>& centers, int first, int count,
                             int window_len, int trace_len) {
  StartRange r;
  const int m = static_cast<int>(centers.size());
  if (count == 0) return r;  // handled separately
  const int last = first + count - 1;
  r.lo = std::max(centers[last] - (window_len - 1), 0);
  r.hi = std::min(centers[first], trace_len - window_len);
  if (first > 0) r.lo = std::max(r.lo, centers[first - 1] + 1);
  if (last + 1 < m) r.hi = std::min(r.hi, centers[last + 1] - window_len);
  return r;
}

std::vector<StartRange> empty_ranges(const std::vector<int>& centers, int window_len,
                                     int trace_len) {
  std::vector<StartRange> out;
  auto push = [&](int lo, int hi) {
    StartRange r{std::max(lo, 0), std::min(hi, trace_len - window_len)};
    if (r.ok()) out.push_back(r);
  };
  if (centers.empty()) {
    push(0, trace_len - window_len);
    return out;
  }
  push(0, centers.front() - window_len);
  for (std::size_t j = 0; j + 1 < centers.size(); ++j)
    push(centers[j] + 1, centers[j + 1] - window_len);
  push(centers.back() + 1, trace_len - window_len);
  return out;
}

struct PlacementPick {
  bool found = false;
  int start = 0;
  int first = 0;  // index of first covered branch (for coverage >= 1)
};

int auto_trace_len(const std::vector<int>& centers, const OtdrConfig& cfg, int window_len) {
  if (cfg.trace_len_samples > 0) return cfg.trace_len_samples;
  int last = centers.empty() ? 0 : centers.back();
  const int needed = last + cfg.reflection_extent_samples / 2 + 1 + window_len;
  return ((needed + 59) / 60) * 60;
}

PlacementPick pick_placement(const std::vector<int>& centers, int coverage,
                             int window_len, int trace_len, std::mt19937_64& rng) {
  PlacementPick pick;
  std::vector<std::pair<int, StartRange>> options;  // (first index, range)
  if (coverage == 0) {
    for (const auto& r : empty_ranges(centers, window_len, trace_len))
      options.emplace_back(-1, r);
  } else {
    const int m = static_cast<int>(centers.size());
    for (int j = 0; j + coverage <= m; ++j) {
      const auto r = exact_cover_range(centers, j, coverage, window_len, trace_len);
      if (r.ok()) options.emplace_back(j, r);
    }
  }
  if (options.empty()) return pick;
  const auto& [first, range] =
      options[std::uniform_int_distribution<std::size_t>(0, options.size() - 1)(rng)];
  pick.found = true;
  pick.first = first;
  pick.start = range.lo == range.hi
                   ? range.lo
                   : std::uniform_int_distribution<int>(range.lo, range.hi)(rng);
  return pick;
}

std::vector<int> branch_centers(const PonTopology& topo, const OtdrConfig& cfg) {
  OtdrConfig unbounded = cfg;
  unbounded.trace_len_samples = 0;
  std::vector<int> centers;
  for (const auto& b : topo.branches)
    centers.push_back(reflection_center_index(topo, b, unbounded));
  return centers;
}

PonTopology builtin_topology(int coverage, const GenConfig& gen, std::mt19937_64& rng) {
  PonTopology topo;
  if (coverage >= 1) {
    const double d1 = draw_uniform(rng, 2.0, 20.0);
    topo.branches.push_back({1, d1, 1.0});
    if (coverage == 2) {
      const double spacing = draw_uniform(rng, gen.spacing_min_m, gen.spacing_max_m);
      topo.branches.push_back({2, d1 + spacing, 1.0});
    }
  }
  return topo;
}

// Per-window generation plan: the break variants realize "reflection gone"
// patterns while keeping the dataset balanced on the final content label.
struct WindowPlan {
  EventClass augment_target;
  int coverage;
  std::set<int> forced_breaks;
  bool use_forced = false;
};

WindowPlan make_plan(EventClass want, const GenConfig& gen, std::mt19937_64& rng) {
  WindowPlan plan{want, reflections_required(want), {}, false};
  if (gen.break_fraction <= 0.0) return plan;
  const bool use_break =
      std::uniform_real_distribution<double>(0.0, 1.0)(rng) < gen.break_fraction;
  if (!use_break) return plan;
  switch (want) {
    case EventClass::C4: {
      // two covered, one broken, the other untouched
      const int broken = std::uniform_int_distribution<int>(0, 1)(rng);
      plan.augment_target = broken == 0 ? EventClass::C1 : EventClass::C2;
      plan.coverage = 2;
      plan.forced_breaks = {broken};
      plan.use_forced = true;
      break;
    }
    case EventClass::C5: {
      // two covered, one broken, the other attenuated
      const int broken = std::uniform_int_distribution<int>(0, 1)(rng);
      plan.augment_target = EventClass::C3;
      plan.coverage = 2;
      plan.forced_breaks = {broken};
      plan.use_forced = true;
      break;
    }
    case EventClass::C6: {
      // one covered, fully vanished
      plan.augment_target = EventClass::C5;
      plan.coverage = 1;
      plan.forced_breaks = {0};
      plan.use_forced = true;
      break;
    }
    default:
      break;  // two-reflection classes keep their designated pattern visible
  }
  return plan;
}

Window generate_one(EventClass want, const GenConfig& gen,
                    const std::vector<PonTopology>& pool, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const WindowPlan plan = make_plan(want, gen, rng);

  WindowSource src;
  bool placed = false;
  if (!pool.empty()) {
    const std::size_t begin =
        std::uniform_int_distribution<std::size_t>(0, pool.size() - 1)(rng);
    for (std::size_t k = 0; k < pool.size() && !placed; ++k) {
      const auto& topo = pool[(begin + k) % pool.size()];
      const auto centers = branch_centers(topo, gen.otdr);
      const int tlen = auto_trace_len(centers, gen.otdr, gen.window_len);
      auto pick = pick_placement(centers, plan.coverage, gen.window_len, tlen, rng);
      if (!pick.found) continue;
      src = make_window_source(topo, gen.otdr, pick.start, gen.window_len);
      placed = true;
    }
  }
  if (!placed) {
    const auto topo = builtin_topology(plan.coverage, gen, rng);
    const auto centers = branch_centers(topo, gen.otdr);
    const int tlen = auto_trace_len(centers, gen.otdr, gen.window_len);
    const auto pick = pick_placement(centers, plan.coverage, gen.window_len, tlen, rng);
    if (!pick.found)
      throw std::runtime_error("no feasible window placement for generated topology");
    src = make_window_source(topo, gen.otdr, pick.start, gen.window_len);
  }

  Window w = augment_with(src, plan.augment_target, gen, rng,
                          plan.use_forced ? &plan.forced_breaks : nullptr);
  if (*w.label != want)
    throw std::runtime_error("generation plan produced wrong class");
  return w;
}

}  // namespace

Dataset generate_dataset(const GenConfig& gen,
                         const std::vector<PonTopology>& topo_pool, Exec exec) {
  gen.validate();
  for (const auto& t : topo_pool) t.validate();

  const int total = gen.per_class * kNumClasses;
  Dataset ds;
  ds.seed = gen.seed;
  ds.config_snapshot = gen.to_json();
  ds.windows.resize(static_cast<std::size_t>(total));

  auto body = [&](int i) {
    const EventClass want = static_cast<EventClass>(i / gen.per_class);
    ds.windows[static_cast<std::size_t>(i)] =
        generate_one(want, gen, topo_pool, mix_seed(gen.seed, static_cast<std::uint64_t>(i)));
  };
#ifdef _OPENMP
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 64)
    for (int i = 0; i < total; ++i) body(i);
  } else {
    for (int i = 0; i < total; ++i) body(i);
  }
#else
  (void)exec;
  for (int i = 0; i < total; ++i) body(i);
#endif

  ds.recount();
  return ds;
}

// --- splitting into train/val/test -------------------------------------------

DatasetSplit split_dataset(const Dataset& ds, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed) {
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw std::invalid_argument("split fractions must sum to 1");

  std::array<std::vector<std::size_t>, kNumClasses> by_class;
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    const auto& w = ds.windows[i];
    if (!w.label) throw std::invalid_argument("cannot split unlabeled dataset");
    by_class[static_cast<std::size_t>(static_cast<int>(*w.label))].push_back(i);
  }

  DatasetSplit split;
  for (auto* part : {&split.train, &split.val, &split.test}) {
    part->seed = seed;
    part->config_snapshot = ds.config_snapshot;
  }
  for (int c = 0; c < kNumClasses; ++c) {
    auto& idx = by_class[static_cast<std::size_t>(c)];
    if (idx.empty()) continue;
    if (idx.size() < 3)
      throw std::runtime_error(std::string("cannot stratify: class ") +
                               to_string(static_cast<EventClass>(c)) +
                               " has fewer than 3 samples");
    std::mt19937_64 rng(mix_seed(seed, static_cast<std::uint64_t>(c)));
    std::shuffle(idx.begin(), idx.end(), rng);
    const auto n = static_cast<long long>(idx.size());
    long long n_train = std::llround(train_frac * static_cast<double>(n));
    long long n_val = std::llround(val_frac * static_cast<double>(n));
    n_train = std::min(n_train, n);
    n_val = std::min(n_val, n - n_train);
    for (long long i = 0; i < n; ++i) {
      const auto& w = ds.windows[idx[static_cast<std::size_t>(i)]];
      if (i < n_train) split.train.windows.push_back(w);
      else if (i < n_train + n_val) split.val.windows.push_back(w);
      else split.test.windows.push_back(w);
    }
  }
  split.train.recount();
  split.val.recount();
  split.test.recount();
  return split;
}

// --- dataset file -------------------------------------------------------------

void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset file: " + path);
  out << "# seed=" << ds.seed << '\n';
  out << "# class_counts=";
  for (int c = 0; c < kNumClasses; ++c)
    out << (c ? "," : "") << to_string(static_cast<EventClass>(c)) << ':'
        << ds.class_counts[static_cast<std::size_t>(c)];
  out << '\n';
  if (!ds.config_snapshot.empty()) out << "# config=" << ds.config_snapshot << '\n';
  for (const auto& w : ds.windows) {
    for (double v : w.values) out << format_double(v) << ' ';
    out << (w.label ? to_string(*w.label) : "?") << ' ';
    if (w.covered_branch_ids.empty()) {
      out << '-';
    } else {
      for (std::size_t j = 0; j < w.covered_branch_ids.size(); ++j)
        out << (j ? "," : "") << w.covered_branch_ids[j];
    }
    out << ' ' << w.source_offset << '\n';
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset file: " + path);
  Dataset ds;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto spos = line.find("seed=");
      if (spos != std::string::npos && line.find("class_counts") == std::string::npos)
        ds.seed = std::stoull(line.substr(spos + 5));
      const auto cpos = line.find("config=");
      if (cpos != std::string::npos) ds.config_snapshot = line.substr(cpos + 7);
      continue;
    }
    std::istringstream ls(line);
    std::vector<std::string> tokens;
    std::string tok;
    while (ls >> tok) tokens.push_back(tok);
    if (tokens.size() < 3) throw std::runtime_error("malformed dataset record");
    const std::size_t nvals = tokens.size() - 3;
    Window w;
    w.values.resize(nvals);
    for (std::size_t j = 0; j < nvals; ++j)
      w.values[j] = std::strtod(tokens[j].c_str(), nullptr);
    w.label = event_class_from_string(tokens[nvals]);
    if (tokens[nvals + 1] != "-") {
      std::istringstream is(tokens[nvals + 1]);
      std::string id;
      while (std::getline(is, id, ',')) w.covered_branch_ids.push_back(std::stoi(id));
    }
    w.source_offset = std::stoi(tokens[nvals + 2]);
    ds.windows.push_back(std::move(w));
  }
  ds.recount();
  return ds;
}

}  // namespace pon
