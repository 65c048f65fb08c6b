#include "pon/diagnose.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace pon {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::vector<int> sorted_centers(const PonTopology& topo, const OtdrConfig& cfg) {
  OtdrConfig unbounded = cfg;
  unbounded.trace_len_samples = 0;
  std::vector<int> centers;
  for (const auto& b : topo.branches)
    centers.push_back(reflection_center_index(topo, b, unbounded));
  return centers;
}

// Start positions of a window covering exactly branches [first, first+count)
// and no others; empty when no such window exists.
struct CoverRange {
  int lo = 0, hi = -1;
  bool ok() const { return lo <= hi; }
};

CoverRange cover_range(const std::vector<int>& centers, int first, int count,
                       int window_len, int trace_len) {
  CoverRange r;
  const int m = static_cast<int>(centers.size());
  const int last = first + count - 1;
  r.lo = std::max(centers[static_cast<std::size_t>(last)] - (window_len - 1), 0);
  r.hi = std::min(centers[static_cast<std::size_t>(first)], trace_len - window_len);
  if (first > 0) r.lo = std::max(r.lo, centers[static_cast<std::size_t>(first - 1)] + 1);
  if (last + 1 < m) r.hi = std::min(r.hi, centers[static_cast<std::size_t>(last + 1)] - window_len);
  return r;
}

RefWindow describe_window(const PonTopology& topo, const OtdrConfig& cfg,
                          const std::vector<double>& normalized, int start,
                          int window_len, int index) {
  RefWindow w;
  w.window_index = index;
  w.source_offset = start;
  const auto centers = sorted_centers(topo, cfg);
  for (std::size_t j = 0; j < centers.size(); ++j) {
    if (centers[j] >= start && centers[j] < start + window_len) {
      w.expected_branch_ids.push_back(topo.branches[j].id);
      w.center_offsets.push_back(centers[j] - start);
      w.ref_peaks.push_back(normalized[static_cast<std::size_t>(centers[j])]);
    }
  }
  if (w.expected_branch_ids.size() > 2)
    throw std::runtime_error(
        "reference window at offset " + std::to_string(start) +
        " covers more than two reflections; register with a smaller stride or "
        "the adaptive window policy");
  w.expected_class = label_window(w.expected_branch_ids, {});
  return w;
}

}  // namespace

ReferenceMap register_reference(const OtdrTrace& ref_trace, const PonTopology& topo,
                                const OtdrConfig& cfg, int stride, int window_len,
                                Placement placement) {
  topo.validate();
  cfg.validate();
  if (stride < 1) throw std::invalid_argument("stride must be >= 1");
  const int len = static_cast<int>(ref_trace.samples.size());
  if (len < window_len) throw std::invalid_argument("reference trace shorter than a window");

  ReferenceMap ref;
  ref.topology_hash = topo.hash();
  ref.stride = stride;
  ref.window_len = window_len;
  ref.placement = placement;
  double lo = ref_trace.samples[0], hi = ref_trace.samples[0];
  for (double v : ref_trace.samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  ref.ref_min = lo;
  ref.ref_max = hi;
  const auto normalized = normalize(ref_trace.samples);

  OtdrConfig unbounded = cfg;
  unbounded.trace_len_samples = 0;

  if (placement == Placement::contiguous) {
    const int start0 = distance_to_index(topo.split_index_offset_m, unbounded);
    int index = 0;
    for (int off = start0; off + window_len <= len; off += stride)
      ref.windows.push_back(describe_window(topo, cfg, normalized, off, window_len, index++));
  } else {
    const auto centers = sorted_centers(topo, cfg);
    const int m = static_cast<int>(centers.size());
    int index = 0;
    int j = 0;
    while (j < m) {
      CoverRange pair{};
      if (j + 1 < m) pair = cover_range(centers, j, 2, window_len, len);
      CoverRange single = cover_range(centers, j, 1, window_len, len);
      int start = 0;
      int take = 0;
      if (pair.ok()) {
        start = (pair.lo + pair.hi) / 2;
        take = 2;
      } else if (single.ok()) {
        start = (single.lo + single.hi) / 2;
        take = 1;
      } else {
        throw std::runtime_error(
            "no window of length " + std::to_string(window_len) +
            " can isolate branch id " + std::to_string(topo.branches[static_cast<std::size_t>(j)].id) +
            " with at most two reflections");
      }
      ref.windows.push_back(describe_window(topo, cfg, normalized, start, window_len, index++));
      j += take;
    }
  }
  return ref;
}

std::pair<std::vector<int>, bool> map_class_to_faults(
    EventClass predicted, const std::vector<int>& expected_branch_ids) {
  const std::size_t n = expected_branch_ids.size();
  if (n > 2) throw std::invalid_argument("at most two expected branches per window");
  const std::vector<int> all = expected_branch_ids;
  switch (n) {
    case 2:
      switch (predicted) {
        case EventClass::C0: return {{}, true};
        case EventClass::C1: return {{all[0]}, true};
        case EventClass::C2: return {{all[1]}, true};
        case EventClass::C3: return {all, true};
        case EventClass::C6: return {all, true};  // both vanished
        default: return {{}, false};              // C4 or C5 contradicts the map
      }
    case 1:
      switch (predicted) {
        case EventClass::C4: return {{}, true};
        case EventClass::C5: return {{all[0]}, true};
        case EventClass::C6: return {{all[0]}, true};  // vanished
        default: return {{}, false};                   // two-reflection class
      }
    default:
      return {std::vector<int>{}, predicted == EventClass::C6};
  }
}

std::vector<int> resolve_conflict(const std::vector<double>& window_values,
                                  EventClass predicted, const RefWindow& ref) {
  (void)predicted;  // the peak evidence decides; the class only flagged the conflict
  if (ref.expected_branch_ids.empty()) return {};

  const std::size_t head = std::min<std::size_t>(10, window_values.size());
  std::vector<double> lead(window_values.begin(), window_values.begin() + head);
  const double base = median_of(lead);
  std::vector<double> dev;
  dev.reserve(head);
  for (double v : lead) dev.push_back(std::abs(v - base));
  const double sigma_hat = 1.4826 * median_of(dev);

  int peak_idx = 0;
  for (std::size_t k = 1; k < window_values.size(); ++k)
    if (window_values[k] > window_values[static_cast<std::size_t>(peak_idx)])
      peak_idx = static_cast<int>(k);
  const double peak = window_values[static_cast<std::size_t>(peak_idx)];

  if (peak < base + 3.0 * sigma_hat) return ref.expected_branch_ids;  // nothing survives

  std::size_t match = 0;
  for (std::size_t j = 1; j < ref.center_offsets.size(); ++j)
    if (std::abs(ref.center_offsets[j] - peak_idx) <
        std::abs(ref.center_offsets[match] - peak_idx))
      match = j;

  std::vector<int> faulty;
  for (std::size_t j = 0; j < ref.expected_branch_ids.size(); ++j)
    if (j != match) faulty.push_back(ref.expected_branch_ids[j]);
  // survivor counts as faulty when its height collapsed vs the reference
  if (peak < 0.75 * ref.ref_peaks[match]) faulty.push_back(ref.expected_branch_ids[match]);
  std::sort(faulty.begin(), faulty.end());
  return faulty;
}

PredictFn predict_fn_for(const Classifier& model, const std::vector<double>& params) {
  return [&model, params](const std::vector<double>& window) {
    return predict(model, params.data(), window);
  };
}

DiagnosisReport diagnose(const OtdrTrace& trace, const ReferenceMap& ref,
                         const PredictFn& model, const std::string& timestamp,
                         const std::string& model_id, Exec exec) {
  if (trace.meta.topology_hash != 0 && ref.topology_hash != 0 &&
      trace.meta.topology_hash != ref.topology_hash)
    throw std::runtime_error("stale reference: topology hash does not match the trace");
  const int len = static_cast<int>(trace.samples.size());
  for (const auto& w : ref.windows)
    if (w.source_offset < 0 || w.source_offset + ref.window_len > len)
      throw std::runtime_error("trace does not match the reference stride/offsets");

  const auto normalized = normalize(trace.samples);
  const int n = static_cast<int>(ref.windows.size());
  std::vector<WindowDiagnosis> diags(static_cast<std::size_t>(n));

  auto body = [&](int k) {
    const auto& rw = ref.windows[static_cast<std::size_t>(k)];
    std::vector<double> values(normalized.begin() + rw.source_offset,
                               normalized.begin() + rw.source_offset + ref.window_len);
    auto [pred, probs] = model(values);
    WindowDiagnosis d;
    d.window_index = rw.window_index;
    d.source_offset = rw.source_offset;
    d.predicted = pred;
    d.probabilities = probs;
    d.expected = rw.expected_class;
    auto [faulty, consistent] = map_class_to_faults(pred, rw.expected_branch_ids);
    if (!consistent) faulty = resolve_conflict(values, pred, rw);
    d.faulty_ids = std::move(faulty);
    d.consistent = consistent;
    diags[static_cast<std::size_t>(k)] = std::move(d);
  };
#ifdef _OPENMP
  if (exec == Exec::parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (int k = 0; k < n; ++k) body(k);
  } else {
    for (int k = 0; k < n; ++k) body(k);
  }
#else
  (void)exec;
  for (int k = 0; k < n; ++k) body(k);
#endif

  DiagnosisReport report;
  report.windows = std::move(diags);
  report.timestamp = timestamp;
  report.model_id = model_id;
  report.topology_hash = ref.topology_hash;
  std::set<int> overall;
  for (const auto& d : report.windows) overall.insert(d.faulty_ids.begin(), d.faulty_ids.end());
  report.overall_faulty.assign(overall.begin(), overall.end());
  return report;
}

// --- files ---------------------------------------------------------------------

void save_reference(const ReferenceMap& ref, const std::string& path) {
  nlohmann::json j;
  j["topology_hash"] = hex64(ref.topology_hash);
  j["ref_min"] = ref.ref_min;
  j["ref_max"] = ref.ref_max;
  j["stride"] = ref.stride;
  j["window_len"] = ref.window_len;
  j["placement"] = ref.placement == Placement::contiguous ? "contiguous" : "adaptive";
  if (!ref.config_snapshot.empty()) j["config"] = ref.config_snapshot;
  j["windows"] = nlohmann::json::array();
  for (const auto& w : ref.windows) {
    nlohmann::json jw;
    jw["window_index"] = w.window_index;
    jw["source_offset"] = w.source_offset;
    jw["expected_branch_ids"] = w.expected_branch_ids;
    jw["expected_class"] = to_string(w.expected_class);
    jw["center_offsets"] = w.center_offsets;
    jw["ref_peaks"] = w.ref_peaks;
    j["windows"].push_back(jw);
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write reference file: " + path);
  out << j.dump(2) << '\n';
}

ReferenceMap load_reference(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open reference file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  const auto j = nlohmann::json::parse(ss.str());
  ReferenceMap ref;
  ref.topology_hash = std::stoull(j.at("topology_hash").get<std::string>(), nullptr, 16);
  ref.ref_min = j.at("ref_min").get<double>();
  ref.ref_max = j.at("ref_max").get<double>();
  ref.stride = j.at("stride").get<int>();
  ref.window_len = j.at("window_len").get<int>();
  ref.placement = j.at("placement").get<std::string>() == "adaptive"
                      ? Placement::adaptive
                      : Placement::contiguous;
  ref.config_snapshot = j.value("config", std::string());
  for (const auto& jw : j.at("windows")) {
    RefWindow w;
    w.window_index = jw.at("window_index").get<int>();
    w.source_offset = jw.at("source_offset").get<int>();
    w.expected_branch_ids = jw.at("expected_branch_ids").get<std::vector<int>>();
    w.expected_class = event_class_from_string(jw.at("expected_class").get<std::string>());
    w.center_offsets = jw.at("center_offsets").get<std::vector<int>>();
    w.ref_peaks = jw.at("ref_peaks").get<std::vector<double>>();
    ref.windows.push_back(std::move(w));
  }
  return ref;
}

std::string report_to_json(const DiagnosisReport& report) {
  nlohmann::json j;
  j["timestamp"] = report.timestamp;
  j["model_id"] = report.model_id;
  j["topology_hash"] = hex64(report.topology_hash);
  j["overall_faulty"] = report.overall_faulty;
  j["windows"] = nlohmann::json::array();
  for (const auto& d : report.windows) {
    nlohmann::json jw;
    jw["window_index"] = d.window_index;
    jw["source_offset"] = d.source_offset;
    jw["predicted"] = to_string(d.predicted);
    jw["expected"] = to_string(d.expected);
    jw["probabilities"] = d.probabilities;
    jw["faulty_ids"] = d.faulty_ids;
    jw["consistent"] = d.consistent;
    j["windows"].push_back(jw);
  }
  return j.dump(2);
}

DiagnosisReport report_from_json(const std::string& text) {
  const auto j = nlohmann::json::parse(text);
  DiagnosisReport report;
  report.timestamp = j.value("timestamp", std::string());
  report.model_id = j.value("model_id", std::string());
  report.topology_hash = std::stoull(j.at("topology_hash").get<std::string>(), nullptr, 16);
  report.overall_faulty = j.at("overall_faulty").get<std::vector<int>>();
  for (const auto& jw : j.at("windows")) {
    WindowDiagnosis d;
    d.window_index = jw.at("window_index").get<int>();
    d.source_offset = jw.value("source_offset", 0);
    d.predicted = event_class_from_string(jw.at("predicted").get<std::string>());
    d.expected = event_class_from_string(jw.at("expected").get<std::string>());
    const auto probs = jw.at("probabilities").get<std::vector<double>>();
    std::copy(probs.begin(), probs.end(), d.probabilities.begin());
    d.faulty_ids = jw.at("faulty_ids").get<std::vector<int>>();
    d.consistent = jw.at("consistent").get<bool>();
    report.windows.push_back(std::move(d));
  }
  return report;
}

void save_report(const DiagnosisReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report file: " + path);
  out << report_to_json(report) << '\n';
}

std::string render_report_table(const DiagnosisReport& report) {
  std::ostringstream os;
  os << "window  offset  expected  predicted  consistent  faulty\n";
  for (const auto& d : report.windows) {
    os << "  " << d.window_index << "\t" << d.source_offset << "\t";
    os << to_string(d.expected) << "\t" << to_string(d.predicted) << "\t"
       << (d.consistent ? "yes" : "NO") << "\t";
    if (d.faulty_ids.empty()) {
      os << "-";
    } else {
      for (std::size_t i = 0; i < d.faulty_ids.size(); ++i)
        os << (i ? "," : "") << d.faulty_ids[i];
    }
    os << '\n';
  }
  os << "overall faulty branches: ";
  if (report.overall_faulty.empty()) {
    os << "none";
  } else {
    for (std::size_t i = 0; i < report.overall_faulty.size(); ++i)
      os << (i ? "," : "") << report.overall_faulty[i];
  }
  os << '\n';
  return os.str();
}

}  // namespace pon
