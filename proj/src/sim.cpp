#include "pon/sim.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace pon {

namespace {
constexpr double kLightSpeed = 2.99792458e8;  // m/s
}

void PonTopology::validate() const {
  if (split_index_offset_m < 0.0)
    throw std::invalid_argument("split_index_offset_m must be >= 0");
  std::set<int> ids;
  double prev = 0.0;
  for (const auto& b : branches) {
    if (b.id <= 0) throw std::invalid_argument("branch id must be positive");
    if (!ids.insert(b.id).second)
      throw std::invalid_argument("duplicate branch id " + std::to_string(b.id));
    if (b.distance_m <= 0.0)
      throw std::invalid_argument("branch distance_m must be > 0");
    if (b.reflect_height <= 0.0 || b.reflect_height > 1.0)
      throw std::invalid_argument("reflect_height must be in (0,1]");
    if (b.distance_m <= prev && prev > 0.0)
      throw std::invalid_argument("branches must be strictly ascending by distance");
    prev = b.distance_m;
  }
}

std::uint64_t PonTopology::hash() const {
  // Hash of the canonical JSON form; stable across platforms.
  return fnv1a64(topology_to_json(*this));
}

const Branch* PonTopology::find(int id) const {
  for (const auto& b : branches)
    if (b.id == id) return &b;
  return nullptr;
}

void OtdrConfig::validate() const {
  if (sampling_time_ns <= 0.0) throw std::invalid_argument("sampling_time_ns must be > 0");
  if (pulse_width_ns <= 0.0) throw std::invalid_argument("pulse_width_ns must be > 0");
  if (group_index <= 1.0) throw std::invalid_argument("group_index must be > 1");
  if (baseline_level < 0.0 || baseline_level >= 1.0)
    throw std::invalid_argument("baseline_level must be in [0,1)");
  if (reflection_extent_samples <= 0)
    throw std::invalid_argument("reflection_extent_samples must be positive");
  if (reflection_extent_samples < pulse_fwhm_samples())
    throw std::invalid_argument("reflection_extent_samples must cover the pulse width");
  if (trace_len_samples < 0)
    throw std::invalid_argument("trace_len_samples must be >= 0");
}

double OtdrConfig::meters_per_sample() const {
  return kLightSpeed * sampling_time_ns * 1e-9 / (2.0 * group_index);
}

double OtdrConfig::pulse_fwhm_samples() const {
  return pulse_width_ns / sampling_time_ns;
}

int distance_to_index(double distance_m, const OtdrConfig& cfg) {
  if (distance_m < 0.0) throw std::invalid_argument("distance_m must be >= 0");
  const int idx = static_cast<int>(std::llround(distance_m / cfg.meters_per_sample()));
  if (cfg.trace_len_samples > 0 && idx >= cfg.trace_len_samples)
    throw std::out_of_range("distance " + std::to_string(distance_m) +
                            " m maps past the end of the trace");
  return idx;
}

int reflection_center_index(const PonTopology& topo, const Branch& b,
                            const OtdrConfig& cfg) {
  return distance_to_index(topo.split_index_offset_m + b.distance_m, cfg);
}

double pulse_shape(int sample_offset, const OtdrConfig& cfg) {
  const int half = cfg.reflection_extent_samples / 2;
  if (sample_offset < -half || sample_offset > half) return 0.0;
  // Gaussian with FWHM equal to the pulse width in samples; the receiver
  // response broadens the visible footprint out to the configured extent.
  const double fwhm = cfg.pulse_fwhm_samples();
  const double sigma = fwhm / (2.0 * std::sqrt(2.0 * std::log(2.0)));
  const double x = static_cast<double>(sample_offset);
  return std::exp(-0.5 * x * x / (sigma * sigma));
}

namespace {

int resolved_trace_len(const PonTopology& topo, const OtdrConfig& cfg) {
  if (cfg.trace_len_samples > 0) return cfg.trace_len_samples;
  int last = 0;
  for (const auto& b : topo.branches) {
    OtdrConfig unbounded = cfg;
    unbounded.trace_len_samples = 0;
    last = std::max(last, reflection_center_index(topo, b, unbounded));
  }
  const int needed = last + cfg.reflection_extent_samples / 2 + 1;
  return ((needed + 59) / 60) * 60;  // round up to whole analysis blocks
}

}  // namespace

OtdrTrace synthesize_trace(const PonTopology& topo, const OtdrConfig& cfg,
                           const FaultSpec& faults, std::uint64_t seed) {
  topo.validate();
  cfg.validate();
  for (const auto& [id, ratio] : faults) {
    if (!topo.find(id))
      throw std::invalid_argument("fault references unknown branch id " + std::to_string(id));
    if (ratio < 0.0 || ratio > 1.0)
      throw std::invalid_argument("fault ratio must be in [0,1]");
  }

  const int len = resolved_trace_len(topo, cfg);
  OtdrTrace trace;
  trace.sampling_time_ns = cfg.sampling_time_ns;
  trace.samples.assign(static_cast<std::size_t>(len), cfg.baseline_level);
  trace.meta.seed = seed;
  trace.meta.topology_hash = topo.hash();
  trace.meta.faults = faults;

  OtdrConfig bounded = cfg;
  bounded.trace_len_samples = len;
  const int half = cfg.reflection_extent_samples / 2;
  for (const auto& b : topo.branches) {
    const int center = reflection_center_index(topo, b, bounded);  // throws if outside
    const auto it = faults.find(b.id);
    const double ratio = it == faults.end() ? 1.0 : it->second;
    const double amp = b.reflect_height * ratio;
    const int lo = std::max(0, center - half);
    const int hi = std::min(len - 1, center + half);
    for (int k = lo; k <= hi; ++k)
      trace.samples[static_cast<std::size_t>(k)] += amp * pulse_shape(k - center, cfg);
  }
  return trace;
}

double awgn_sigma(double peak_height, double psnr_db) {
  if (peak_height <= 0.0) throw std::invalid_argument("peak height must be > 0");
  if (std::isinf(psnr_db) && psnr_db > 0) return 0.0;
  if (!std::isfinite(psnr_db)) throw std::invalid_argument("psnr_db must be finite or +inf");
  return peak_height / std::pow(10.0, psnr_db / 20.0);
}

std::vector<double> add_awgn(const std::vector<double>& samples,
                             double peak_height, double psnr_db,
                             std::uint64_t seed) {
  const double sigma = awgn_sigma(peak_height, psnr_db);
  if (sigma == 0.0) return samples;
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  std::vector<double> out(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) out[i] = samples[i] + noise(rng);
  return out;
}

// --- file formats ----------------------------------------------------------

std::string topology_to_json(const PonTopology& topo) {
  nlohmann::json j;
  j["split_index_offset_m"] = topo.split_index_offset_m;
  j["branches"] = nlohmann::json::array();
  for (const auto& b : topo.branches) {
    j["branches"].push_back({{"id", b.id},
                             {"distance_m", b.distance_m},
                             {"reflect_height", b.reflect_height}});
  }
  return j.dump(2);
}

PonTopology topology_from_json(const std::string& json_text) {
  const auto j = nlohmann::json::parse(json_text);
  PonTopology topo;
  topo.split_index_offset_m = j.value("split_index_offset_m", 0.0);
  for (const auto& jb : j.at("branches")) {
    Branch b;
    b.id = jb.at("id").get<int>();
    b.distance_m = jb.at("distance_m").get<double>();
    b.reflect_height = jb.value("reflect_height", 1.0);
    topo.branches.push_back(b);
  }
  std::sort(topo.branches.begin(), topo.branches.end(),
            [](const Branch& a, const Branch& b) { return a.distance_m < b.distance_m; });
  topo.validate();
  return topo;
}

PonTopology load_topology(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open topology file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return topology_from_json(ss.str());
}

void save_topology(const PonTopology& topo, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write topology file: " + path);
  out << topology_to_json(topo) << '\n';
}

void save_trace(const OtdrTrace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trace file: " + path);
  out << "sampling_time_ns=" << format_double(trace.sampling_time_ns)
      << " length=" << trace.samples.size() << " seed=" << trace.meta.seed << '\n';
  out << "# topology_hash=" << hex64(trace.meta.topology_hash) << '\n';
  if (!trace.meta.faults.empty()) {
    out << "# faults=";
    bool first = true;
    for (const auto& [id, ratio] : trace.meta.faults) {
      out << (first ? "" : ",") << id << ':' << format_double(ratio);
      first = false;
    }
    out << '\n';
  }
  if (!trace.meta.config_snapshot.empty())
    out << "# config=" << trace.meta.config_snapshot << '\n';
  for (double v : trace.samples) out << format_double(v) << '\n';
}

OtdrTrace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open trace file: " + path);
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("empty trace file: " + path);

  OtdrTrace trace;
  std::size_t expect_len = 0;
  {
    std::istringstream hs(line);
    std::string field;
    while (hs >> field) {
      const auto eq = field.find('=');
      if (eq == std::string::npos) throw std::runtime_error("malformed trace header: " + line);
      const std::string key = field.substr(0, eq);
      const std::string val = field.substr(eq + 1);
      if (key == "sampling_time_ns") trace.sampling_time_ns = std::strtod(val.c_str(), nullptr);
      else if (key == "length") expect_len = std::stoull(val);
      else if (key == "seed") trace.meta.seed = std::stoull(val);
      else throw std::runtime_error("unknown trace header field: " + key);
    }
  }

  trace.samples.reserve(expect_len);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto pos = line.find("topology_hash=");
      if (pos != std::string::npos)
        trace.meta.topology_hash = std::stoull(line.substr(pos + 14), nullptr, 16);
      const auto cpos = line.find("config=");
      if (cpos != std::string::npos) trace.meta.config_snapshot = line.substr(cpos + 7);
      const auto fpos = line.find("faults=");
      if (fpos != std::string::npos) {
        std::istringstream fs(line.substr(fpos + 7));
        std::string item;
        while (std::getline(fs, item, ',')) {
          const auto colon = item.find(':');
          if (colon == std::string::npos) continue;
          trace.meta.faults[std::stoi(item.substr(0, colon))] =
              std::strtod(item.c_str() + colon + 1, nullptr);
        }
      }
      continue;
    }
    trace.samples.push_back(std::strtod(line.c_str(), nullptr));
  }
  if (expect_len != 0 && trace.samples.size() != expect_len)
    throw std::runtime_error("trace length mismatch: header says " +
                             std::to_string(expect_len) + ", file has " +
                             std::to_string(trace.samples.size()));
  return trace;
}

}  // namespace pon
