#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "pon/common.hpp"

namespace pon {

// A reflector-terminated PON branch. distance_m is the optical distance from
// the splitter to the end-of-branch reflector.
struct Branch {
  int id = 0;
  double distance_m = 0.0;
  double reflect_height = 1.0;  // normalized healthy peak height, (0,1]
};

struct PonTopology {
  std::vector<Branch> branches;       // strictly ascending by distance_m
  double split_index_offset_m = 0.0;  // trace origin -> start of analysis

  void validate() const;  // throws std::invalid_argument on violation
  std::uint64_t hash() const;
  const Branch* find(int id) const;
};

struct OtdrConfig {
  double sampling_time_ns = 2.0;
  double pulse_width_ns = 10.0;
  double group_index = 1.468;          // SMF at 1650 nm
  double baseline_level = 0.05;        // Rayleigh backscatter floor
  int reflection_extent_samples = 30;  // full visible width of one reflection
  int trace_len_samples = 0;           // 0 = size to fit the topology

  void validate() const;
  double meters_per_sample() const;
  double pulse_fwhm_samples() const;
};

// branch id -> reduction ratio in [0,1] applied to that branch's reflection.
using FaultSpec = std::map<int, double>;

struct TraceMeta {
  std::uint64_t seed = 0;
  std::uint64_t topology_hash = 0;
  FaultSpec faults;
  std::string config_snapshot;  // JSON, filled by the producing command
};

struct OtdrTrace {
  std::vector<double> samples;
  double sampling_time_ns = 2.0;
  TraceMeta meta;
};

// Sample index of an optical distance. One sample covers
// c * sampling_time / (2 * group_index) meters of fiber (round trip).
int distance_to_index(double distance_m, const OtdrConfig& cfg);

// Absolute center index of a branch's reflection in a trace.
int reflection_center_index(const PonTopology& topo, const Branch& b,
                            const OtdrConfig& cfg);

// Unit-peak bell evaluated at an integer offset from the reflection center;
// zero outside the configured extent.
double pulse_shape(int sample_offset, const OtdrConfig& cfg);

// Clean additive model: baseline + per-branch scaled pulses. Deterministic;
// the seed is only recorded in the trace metadata.
OtdrTrace synthesize_trace(const PonTopology& topo, const OtdrConfig& cfg,
                           const FaultSpec& faults, std::uint64_t seed);

double awgn_sigma(double peak_height, double psnr_db);
std::vector<double> add_awgn(const std::vector<double>& samples,
                             double peak_height, double psnr_db,
                             std::uint64_t seed);

// --- file formats ---------------------------------------------------------

// Topology file: JSON {branches: [{id, distance_m, reflect_height}],
// split_index_offset_m}.
PonTopology load_topology(const std::string& path);
void save_topology(const PonTopology& topo, const std::string& path);
PonTopology topology_from_json(const std::string& json_text);
std::string topology_to_json(const PonTopology& topo);

// Trace file: one header line "sampling_time_ns=<v> length=<n> seed=<s>",
// optional '#'-prefixed metadata lines, then one amplitude per line at full
// round-trip precision.
void save_trace(const OtdrTrace& trace, const std::string& path);
OtdrTrace load_trace(const std::string& path);

}  // namespace pon
