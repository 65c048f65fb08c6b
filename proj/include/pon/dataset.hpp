#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "pon/common.hpp"
#include "pon/sim.hpp"

namespace pon {

// The seven reflection patterns a window can show. C0: two normal
// reflections; C1: two, first faulty; C2: two, second faulty; C3: two, both
// faulty; C4: one normal; C5: one faulty; C6: no reflection.
enum class EventClass { C0, C1, C2, C3, C4, C5, C6 };

constexpr int kNumClasses = 7;
constexpr int kWindowLen = 60;

const char* to_string(EventClass c);
EventClass event_class_from_string(const std::string& s);
int reflections_required(EventClass c);  // 2 for C0-C3, 1 for C4-C5, 0 for C6

struct Window {
  std::vector<double> values;         // length 60, in [0,1]
  int source_offset = 0;              // start sample in the parent trace
  std::vector<int> covered_branch_ids;  // <= 2, ascending by distance
  std::optional<EventClass> label;
};

struct Dataset {
  std::vector<Window> windows;
  std::array<int, kNumClasses> class_counts{};
  std::uint64_t seed = 0;
  std::string config_snapshot;  // JSON, recorded in the dataset file

  void recount();  // rebuild class_counts from windows
  bool counts_consistent() const;
};

struct GenConfig {
  int per_class = 5000;
  double ratio_min = 1.0 / 50.0;
  double ratio_max = 1.0 / 2.0;
  double psnr_min_db = 5.0;
  double psnr_max_db = 30.0;
  int window_len = kWindowLen;
  // Probability that a designated faulty reflection is a full break
  // (ratio exactly 0). Break windows are labeled by their visible content:
  // a vanished reflection no longer counts toward the pattern. Used for the
  // clean evaluation profile; the training profile keeps this at 0.
  double break_fraction = 0.0;
  double reference_height = 1.0;  // AWGN/normalization anchor when no healthy
                                  // reflection is covered (e.g. C6 windows)
  double spacing_min_m = 2.0;     // branch spacing range for built-in
  double spacing_max_m = 6.0;     // two-reflection layouts
  std::uint64_t seed = 0;
  OtdrConfig otdr;

  void validate() const;
  std::string to_json() const;
  static GenConfig from_json(const std::string& text);
};

// One covered reflection inside a window, decomposed so augmentation can
// scale its contribution independently even when pulses overlap.
struct WindowReflection {
  int branch_id = 0;
  int center_offset = 0;  // within the window
  double healthy_height = 1.0;
  std::vector<double> excess;  // healthy excess above baseline, window_len long
};

struct WindowSource {
  std::vector<double> base;  // baseline plus tails of uncovered neighbors
  std::vector<WindowReflection> reflections;  // ascending by center
  int source_offset = 0;
  double baseline_level = 0.05;
};

// --- operations ------------------------------------------------------------

std::vector<Window> split_into_windows(const OtdrTrace& trace, int start_index,
                                       int stride = kWindowLen,
                                       const PonTopology* topo = nullptr,
                                       const OtdrConfig* cfg = nullptr,
                                       int window_len = kWindowLen);

// Min-max scaling to [0,1]; a constant input maps to all zeros.
std::vector<double> normalize(const std::vector<double>& values);

EventClass label_window(const std::vector<int>& covered_branch_ids,
                        const std::set<int>& faulty_ids);

Window augment_window(const WindowSource& source, EventClass target_class,
                      const GenConfig& gen, std::uint64_t seed);

// Builds a WindowSource for a (possibly faulted later) clean window directly
// from topology geometry. Exposed for tests and the reference registrar.
WindowSource make_window_source(const PonTopology& topo, const OtdrConfig& cfg,
                                int start_index, int window_len = kWindowLen);

Dataset generate_dataset(const GenConfig& gen,
                         const std::vector<PonTopology>& topo_pool,
                         Exec exec = Exec::parallel);

struct DatasetSplit {
  Dataset train, val, test;
};

DatasetSplit split_dataset(const Dataset& ds, double train_frac, double val_frac,
                           double test_frac, std::uint64_t seed);

// Dataset file: '#'-prefixed metadata lines, then one record per line:
// 60 amplitudes, label, covered ids ("-" if none), source offset, seed.
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace pon
