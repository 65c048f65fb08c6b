#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "pon/dataset.hpp"
#include "pon/nn.hpp"
#include "pon/sim.hpp"

namespace pon {

// How reference windows are laid over the trace. Contiguous follows the
// configured stride from the split offset; adaptive searches a fine start
// grid for a minimal set of windows that isolates every branch into a
// window with at most two reflections (the fallback suggested when the
// contiguous layout would put three or more reflections in one window).
enum class Placement { contiguous, adaptive };

struct RefWindow {
  int window_index = 0;
  int source_offset = 0;
  std::vector<int> expected_branch_ids;  // ascending by distance, <= 2
  EventClass expected_class = EventClass::C6;
  std::vector<int> center_offsets;   // per expected branch, within the window
  std::vector<double> ref_peaks;     // normalized reference peak heights
};

struct ReferenceMap {
  std::vector<RefWindow> windows;
  std::uint64_t topology_hash = 0;
  double ref_min = 0.0, ref_max = 0.0;  // normalization constants of the reference
  int stride = kWindowLen;
  int window_len = kWindowLen;
  Placement placement = Placement::contiguous;
  std::string config_snapshot;
};

ReferenceMap register_reference(const OtdrTrace& ref_trace, const PonTopology& topo,
                                const OtdrConfig& cfg, int stride = kWindowLen,
                                int window_len = kWindowLen,
                                Placement placement = Placement::contiguous);

// Table-driven mapping from a predicted class and the branches the reference
// expects in that window to the implied faulty set. Returns the ids plus a
// consistency flag; inconsistent combinations are resolved separately.
std::pair<std::vector<int>, bool> map_class_to_faults(
    EventClass predicted, const std::vector<int>& expected_branch_ids);

// Peak-matching fallback for predictions that contradict the reference: find
// the surviving peak, match it to the nearest expected reflection center, and
// report the unmatched branches (plus the survivor itself when its height has
// collapsed relative to the reference) as faulty.
std::vector<int> resolve_conflict(const std::vector<double>& window_values,
                                  EventClass predicted, const RefWindow& ref);

struct WindowDiagnosis {
  int window_index = 0;
  int source_offset = 0;
  EventClass predicted = EventClass::C6;
  std::array<double, kNumClasses> probabilities{};
  EventClass expected = EventClass::C6;
  std::vector<int> faulty_ids;
  bool consistent = true;
};

struct DiagnosisReport {
  std::vector<WindowDiagnosis> windows;
  std::vector<int> overall_faulty;  // union of per-window sets, ascending
  std::string timestamp;
  std::string model_id;
  std::uint64_t topology_hash = 0;
};

using PredictFn = std::function<std::pair<EventClass, std::array<double, kNumClasses>>(
    const std::vector<double>&)>;

DiagnosisReport diagnose(const OtdrTrace& trace, const ReferenceMap& ref,
                         const PredictFn& model, const std::string& timestamp = "",
                         const std::string& model_id = "",
                         Exec exec = Exec::parallel);

PredictFn predict_fn_for(const Classifier& model, const std::vector<double>& params);

// --- files and rendering ------------------------------------------------------

void save_reference(const ReferenceMap& ref, const std::string& path);
ReferenceMap load_reference(const std::string& path);

std::string report_to_json(const DiagnosisReport& report);
DiagnosisReport report_from_json(const std::string& text);
void save_report(const DiagnosisReport& report, const std::string& path);
std::string render_report_table(const DiagnosisReport& report);

}  // namespace pon
