#include <doctest.h>

#include <cstdio>
#include <map>
#include <set>
#include <stdexcept>

#include "pon/diagnose.hpp"

using namespace pon;

namespace {

// Eight branches laid out so contiguous stride-60 windows pair them as
// (1,2),(3,4),(5,6),(7),(8).
PonTopology eight_branch() {
  PonTopology topo;
  const double d[] = {4.0, 10.0, 14.0, 20.0, 26.0, 32.0, 40.0, 52.0};
  for (int i = 0; i < 8; ++i) topo.branches.push_back({i + 1, d[i], 1.0});
  return topo;
}

OtdrConfig cfg300() {
  OtdrConfig cfg;
  cfg.trace_len_samples = 300;
  return cfg;
}

std::array<double, kNumClasses> onehot(EventClass c) {
  std::array<double, kNumClasses> p{};
  p[static_cast<int>(c)] = 1.0;
  return p;
}

}  // namespace

TEST_CASE("register_reference reproduces the paper-style window layout") {
  const auto topo = eight_branch();
  const auto cfg = cfg300();
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(ref_trace, topo, cfg);

  REQUIRE(ref.windows.size() == 5);
  CHECK(ref.windows[0].expected_branch_ids == std::vector<int>{1, 2});
  CHECK(ref.windows[1].expected_branch_ids == std::vector<int>{3, 4});
  CHECK(ref.windows[2].expected_branch_ids == std::vector<int>{5, 6});
  CHECK(ref.windows[3].expected_branch_ids == std::vector<int>{7});
  CHECK(ref.windows[4].expected_branch_ids == std::vector<int>{8});
  CHECK(ref.windows[0].expected_class == EventClass::C0);
  CHECK(ref.windows[3].expected_class == EventClass::C4);
  for (const auto& w : ref.windows)
    for (double p : w.ref_peaks) CHECK(p > 0.8);
}

TEST_CASE("register_reference: degenerate topologies") {
  OtdrConfig cfg;
  cfg.trace_len_samples = 240;

  SUBCASE("empty topology expects C6 everywhere") {
    PonTopology topo;
    const auto tr = synthesize_trace(topo, cfg, {}, 1);
    const auto ref = register_reference(tr, topo, cfg);
    REQUIRE(ref.windows.size() == 4);
    for (const auto& w : ref.windows) CHECK(w.expected_class == EventClass::C6);
  }

  SUBCASE("one branch gives exactly one C4 window") {
    PonTopology topo;
    topo.branches.push_back({3, 10.0, 1.0});
    const auto tr = synthesize_trace(topo, cfg, {}, 1);
    const auto ref = register_reference(tr, topo, cfg);
    int c4 = 0;
    for (const auto& w : ref.windows)
      if (w.expected_class == EventClass::C4) ++c4;
    CHECK(c4 == 1);
    CHECK(ref.windows[0].expected_branch_ids == std::vector<int>{3});
  }

  SUBCASE("three reflections in one contiguous window is an error") {
    PonTopology topo;
    topo.branches.push_back({1, 3.4, 1.0});
    topo.branches.push_back({2, 5.2, 1.0});
    topo.branches.push_back({3, 7.3, 1.0});
    topo.branches.push_back({4, 9.6, 1.0});
    const auto tr = synthesize_trace(topo, cfg, {}, 1);
    CHECK_THROWS_WITH_AS(register_reference(tr, topo, cfg),
                         doctest::Contains("smaller stride"), std::runtime_error);
  }
}

TEST_CASE("adaptive placement isolates tightly packed branches") {
  PonTopology topo;
  topo.branches.push_back({1, 3.4, 1.0});
  topo.branches.push_back({2, 5.2, 1.0});
  topo.branches.push_back({3, 7.3, 1.0});
  topo.branches.push_back({4, 9.6, 1.0});
  topo.split_index_offset_m = 20.0;
  OtdrConfig cfg;
  cfg.trace_len_samples = 240;
  const auto tr = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(tr, topo, cfg, 60, 60, Placement::adaptive);

  REQUIRE(ref.windows.size() == 2);
  CHECK(ref.windows[0].expected_branch_ids == std::vector<int>{1, 2});
  CHECK(ref.windows[1].expected_branch_ids == std::vector<int>{3, 4});
  CHECK(ref.windows[0].expected_class == EventClass::C0);
  // each expected center really sits inside its window
  for (const auto& w : ref.windows)
    for (int off : w.center_offsets) {
      CHECK(off >= 0);
      CHECK(off < 60);
    }
}

TEST_CASE("map_class_to_faults implements the full decision table") {
  using EC = EventClass;
  const std::vector<int> two{4, 9};
  const std::vector<int> one{4};
  const std::vector<int> none{};

  auto ids = [](std::vector<int> v) { return v; };

  // two expected branches
  CHECK(map_class_to_faults(EC::C0, two) == std::make_pair(ids({}), true));
  CHECK(map_class_to_faults(EC::C1, two) == std::make_pair(ids({4}), true));
  CHECK(map_class_to_faults(EC::C2, two) == std::make_pair(ids({9}), true));
  CHECK(map_class_to_faults(EC::C3, two) == std::make_pair(ids({4, 9}), true));
  CHECK(map_class_to_faults(EC::C6, two) == std::make_pair(ids({4, 9}), true));
  CHECK_FALSE(map_class_to_faults(EC::C4, two).second);
  CHECK_FALSE(map_class_to_faults(EC::C5, two).second);

  // one expected branch
  CHECK(map_class_to_faults(EC::C4, one) == std::make_pair(ids({}), true));
  CHECK(map_class_to_faults(EC::C5, one) == std::make_pair(ids({4}), true));
  CHECK(map_class_to_faults(EC::C6, one) == std::make_pair(ids({4}), true));
  for (EC c : {EC::C0, EC::C1, EC::C2, EC::C3})
    CHECK_FALSE(map_class_to_faults(c, one).second);

  // no expected branches
  CHECK(map_class_to_faults(EC::C6, none) == std::make_pair(ids({}), true));
  for (EC c : {EC::C0, EC::C1, EC::C2, EC::C3, EC::C4, EC::C5})
    CHECK_FALSE(map_class_to_faults(c, none).second);

  CHECK_THROWS_AS(map_class_to_faults(EC::C0, {1, 2, 3}), std::invalid_argument);
}

TEST_CASE("resolve_conflict: peak matching against the reference") {
  // Build a two-branch reference window with peaks at offsets 20 and 45.
  PonTopology topo;
  topo.branches.push_back({7, 4.0, 1.0});   // index 20
  topo.branches.push_back({8, 9.2, 1.0});   // index 45
  OtdrConfig cfg;
  cfg.trace_len_samples = 60;
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(ref_trace, topo, cfg);
  REQUIRE(ref.windows.size() == 1);
  const auto& rw = ref.windows[0];

  SUBCASE("C4 predicted, survivor at the first center: second branch faulty") {
    const auto tr = synthesize_trace(topo, cfg, {{8, 0.0}}, 1);
    const auto win = normalize(tr.samples);
    CHECK(resolve_conflict(win, EventClass::C4, rw) == std::vector<int>{8});
  }
  SUBCASE("C5 predicted, attenuated survivor at the second center: both faulty") {
    const auto tr = synthesize_trace(topo, cfg, {{7, 0.0}, {8, 0.3}}, 1);
    // normalize against the healthy reference scale, as diagnose() does for
    // a full trace; here the window is the whole trace
    std::vector<double> win(tr.samples.size());
    for (std::size_t i = 0; i < win.size(); ++i)
      win[i] = (tr.samples[i] - ref.ref_min) / (ref.ref_max - ref.ref_min);
    CHECK(resolve_conflict(win, EventClass::C5, rw) == std::vector<int>{7, 8});
  }
  SUBCASE("no surviving peak: every expected branch faulty") {
    const auto tr = synthesize_trace(topo, cfg, {{7, 0.0}, {8, 0.0}}, 1);
    const auto noisy = add_awgn(tr.samples, 1.0, 35.0, 9);
    std::vector<double> win(noisy.size());
    for (std::size_t i = 0; i < win.size(); ++i)
      win[i] = (noisy[i] - ref.ref_min) / (ref.ref_max - ref.ref_min);
    CHECK(resolve_conflict(win, EventClass::C6, rw) == std::vector<int>{7, 8});
  }
}

TEST_CASE("diagnose: Table-1 style mapping over scripted predictions") {
  const auto topo = eight_branch();
  const auto cfg = cfg300();
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(ref_trace, topo, cfg);

  // The monitored trace content is irrelevant for consistent predictions,
  // so diagnose the reference trace itself with a scripted model. Serial
  // execution keeps the script's call order aligned with window order.
  int call = 0;
  std::vector<EventClass> ordered{EventClass::C2, EventClass::C3, EventClass::C3,
                                  EventClass::C5, EventClass::C5};
  PredictFn fn = [&](const std::vector<double>&) {
    const EventClass c = ordered[call++ % ordered.size()];
    return std::make_pair(c, onehot(c));
  };
  const auto report = diagnose(ref_trace, ref, fn, "t0", "m0", Exec::serial);
  CHECK(report.overall_faulty == std::vector<int>{2, 3, 4, 5, 6, 7, 8});
  REQUIRE(report.windows.size() == 5);
  CHECK(report.windows[0].faulty_ids == std::vector<int>{2});
  CHECK(report.windows[1].faulty_ids == std::vector<int>{3, 4});
  CHECK(report.windows[4].faulty_ids == std::vector<int>{8});
  for (const auto& w : report.windows) CHECK(w.consistent);
}

TEST_CASE("diagnose: all-normal predictions give an empty faulty set") {
  const auto topo = eight_branch();
  const auto cfg = cfg300();
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(ref_trace, topo, cfg);

  PredictFn fn = [&](const std::vector<double>& win) {
    // count reflections: runs of samples above 0.5 with hysteresis
    int peaks = 0;
    bool in = false;
    for (double v : win) {
      if (v > 0.5 && !in) {
        ++peaks;
        in = true;
      } else if (v < 0.3) {
        in = false;
      }
    }
    const EventClass c = peaks >= 2 ? EventClass::C0
                          : peaks == 1 ? EventClass::C4
                                       : EventClass::C6;
    return std::make_pair(c, onehot(c));
  };
  const auto report = diagnose(ref_trace, ref, fn, "", "", Exec::serial);
  CHECK(report.overall_faulty.empty());
  for (const auto& w : report.windows) CHECK(w.consistent);
}

TEST_CASE("diagnose: stale reference and offset mismatches are rejected") {
  const auto topo = eight_branch();
  const auto cfg = cfg300();
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  const auto ref = register_reference(ref_trace, topo, cfg);
  PredictFn fn = [](const std::vector<double>&) {
    return std::make_pair(EventClass::C0, onehot(EventClass::C0));
  };

  SUBCASE("different topology hash") {
    PonTopology other = topo;
    other.branches[0].distance_m = 4.5;
    OtdrConfig c2 = cfg;
    const auto t2 = synthesize_trace(other, c2, {}, 1);
    CHECK_THROWS_WITH_AS(diagnose(t2, ref, fn), doctest::Contains("stale"),
                         std::runtime_error);
  }
  SUBCASE("trace shorter than the reference layout") {
    OtdrTrace t2 = ref_trace;
    t2.meta.topology_hash = 0;  // skip the hash check, force the offset check
    t2.samples.resize(120);
    CHECK_THROWS(diagnose(t2, ref, fn));
  }
}

TEST_CASE("reference round-trips through its file format") {
  const auto topo = eight_branch();
  const auto cfg = cfg300();
  const auto ref_trace = synthesize_trace(topo, cfg, {}, 1);
  auto ref = register_reference(ref_trace, topo, cfg);
  ref.config_snapshot = "{\"cmd\":\"register\"}";

  const std::string path = "ref_test.json";
  save_reference(ref, path);
  const auto back = load_reference(path);
  CHECK(back.topology_hash == ref.topology_hash);
  CHECK(back.windows.size() == ref.windows.size());
  CHECK(back.ref_min == ref.ref_min);
  CHECK(back.ref_max == ref.ref_max);
  for (std::size_t i = 0; i < ref.windows.size(); ++i) {
    CHECK(back.windows[i].expected_branch_ids == ref.windows[i].expected_branch_ids);
    CHECK(back.windows[i].center_offsets == ref.windows[i].center_offsets);
    CHECK(back.windows[i].ref_peaks == ref.windows[i].ref_peaks);
    CHECK(back.windows[i].expected_class == ref.windows[i].expected_class);
  }
  std::remove(path.c_str());
}
