#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>

#include "pon/dataset.hpp"
#include "pon/sim.hpp"

using namespace pon;

TEST_CASE("topology file round-trip") {
  PonTopology topo;
  topo.branches.push_back({1, 4.25, 0.9});
  topo.branches.push_back({2, 10.125, 1.0});
  topo.split_index_offset_m = 2.5;

  const std::string path = "topo_test.json";
  save_topology(topo, path);
  const auto back = load_topology(path);
  CHECK(back.split_index_offset_m == topo.split_index_offset_m);
  REQUIRE(back.branches.size() == 2);
  CHECK(back.branches[0].id == 1);
  CHECK(back.branches[0].distance_m == 4.25);
  CHECK(back.branches[0].reflect_height == 0.9);
  CHECK(back.hash() == topo.hash());
  std::remove(path.c_str());

  SUBCASE("branches are sorted on load") {
    std::ofstream out(path);
    out << R"({"branches":[{"id":2,"distance_m":9.0},{"id":1,"distance_m":3.0}],)"
        << R"("split_index_offset_m":0})";
    out.close();
    const auto t = load_topology(path);
    CHECK(t.branches[0].id == 1);
    std::remove(path.c_str());
  }
  SUBCASE("invalid topology rejected on load") {
    std::ofstream out(path);
    out << R"({"branches":[{"id":1,"distance_m":-3.0}],"split_index_offset_m":0})";
    out.close();
    CHECK_THROWS(load_topology(path));
    std::remove(path.c_str());
  }
}

TEST_CASE("trace file round-trips doubles exactly") {
  OtdrTrace trace;
  trace.sampling_time_ns = 2.0;
  trace.meta.seed = 982451653;
  trace.meta.topology_hash = 0xdeadbeefcafe1234ULL;
  trace.meta.faults = {{3, 0.25}, {7, 0.0}};
  trace.meta.config_snapshot = "{\"psnr\":30}";
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 2.0);
  for (int i = 0; i < 500; ++i) trace.samples.push_back(u(rng));

  const std::string path = "trace_test.txt";
  save_trace(trace, path);
  const auto back = load_trace(path);
  CHECK(back.sampling_time_ns == trace.sampling_time_ns);
  CHECK(back.meta.seed == trace.meta.seed);
  CHECK(back.meta.topology_hash == trace.meta.topology_hash);
  CHECK(back.meta.faults == trace.meta.faults);
  CHECK(back.meta.config_snapshot == trace.meta.config_snapshot);
  CHECK(back.samples == trace.samples);  // bitwise, via %.17g
  std::remove(path.c_str());

  SUBCASE("header length mismatch detected") {
    std::ofstream out(path);
    out << "sampling_time_ns=2 length=3 seed=0\n0.5\n0.25\n";
    out.close();
    CHECK_THROWS(load_trace(path));
    std::remove(path.c_str());
  }
}

TEST_CASE("dataset file round-trip preserves windows, labels and counts") {
  GenConfig gen;
  gen.per_class = 4;
  gen.seed = 77;
  auto ds = generate_dataset(gen, {}, Exec::serial);

  const std::string path = "dataset_test.txt";
  save_dataset(ds, path);
  const auto back = load_dataset(path);
  CHECK(back.windows.size() == ds.windows.size());
  CHECK(back.class_counts == ds.class_counts);
  CHECK(back.seed == ds.seed);
  CHECK(back.config_snapshot == ds.config_snapshot);
  for (std::size_t i = 0; i < ds.windows.size(); ++i) {
    CHECK(back.windows[i].values == ds.windows[i].values);  // bitwise
    CHECK(*back.windows[i].label == *ds.windows[i].label);
    CHECK(back.windows[i].covered_branch_ids == ds.windows[i].covered_branch_ids);
    CHECK(back.windows[i].source_offset == ds.windows[i].source_offset);
  }
  std::remove(path.c_str());
}

TEST_CASE("fnv1a64 is stable") {
  CHECK(fnv1a64(std::string("")) == 1469598103934665603ULL);
  CHECK(fnv1a64(std::string("a")) == 0xaf63dc4c8601ec8cULL);
  CHECK(fnv1a64(std::string("a")) != fnv1a64(std::string("b")));
}

TEST_CASE("format_double survives a parse round trip") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1e6, 1e6);
  for (int i = 0; i < 1000; ++i) {
    const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    const double back = std::strtod(format_double(v).c_str(), nullptr);
    CHECK(back == v);
  }
}
