#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <vector>

#include "pon/sim.hpp"

using namespace pon;

namespace {

PonTopology one_branch(double distance_m, double height = 1.0) {
  PonTopology topo;
  topo.branches.push_back({1, distance_m, height});
  return topo;
}

}  // namespace

TEST_CASE("distance_to_index maps distances onto the sample grid") {
  OtdrConfig cfg;

  CHECK(distance_to_index(0.0, cfg) == 0);
  // delta_d = c * 2ns / (2 * 1.468) = 0.20422 m per sample
  CHECK(cfg.meters_per_sample() == doctest::Approx(0.204218).epsilon(1e-5));
  CHECK(distance_to_index(10.0, cfg) == 49);

  SUBCASE("two branches 2 m apart land about 10 samples apart") {
    for (double d = 2.0; d < 40.0; d += 1.7) {
      const int gap = distance_to_index(d + 2.0, cfg) - distance_to_index(d, cfg);
      CHECK(gap >= 9);
      CHECK(gap <= 11);
    }
  }

  SUBCASE("negative distance rejected") {
    CHECK_THROWS_AS(distance_to_index(-0.1, cfg), std::invalid_argument);
  }
  SUBCASE("index past the trace end rejected") {
    cfg.trace_len_samples = 40;
    CHECK_THROWS_AS(distance_to_index(10.0, cfg), std::out_of_range);
  }
}

TEST_CASE("synthesize_trace: empty topology gives a flat baseline") {
  PonTopology topo;
  OtdrConfig cfg;
  cfg.trace_len_samples = 120;
  const auto trace = synthesize_trace(topo, cfg, {}, 7);
  REQUIRE(trace.samples.size() == 120);
  for (double v : trace.samples) CHECK(v == cfg.baseline_level);
}

TEST_CASE("synthesize_trace: unit reflector peaks at baseline + height") {
  OtdrConfig cfg;
  cfg.trace_len_samples = 300;
  const auto topo = one_branch(10.0);
  const auto trace = synthesize_trace(topo, cfg, {}, 1);

  const int center = distance_to_index(10.0, cfg);
  CHECK(trace.samples[center] == doctest::Approx(cfg.baseline_level + 1.0).epsilon(1e-9));

  int argmax = 0;
  for (std::size_t i = 1; i < trace.samples.size(); ++i)
    if (trace.samples[i] > trace.samples[argmax]) argmax = static_cast<int>(i);
  CHECK(std::abs(argmax - center) <= 1);
}

TEST_CASE("synthesize_trace: fault ratio scales the excess exactly") {
  OtdrConfig cfg;
  cfg.trace_len_samples = 300;
  const auto topo = one_branch(12.0, 0.9);
  const auto clean = synthesize_trace(topo, cfg, {}, 1);
  const auto half = synthesize_trace(topo, cfg, {{1, 0.5}}, 1);
  for (std::size_t i = 0; i < clean.samples.size(); ++i) {
    const double want = 0.5 * (clean.samples[i] - cfg.baseline_level);
    CHECK(half.samples[i] - cfg.baseline_level == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("synthesize_trace: contributions of disjoint branch sets add") {
  OtdrConfig cfg;
  cfg.trace_len_samples = 400;
  PonTopology both;
  both.branches.push_back({1, 8.0, 1.0});
  both.branches.push_back({2, 9.5, 0.8});  // overlapping pulses
  PonTopology a = one_branch(8.0);
  PonTopology b;
  b.branches.push_back({2, 9.5, 0.8});

  const auto tr_both = synthesize_trace(both, cfg, {}, 3);
  const auto tr_a = synthesize_trace(a, cfg, {}, 3);
  const auto tr_b = synthesize_trace(b, cfg, {}, 3);
  for (std::size_t i = 0; i < tr_both.samples.size(); ++i) {
    const double sum = (tr_a.samples[i] - cfg.baseline_level) +
                       (tr_b.samples[i] - cfg.baseline_level);
    CHECK(tr_both.samples[i] - cfg.baseline_level == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("synthesize_trace: determinism and error paths") {
  OtdrConfig cfg;
  cfg.trace_len_samples = 200;
  const auto topo = one_branch(10.0);

  const auto t1 = synthesize_trace(topo, cfg, {}, 42);
  const auto t2 = synthesize_trace(topo, cfg, {}, 42);
  CHECK(t1.samples == t2.samples);  // bitwise

  SUBCASE("center outside the trace") {
    cfg.trace_len_samples = 30;
    CHECK_THROWS(synthesize_trace(topo, cfg, {}, 1));
  }
  SUBCASE("fault for an unknown branch") {
    CHECK_THROWS_AS(synthesize_trace(topo, cfg, {{9, 0.5}}, 1), std::invalid_argument);
  }
  SUBCASE("invalid topology") {
    PonTopology bad;
    bad.branches.push_back({1, 5.0, 1.0});
    bad.branches.push_back({1, 6.0, 1.0});  // duplicate id
    CHECK_THROWS_AS(synthesize_trace(bad, cfg, {}, 1), std::invalid_argument);
  }
}

TEST_CASE("add_awgn: sigma convention and determinism") {
  CHECK(awgn_sigma(1.0, 0.0) == doctest::Approx(1.0));
  CHECK(awgn_sigma(0.5, 20.0) == doctest::Approx(0.05));
  CHECK(awgn_sigma(1.0, 5.0) == doctest::Approx(0.5623413251903491));
  CHECK_THROWS_AS(awgn_sigma(0.0, 10.0), std::invalid_argument);
  CHECK_THROWS_AS(awgn_sigma(-1.0, 10.0), std::invalid_argument);

  std::vector<double> clean(100, 0.25);
  SUBCASE("infinite PSNR is the identity") {
    const auto out = add_awgn(clean, 1.0, std::numeric_limits<double>::infinity(), 5);
    CHECK(out == clean);
  }
  SUBCASE("same seed, same noise") {
    const auto a = add_awgn(clean, 1.0, 10.0, 5);
    const auto b = add_awgn(clean, 1.0, 10.0, 5);
    const auto c = add_awgn(clean, 1.0, 10.0, 6);
    CHECK(a == b);
    CHECK(a != c);
  }
}

TEST_CASE("add_awgn: sample statistics match the requested sigma") {
  const std::size_t n = 100000;
  std::vector<double> clean(n, 0.0);
  for (std::uint64_t seed : {11ULL, 12ULL, 13ULL}) {
    const double psnr = 14.0;
    const double target = awgn_sigma(0.8, psnr);
    const auto noisy = add_awgn(clean, 0.8, psnr, seed);
    double mean = std::accumulate(noisy.begin(), noisy.end(), 0.0) / n;
    double var = 0.0;
    for (double v : noisy) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / (n - 1));
    CHECK(std::abs(sd - target) < 0.05 * target);
    CHECK(std::abs(mean) < 3.0 * target / std::sqrt(static_cast<double>(n)));
  }
}

TEST_CASE("pulse_shape: unit peak, symmetric, truncated") {
  OtdrConfig cfg;
  CHECK(pulse_shape(0, cfg) == 1.0);
  CHECK(pulse_shape(3, cfg) == pulse_shape(-3, cfg));
  CHECK(pulse_shape(16, cfg) == 0.0);
  CHECK(pulse_shape(-16, cfg) == 0.0);
  // FWHM: value at half the pulse width in samples is 0.5
  CHECK(pulse_shape(0, cfg) / 2.0 ==
        doctest::Approx(std::exp(-0.5 * 2.5 * 2.5 /
                                 std::pow(5.0 / (2.0 * std::sqrt(2.0 * std::log(2.0))), 2)))
            .epsilon(1e-12));
}
