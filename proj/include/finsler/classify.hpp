#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "finsler/conformal.hpp"
#include "finsler/metricfile.hpp"

namespace finsler {

inline constexpr const char* kToolVersion = "1.0.0";

// Deterministic rejection sampler: points are drawn uniformly from `box` with
// a fixed-seed generator and kept when they satisfy the metric's domain
// predicate and every evaluation guard (frame non-degeneracy, admissibility of
// the rescaling).  Sampling is single-threaded so the kept set depends only on
// (box, count, seed).
struct SamplePlan {
    std::array<std::array<double, 2>, 4> box{{{-0.5, 0.5}, {-0.5, 0.5}, {0.3, 1.5}, {0.3, 1.5}}};
    int count = 100;
    std::uint64_t seed = 1;
    int max_attempt_factor = 1000;  // attempts allowed = factor * count
};

// Aggregate of one named check over the sample.  Identity checks assert an
// equation that must hold for every metric; their verdict is
// max_normalized < threshold.  Classification checks report a property of
// this particular metric (Berwald, flat, metrizable, ...) the same way, but
// a false verdict is an outcome, not a failure.
struct CheckResult {
    std::string id;
    std::string summary;
    bool classification = false;
    double threshold = 0;
    int points = 0;  // points that were applicable and evaluated cleanly
    double max_raw = 0;
    double max_normalized = 0;
    double mean_normalized = 0;
    bool verdict = false;
    std::vector<std::string> errors;  // first few per-point failures
    std::vector<std::string> notes;   // e.g. "vacuous: hypothesis never held"
};

struct ClassificationReport {
    std::string metric;
    bool rescaled = false;
    std::string suite;
    int degree = 0;
    std::uint64_t seed = 0;
    int requested = 0;
    int sampled = 0;
    long attempts = 0;
    int base_eps = 0;  // signature sign of the base metric over the sample
    int bar_eps = 0;   // signature sign of the rescaled metric; 0 = absent or mixed
    std::vector<CheckResult> checks;

    bool identities_pass() const;  // every non-classification verdict holds
    std::string to_json() const;   // deterministic: no timestamps, fixed order
    std::string to_text() const;
};

// Thresholds applied to the three kinds of checks.  A value <= 0 keeps the
// kind's default (identity 1e-8, oracle 1e-7, classification 1e-6).
struct Tolerances {
    double identity = 0;
    double oracle = 0;
    double classify = 0;
};

// Draw plan.count admissible points for the lowered metric definition.
// Throws Error when the attempt budget is exhausted before count points are
// found.  `attempts_out`, when non-null, receives the number of draws used.
std::vector<Point4> sample_points(const Surface& surf, const Conformal* conf,
                                  const MetricDef::Lowered& low, const SamplePlan& plan,
                                  long* attempts_out = nullptr, int budget = kDefaultBudget);

// Box to sample from: the definition's own box when present, else the
// SamplePlan default.
std::array<std::array<double, 2>, 4> box_for(const MetricDef& def);

// Run a named suite of checks over a deterministic sample.
//   suite: "identities" | "oracle" | "classify" | "full"
// Throws Error on an unknown suite name or when no viable points exist.
// Point evaluation is parallel (FINSLER2D_THREADS overrides the thread
// count); aggregation order is fixed, so reports are byte-identical across
// runs and thread counts.
ClassificationReport run_suite(const MetricDef& def, const SamplePlan& plan,
                               const std::string& suite, const Tolerances& tol = {},
                               int degree = kDefaultBudget);

} // namespace finsler
