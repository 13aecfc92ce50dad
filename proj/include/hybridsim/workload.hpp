#pragma once

// Seeded workload generators: diurnal inference traffic, per-model length
// distributions and fine-tuning submissions.

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hybridsim/core.hpp"
#include "hybridsim/engine.hpp"

namespace hybridsim {

/// Bounded triangular distribution over integers.
struct LengthDist {
    Tokens low = 1;
    Tokens high = 1;
    Tokens mode = 1;

    bool valid() const { return low <= mode && mode <= high && low >= 0; }
    double mean() const { return static_cast<double>(low + high + mode) / 3.0; }
};

struct LongTail {
    double probability = 0.0;
    Tokens low = 1;
    Tokens high = 1;
};

struct TrafficProfile {
    std::string model;
    std::string api_key;
    double mean_qps = 0.0;
    double diurnal_amplitude = 0.0;
    double peak_hour = 14.0;
    LengthDist prompt_len;
    LengthDist output_len;
    std::optional<LongTail> long_tail;

    bool valid() const;
    /// Declared output ceiling: the largest length the profile can produce.
    Tokens max_output() const;
    double rate_at(SimTime t) const;
};

/// Inhomogeneous Poisson arrivals by thinning, rate
/// mean_qps x (1 + amplitude x cos(2 pi (t - peak) / 24 h)).
std::vector<SimTime> gen_arrivals(const TrafficProfile& profile, SimTime horizon, RngStream& stream);

/// Triangular integer sample clamped to the distribution bounds.
Tokens sample_triangular(const LengthDist& d, RngStream& stream);

/// (prompt_tokens, output_tokens); with the tail probability the output is
/// drawn uniformly from the tail range instead.
std::pair<Tokens, Tokens> sample_lengths(const TrafficProfile& profile, RngStream& stream);

struct FinetuneSubmission {
    SimTime time = 0;
    std::string recipe_id;
};

/// Poisson submissions at `rate_per_day`; recipes drawn from the weighted mix.
std::vector<FinetuneSubmission> gen_finetune_arrivals(double rate_per_day,
                                                      const std::vector<std::pair<std::string, double>>& mix,
                                                      SimTime horizon, RngStream& stream);

}  // namespace hybridsim
