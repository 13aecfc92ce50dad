#include "hybridsim/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace hybridsim {

namespace {
constexpr double kMsPerHour = 3'600'000.0;
}

bool TrafficProfile::valid() const {
    if (mean_qps < 0 || diurnal_amplitude < 0 || diurnal_amplitude > 1) return false;
    if (!prompt_len.valid() || !output_len.valid() || prompt_len.low < 1 || output_len.low < 1) return false;
    if (long_tail) {
        if (long_tail->probability < 0 || long_tail->probability > 1) return false;
        if (long_tail->low < 1 || long_tail->low > long_tail->high) return false;
    }
    return true;
}

Tokens TrafficProfile::max_output() const {
    Tokens m = output_len.high;
    if (long_tail && long_tail->probability > 0) m = std::max(m, long_tail->high);
    return m;
}

double TrafficProfile::rate_at(SimTime t) const {
    const double hours = static_cast<double>(t) / kMsPerHour;
    return mean_qps * (1.0 + diurnal_amplitude * std::cos(2.0 * std::numbers::pi * (hours - peak_hour) / 24.0));
}

std::vector<SimTime> gen_arrivals(const TrafficProfile& profile, SimTime horizon, RngStream& stream) {
    std::vector<SimTime> out;
    const double peak = profile.mean_qps * (1.0 + profile.diurnal_amplitude);
    if (peak <= 0.0) return out;
    double t_s = 0.0;
    for (;;) {
        t_s += stream.exponential(peak);
        const auto t_ms = static_cast<SimTime>(t_s * 1000.0);
        if (t_ms >= horizon) break;
        if (stream.uniform() * peak < profile.rate_at(t_ms)) out.push_back(t_ms);
    }
    return out;
}

Tokens sample_triangular(const LengthDist& d, RngStream& stream) {
    const double u = stream.uniform();
    if (d.low == d.high) return d.low;
    const double lo = static_cast<double>(d.low), hi = static_cast<double>(d.high), mo = static_cast<double>(d.mode);
    const double split = (mo - lo) / (hi - lo);
    const double x = u < split ? lo + std::sqrt(u * (hi - lo) * (mo - lo)) : hi - std::sqrt((1.0 - u) * (hi - lo) * (hi - mo));
    return std::clamp<Tokens>(std::llround(x), d.low, d.high);
}

std::pair<Tokens, Tokens> sample_lengths(const TrafficProfile& profile, RngStream& stream) {
    const Tokens prompt = sample_triangular(profile.prompt_len, stream);
    const bool tail = profile.long_tail && stream.uniform() < profile.long_tail->probability;
    Tokens output;
    if (tail)
        output = stream.uniform_int(profile.long_tail->low, profile.long_tail->high);
    else
        output = sample_triangular(profile.output_len, stream);
    return {prompt, output};
}

std::vector<FinetuneSubmission> gen_finetune_arrivals(double rate_per_day,
                                                      const std::vector<std::pair<std::string, double>>& mix,
                                                      SimTime horizon, RngStream& stream) {
    std::vector<FinetuneSubmission> out;
    double total = 0.0;
    for (const auto& [_, w] : mix) total += w;
    if (rate_per_day <= 0.0 || mix.empty() || total <= 0.0) return out;
    const double rate_per_ms = rate_per_day / (24.0 * kMsPerHour);
    double t = 0.0;
    for (;;) {
        t += stream.exponential(rate_per_ms);
        if (t >= static_cast<double>(horizon)) break;
        double pick = stream.uniform() * total;
        std::string chosen = mix.back().first;
        for (const auto& [id, w] : mix) {
            if (pick < w) {
                chosen = id;
                break;
            }
            pick -= w;
        }
        out.push_back({static_cast<SimTime>(t), chosen});
    }
    return out;
}

}  // namespace hybridsim
