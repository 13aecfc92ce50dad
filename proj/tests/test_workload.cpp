#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "hybridsim/workload.hpp"

using namespace hybridsim;

namespace {

constexpr SimTime kHour = 3'600'000;

TrafficProfile profile_70b() {
    TrafficProfile p;
    p.model = "llama-70b";
    p.mean_qps = 0.5;
    p.prompt_len = {100, 800, 300};
    p.output_len = {200, 500, 350};
    return p;
}

}  // namespace

TEST_CASE("homogeneous arrivals match Poisson counts") {
    auto p = profile_70b();
    p.mean_qps = 1.0;
    RngStream s(1, "arrivals");
    auto a = gen_arrivals(p, kHour, s);
    const double mean = 3600.0;
    CHECK(std::abs(static_cast<double>(a.size()) - mean) <= 4 * std::sqrt(mean));
    CHECK(std::is_sorted(a.begin(), a.end()));
    CHECK(a.back() < kHour);
}

TEST_CASE("full amplitude leaves the trough nearly empty") {
    auto p = profile_70b();
    p.mean_qps = 1.0;
    p.diurnal_amplitude = 1.0;
    RngStream s(2, "arrivals");
    auto a = gen_arrivals(p, 24 * kHour, s);
    // Trough is 12 h from the peak at 14:00; within +-30 min the rate stays under 0.02 x mean.
    const auto trough = std::count_if(a.begin(), a.end(),
                                      [](SimTime t) { return t >= 1 * kHour + kHour / 2 && t < 2 * kHour + kHour / 2; });
    CHECK(trough < 50);
}

TEST_CASE("peak to trough rate ratio") {
    auto p = profile_70b();
    p.mean_qps = 0.5;
    p.diurnal_amplitude = 0.5;
    RngStream s(3, "arrivals");
    auto a = gen_arrivals(p, 240 * kHour, s);
    // Hour-long bins centred on the peak and the trough.
    std::int64_t peak = 0, trough = 0;
    for (auto t : a) {
        const double h = std::fmod(static_cast<double>(t) / kHour, 24.0);
        if (h >= 13.5 && h < 14.5) ++peak;
        if (h >= 1.5 && h < 2.5) ++trough;
    }
    // Bin averages of 1 + a cos over +-0.5 h are (1 +- a k), k = sinc(1/24).
    const double k = std::sin(std::numbers::pi / 24) / (std::numbers::pi / 24);
    const double expected = (1 + 0.5 * k) / (1 - 0.5 * k);
    const double ratio = static_cast<double>(peak) / static_cast<double>(trough);
    CHECK(std::abs(ratio - expected) / expected < 0.10);
    CHECK(std::abs(ratio - 3.0) / 3.0 < 0.10);
}

TEST_CASE("generators are deterministic per stream") {
    auto p = profile_70b();
    RngStream a(7, "arrivals"), b(7, "arrivals");
    CHECK(gen_arrivals(p, kHour, a) == gen_arrivals(p, kHour, b));
}

TEST_CASE("70B lengths stay in the reported ranges") {
    auto p = profile_70b();
    RngStream s(4, "lengths");
    for (int i = 0; i < 100'000; ++i) {
        auto [prompt, out] = sample_lengths(p, s);
        REQUIRE(prompt >= 100);
        REQUIRE(prompt <= 800);
        REQUIRE(out >= 200);
        REQUIRE(out <= 500);
    }
}

TEST_CASE("8B long tail frequency") {
    TrafficProfile p;
    p.prompt_len = {100, 1000, 400};
    p.output_len = {100, 1000, 400};
    p.long_tail = LongTail{0.3, 3000, 4000};
    RngStream s(5, "lengths");
    int tail = 0;
    const int n = 10'000;
    for (int i = 0; i < n; ++i) {
        auto [prompt, out] = sample_lengths(p, s);
        REQUIRE(out >= 100);
        REQUIRE(out <= 4000);
        if (out >= 3000) ++tail;
    }
    // Binomial sd at n = 10^4 is about 0.0046; allow 4 sd.
    CHECK(std::abs(tail / static_cast<double>(n) - 0.3) < 0.019);
    CHECK(p.max_output() == 4000);
}

TEST_CASE("triangular samples: degenerate and mean") {
    RngStream s(6, "lengths");
    LengthDist k{77, 77, 77};
    for (int i = 0; i < 100; ++i) CHECK(sample_triangular(k, s) == 77);

    LengthDist d{100, 1000, 400};
    double sum = 0;
    const int n = 100'000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(sample_triangular(d, s));
    CHECK(std::abs(sum / n - d.mean()) < 3.0);
}

TEST_CASE("fine-tune arrivals") {
    RngStream s(8, "finetune");
    CHECK(gen_finetune_arrivals(0.0, {{"A", 1}}, 10 * 24 * kHour, s).empty());

    int total = 0;
    for (int seed = 0; seed < 20; ++seed) {
        RngStream r(static_cast<std::uint64_t>(seed), "finetune");
        const auto n = static_cast<int>(gen_finetune_arrivals(4.0, {{"A", 1}}, 10 * 24 * kHour, r).size());
        CHECK(std::abs(n - 40) <= 25);
        total += n;
    }
    CHECK(std::abs(total / 20.0 - 40.0) < 6.0);

    RngStream m(9, "finetune");
    auto subs = gen_finetune_arrivals(100.0, {{"A", 1}, {"B", 3}}, 10 * 24 * kHour, m);
    REQUIRE(subs.size() >= 900);
    const auto b = std::count_if(subs.begin(), subs.end(), [](const auto& x) { return x.recipe_id == "B"; });
    CHECK(std::abs(static_cast<double>(b) / static_cast<double>(subs.size()) - 0.75) < 0.05);
}

TEST_CASE("profile validation") {
    auto p = profile_70b();
    CHECK(p.valid());
    p.diurnal_amplitude = 1.5;
    CHECK_FALSE(p.valid());
    p = profile_70b();
    p.output_len = {500, 200, 300};
    CHECK_FALSE(p.valid());
}
