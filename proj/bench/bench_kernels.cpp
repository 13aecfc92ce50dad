// Serial reference vs OpenMP for the two data-parallel kernels: per-model
// trace aggregation and the backfill job-set sweep.

#include <random>

#include <benchmark/benchmark.h>

#include "hybridsim/batch.hpp"
#include "hybridsim/metrics.hpp"
#include "hybridsim/parallel.hpp"

using namespace hybridsim;

namespace {

std::vector<RequestRecord> synthetic_trace(std::size_t n, int models) {
    std::mt19937_64 rng(3);
    std::vector<RequestRecord> out(n);
    for (auto& r : out) {
        r.model = "m" + std::to_string(rng() % static_cast<unsigned>(models));
        r.outcome = Outcome::Completed;
        r.ttft_ms = static_cast<SimTime>(rng() % 5000);
        r.itl_ms = 1 + static_cast<SimTime>(rng() % 50);
        r.output_tokens = 1 + static_cast<Tokens>(rng() % 500);
        r.e2el_ms = r.ttft_ms + r.itl_ms * (r.output_tokens - 1);
    }
    return out;
}

void BM_AggregateSerial(benchmark::State& state) {
    const auto trace = synthetic_trace(static_cast<std::size_t>(state.range(0)), 16);
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_models_serial(trace));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_AggregateParallel(benchmark::State& state) {
    const auto trace = synthetic_trace(static_cast<std::size_t>(state.range(0)), 16);
    for (auto _ : state) benchmark::DoNotOptimize(aggregate_models(trace));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

// One job set on four nodes, decoded from its index: each job picks a node
// count in 1..4 and a walltime in {25, 50, 75}.
int backfill_case(std::size_t code) {
    BatchPlane p(NetworkFactorTable::defaults(), PathKind::HsnTcpSingle);
    for (int i = 0; i < 4; ++i) {
        Node n;
        n.id = "n" + std::to_string(i);
        n.gpus = 4;
        n.network_paths = {{PathKind::HsnTcpSingle, 1}};
        p.add_node(n);
    }
    for (int k = 0; k < 5; ++k) {
        BatchJob j;
        j.project_id = "p";
        j.nodes_requested = static_cast<int>(code % 4) + 1;
        j.walltime_estimate_ms = j.base_runtime_ms = 25 * (static_cast<SimTime>(code / 4 % 3) + 1);
        code /= 12;
        p.submit(j, 0);
    }
    SimTime t = 0;
    for (;;) {
        p.schedule_pass(t);
        SimTime next = INT64_MAX;
        for (const auto& [_, j] : p.jobs())
            if (j.state == JobState::Running) next = std::min(next, j.end_time);
        if (next == INT64_MAX) break;
        t = next;
        std::vector<JobId> ending;
        for (const auto& [id, j] : p.jobs())
            if (j.state == JobState::Running && j.end_time == t) ending.push_back(id);
        for (auto id : ending) p.complete(id, t);
    }
    return static_cast<int>(t);
}

void BM_BackfillSweepSerial(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sweep_serial(n, backfill_case));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_BackfillSweepParallel(benchmark::State& state) {
    const auto n = static_cast<std::size_t>(state.range(0));
    for (auto _ : state) benchmark::DoNotOptimize(sweep(n, backfill_case));
    state.SetItemsProcessed(state.iterations() * state.range(0));
}

}  // namespace

BENCHMARK(BM_AggregateSerial)->Arg(10'000)->Arg(200'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_AggregateParallel)->Arg(10'000)->Arg(200'000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackfillSweepSerial)->Arg(4'096)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_BackfillSweepParallel)->Arg(4'096)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
