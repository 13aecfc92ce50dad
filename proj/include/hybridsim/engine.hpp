#pragma once

// Deterministic discrete-event kernel: clock, (time, seq) ordered queue,
// seeded random streams and a replayable trace.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <queue>
#include <random>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

enum class EventKind {
    RequestArrival,
    RequestComplete,
    JobSubmit,
    JobStart,
    JobEnd,
    NodeTransitionStep,
    ScalePollTick,
    ReconcileTick,
    MaintenanceStart,
    MaintenanceEnd,
    ReplicaReady,
};

std::string_view to_string(EventKind k);

/// Kind-specific record. `subject` names the entity (request, job, node...),
/// `a` and `b` carry numeric arguments.
struct Payload {
    std::string subject;
    std::int64_t a = 0;
    std::int64_t b = 0;
};

struct Event {
    SimTime time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::RequestArrival;
    Payload payload;
};

struct TraceRecord {
    SimTime time = 0;
    std::uint64_t seq = 0;
    EventKind kind = EventKind::RequestArrival;
    std::uint64_t digest = 0;

    bool operator==(const TraceRecord&) const = default;
};

/// FNV-1a over the canonical payload encoding.
std::uint64_t payload_digest(const Payload& p);
std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL);

/// `time<TAB>seq<TAB>kind<TAB>digest` with the digest as 16 hex digits.
std::string format_trace_line(const TraceRecord& r);
void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace);

/// Random stream keyed by (seed, label).
class RngStream {
public:
    RngStream(std::uint64_t seed, std::string_view label);

    std::uint64_t next_u64() { return gen_(); }
    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
    /// Exponential with the given rate (events per unit).
    double exponential(double rate);
    /// Uniform integer on [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);

private:
    std::mt19937_64 gen_;
};

class Engine {
public:
    using Handler = std::function<void(const Event&)>;

    explicit Engine(std::uint64_t seed = 0) : seed_(seed) {}

    Engine(Engine&&) = default;
    Engine& operator=(Engine&&) = default;
    Engine(const Engine&) = delete;
    Engine& operator=(const Engine&) = delete;

    SimTime now() const { return clock_; }
    std::uint64_t seed() const { return seed_; }

    void set_handler(Handler h) { handler_ = std::move(h); }

    /// Enqueues an event and returns its sequence number. Throws
    /// SchedulingInPast when `time` precedes the clock.
    std::uint64_t schedule(SimTime time, EventKind kind, Payload payload = {});

    /// Cancelled events are dropped at dispatch and never traced.
    void cancel(std::uint64_t seq) {
        if (queued_.erase(seq) > 0) cancelled_.insert(seq);
    }

    /// Dispatches every event with time <= t, then sets the clock to t.
    /// Returns the trace segment produced by this call.
    std::vector<TraceRecord> run_until(SimTime t);

    std::size_t pending() const { return queued_.size(); }
    const std::vector<TraceRecord>& trace() const { return trace_; }

    RngStream rng_stream(std::string_view label) const { return RngStream(seed_, label); }

private:
    struct Later {
        bool operator()(const Event& x, const Event& y) const {
            return x.time != y.time ? x.time > y.time : x.seq > y.seq;
        }
    };

    std::uint64_t seed_ = 0;
    SimTime clock_ = 0;
    std::uint64_t next_seq_ = 0;
    std::priority_queue<Event, std::vector<Event>, Later> queue_;
    std::unordered_set<std::uint64_t> queued_;
    std::unordered_set<std::uint64_t> cancelled_;
    std::vector<TraceRecord> trace_;
    Handler handler_;
};

}  // namespace hybridsim
