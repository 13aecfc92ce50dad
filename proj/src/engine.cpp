#include "hybridsim/engine.hpp"

#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <ostream>

#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(EventKind k) {
    switch (k) {
        case EventKind::RequestArrival: return "RequestArrival";
        case EventKind::RequestComplete: return "RequestComplete";
        case EventKind::JobSubmit: return "JobSubmit";
        case EventKind::JobStart: return "JobStart";
        case EventKind::JobEnd: return "JobEnd";
        case EventKind::NodeTransitionStep: return "NodeTransitionStep";
        case EventKind::ScalePollTick: return "ScalePollTick";
        case EventKind::ReconcileTick: return "ReconcileTick";
        case EventKind::MaintenanceStart: return "MaintenanceStart";
        case EventKind::MaintenanceEnd: return "MaintenanceEnd";
        case EventKind::ReplicaReady: return "ReplicaReady";
    }
    return "?";
}

std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::uint64_t payload_digest(const Payload& p) {
    std::string canon = p.subject;
    canon += '\x1f';
    canon += std::to_string(p.a);
    canon += '\x1f';
    canon += std::to_string(p.b);
    return fnv1a(canon);
}

std::string format_trace_line(const TraceRecord& r) {
    char digest[17];
    std::snprintf(digest, sizeof digest, "%016" PRIx64, r.digest);
    std::string line = std::to_string(r.time);
    line += '\t';
    line += std::to_string(r.seq);
    line += '\t';
    line += to_string(r.kind);
    line += '\t';
    line += digest;
    return line;
}

void write_trace(std::ostream& out, const std::vector<TraceRecord>& trace) {
    for (const auto& r : trace) out << format_trace_line(r) << '\n';
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

RngStream::RngStream(std::uint64_t seed, std::string_view label)
    : gen_(splitmix64(seed ^ splitmix64(fnv1a(label)))) {}

double RngStream::exponential(double rate) {
    return -std::log1p(-uniform()) / rate;
}

std::int64_t RngStream::uniform_int(std::int64_t lo, std::int64_t hi) {
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    if (span == 0) return static_cast<std::int64_t>(next_u64());
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return lo + static_cast<std::int64_t>(x % span);
}

std::uint64_t Engine::schedule(SimTime time, EventKind kind, Payload payload) {
    if (time < clock_)
        throw SchedulingInPast("event " + std::string(to_string(kind)) + " at t=" + std::to_string(time) +
                               " precedes clock " + std::to_string(clock_));
    const auto seq = next_seq_++;
    queue_.push(Event{time, seq, kind, std::move(payload)});
    queued_.insert(seq);
    return seq;
}

std::vector<TraceRecord> Engine::run_until(SimTime t) {
    std::vector<TraceRecord> segment;
    if (t < clock_) return segment;
    while (!queue_.empty() && queue_.top().time <= t) {
        Event ev = queue_.top();
        queue_.pop();
        if (cancelled_.erase(ev.seq) > 0) continue;
        queued_.erase(ev.seq);
        clock_ = ev.time;
        TraceRecord rec{ev.time, ev.seq, ev.kind, payload_digest(ev.payload)};
        trace_.push_back(rec);
        segment.push_back(rec);
        if (handler_) handler_(ev);
    }
    clock_ = t;
    return segment;
}

}  // namespace hybridsim
