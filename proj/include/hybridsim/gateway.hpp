#pragma once

// Governed model-serving front: API-key authentication, model allowlists,
// token-bucket rate limits, budget reservations, least-loaded routing, the
// latency model and an append-only usage ledger that balances exactly.

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "hybridsim/core.hpp"

namespace hybridsim {

enum class Outcome {
    Admitted,
    RejectedAuth,
    RejectedBudget,
    RejectedRate,
    RejectedModel,
    RejectedUnavailable,
    Completed,
};

std::string_view to_string(Outcome o);
Outcome parse_outcome(std::string_view s);
inline bool is_rejection(Outcome o) { return o != Outcome::Admitted && o != Outcome::Completed; }

struct InferenceRequest {
    std::string id;
    std::string api_key;
    std::string model;
    Tokens prompt_tokens = 1;
    Tokens max_tokens = 1;     // declared output ceiling, reserved at admission
    Tokens output_tokens = 1;  // actual, revealed at completion
    SimTime arrival = 0;
};

/// Token bucket with exact rational refill. One request token equals
/// `refill_den * 1000` units; every millisecond adds `refill_num` units.
class RateBucket {
public:
    explicit RateBucket(RateLimitSpec spec = {}, SimTime start = 0);

    void refill(SimTime now);
    bool has_token() const { return level_ >= unit(); }
    void consume() { level_ -= unit(); }
    /// Refill, then take one token if available.
    bool take(SimTime now);

    const RateLimitSpec& spec() const { return spec_; }
    /// Current level in whole tokens (fraction truncated).
    std::int64_t tokens() const { return level_ / unit(); }

private:
    std::int64_t unit() const { return spec_.refill_den * 1000; }
    std::int64_t cap() const { return spec_.capacity * unit(); }

    RateLimitSpec spec_;
    std::int64_t level_ = 0;
    SimTime last_ = 0;
};

/// Free-function form used by the property suites.
bool rate_take(RateBucket& bucket, SimTime now);

struct Latency {
    SimTime ttft_ms = 0;
    SimTime e2el_ms = 0;
    SimTime itl_ms = 0;
};

/// ttft = queue_wait + ttft_base + prompt x prefill; e2el = ttft + itl x (output - 1).
Latency compute_latency(const ModelProfile& profile, Tokens prompt_tokens, Tokens output_tokens,
                        SimTime queue_wait_ms, std::optional<SimTime> itl_override = std::nullopt);

/// ITL under load: itl x (1 + alpha x (in_flight - 1) / max_concurrent), with
/// alpha in thousandths. alpha = 0 leaves ITL occupancy-independent.
SimTime effective_itl(const ModelProfile& profile, int in_flight, std::int64_t alpha_permille);

struct ReplicaLoad {
    std::string replica_id;
    std::uint64_t instance = 0;
    int in_flight = 0;
    int max_concurrent = 1;
};

/// Least in-flight replica with a free slot, ties broken by replica id.
/// Returns nullopt when every replica is full (the request queues).
std::optional<std::size_t> route(std::span<const ReplicaLoad> replicas);

struct LedgerEntry {
    SimTime time = 0;
    std::string request_id;
    std::string project;
    std::string key;
    std::string model;
    Tokens prompt_tokens = 0;
    Tokens output_tokens = 0;
    Credits credits = 0;
};

struct ProjectTotals {
    std::int64_t requests = 0;
    Tokens prompt_tokens = 0;
    Tokens output_tokens = 0;
    Credits credits = 0;
};

struct BudgetState {
    Tokens initial = 0;
    Tokens remaining = 0;
    Tokens settled = 0;
    Tokens reserved = 0;
    Credits credit_initial = 0;
    Credits credit_remaining = 0;
    Credits credit_settled = 0;
    Credits credit_reserved = 0;
};

class Gateway {
public:
    Gateway(std::map<std::string, ModelProfile> catalog, std::vector<Project> projects, std::vector<ApiKey> keys);

    /// Checks key -> model -> rate -> budget; the first failure wins and no
    /// state changes. Admission takes one rate token and reserves
    /// prompt + max_tokens against the project (and key) budget.
    Outcome admit(const InferenceRequest& r, SimTime now);

    /// Replaces the reservation with actual consumption and appends to the
    /// ledger. Throws DoubleSettle on a second settlement.
    const LedgerEntry& settle(const std::string& request_id, Tokens output_tokens, SimTime now);

    /// Returns an unused reservation (request never served).
    void release(const std::string& request_id);

    const BudgetState& budget(const std::string& project) const { return budgets_.at(project); }
    const std::map<std::string, BudgetState>& budgets() const { return budgets_; }
    const std::vector<LedgerEntry>& ledger() const { return ledger_; }
    const std::map<std::string, ProjectTotals>& totals() const { return totals_; }
    /// Sum of outstanding reservations for a project, computed from the
    /// individual reservations rather than the running counter.
    Tokens outstanding(const std::string& project) const;

    const ModelProfile* profile(const std::string& model) const;
    const Project* project_for_key(const std::string& key) const;
    const std::map<std::string, Project>& projects() const { return projects_; }
    const RateBucket& bucket(const std::string& key) const { return buckets_.at(key); }

private:
    struct Reservation {
        std::string project;
        std::string key;
        std::string model;
        Tokens prompt_tokens = 0;
        Tokens tokens = 0;
        Credits credits = 0;
    };

    struct KeyUsage {
        Tokens settled = 0;
        Tokens reserved = 0;
    };

    std::map<std::string, ModelProfile> catalog_;
    std::map<std::string, Project> projects_;
    std::map<std::string, ApiKey> keys_;
    std::map<std::string, RateBucket> buckets_;
    std::map<std::string, BudgetState> budgets_;
    std::map<std::string, KeyUsage> key_usage_;
    std::map<std::string, Reservation> reservations_;
    std::set<std::string> settled_;
    std::vector<LedgerEntry> ledger_;
    std::map<std::string, ProjectTotals> totals_;
};

}  // namespace hybridsim
