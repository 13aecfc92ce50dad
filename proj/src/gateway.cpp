#include "hybridsim/gateway.hpp"

#include <algorithm>
#include <stdexcept>

#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(Outcome o) {
    switch (o) {
        case Outcome::Admitted: return "Admitted";
        case Outcome::RejectedAuth: return "RejectedAuth";
        case Outcome::RejectedBudget: return "RejectedBudget";
        case Outcome::RejectedRate: return "RejectedRate";
        case Outcome::RejectedModel: return "RejectedModel";
        case Outcome::RejectedUnavailable: return "RejectedUnavailable";
        case Outcome::Completed: return "Completed";
    }
    return "?";
}

Outcome parse_outcome(std::string_view s) {
    for (auto o : {Outcome::Admitted, Outcome::RejectedAuth, Outcome::RejectedBudget, Outcome::RejectedRate,
                   Outcome::RejectedModel, Outcome::RejectedUnavailable, Outcome::Completed})
        if (to_string(o) == s) return o;
    throw std::invalid_argument("unknown outcome '" + std::string(s) + "'");
}

RateBucket::RateBucket(RateLimitSpec spec, SimTime start) : spec_(spec), last_(start) { level_ = cap(); }

void RateBucket::refill(SimTime now) {
    if (now <= last_) return;
    const __int128 added = static_cast<__int128>(now - last_) * spec_.refill_num;
    const __int128 next = std::min<__int128>(static_cast<__int128>(level_) + added, cap());
    level_ = static_cast<std::int64_t>(next);
    last_ = now;
}

bool RateBucket::take(SimTime now) {
    refill(now);
    if (!has_token()) return false;
    consume();
    return true;
}

bool rate_take(RateBucket& bucket, SimTime now) { return bucket.take(now); }

Latency compute_latency(const ModelProfile& profile, Tokens prompt_tokens, Tokens output_tokens,
                        SimTime queue_wait_ms, std::optional<SimTime> itl_override) {
    const SimTime prefill = (prompt_tokens * profile.prefill_per_token_us + 500) / 1000;
    const SimTime itl = itl_override.value_or(profile.itl_ms);
    Latency l;
    l.itl_ms = itl;
    l.ttft_ms = queue_wait_ms + profile.ttft_base_ms + prefill;
    l.e2el_ms = l.ttft_ms + itl * std::max<Tokens>(output_tokens - 1, 0);
    return l;
}

SimTime effective_itl(const ModelProfile& profile, int in_flight, std::int64_t alpha_permille) {
    if (alpha_permille == 0 || in_flight <= 1) return profile.itl_ms;
    const std::int64_t extra =
        profile.itl_ms * alpha_permille * (in_flight - 1) / (1000LL * profile.max_concurrent);
    return profile.itl_ms + extra;
}

std::optional<std::size_t> route(std::span<const ReplicaLoad> replicas) {
    std::optional<std::size_t> best;
    for (std::size_t i = 0; i < replicas.size(); ++i) {
        const auto& r = replicas[i];
        if (r.in_flight >= r.max_concurrent) continue;
        if (!best) {
            best = i;
            continue;
        }
        const auto& b = replicas[*best];
        if (r.in_flight < b.in_flight || (r.in_flight == b.in_flight && r.replica_id < b.replica_id)) best = i;
    }
    return best;
}

Gateway::Gateway(std::map<std::string, ModelProfile> catalog, std::vector<Project> projects,
                 std::vector<ApiKey> keys)
    : catalog_(std::move(catalog)) {
    for (auto& p : projects) {
        BudgetState b;
        b.initial = b.remaining = p.token_budget;
        b.credit_initial = b.credit_remaining = p.credit_budget;
        budgets_[p.id] = b;
        totals_[p.id];
        projects_.emplace(p.id, std::move(p));
    }
    for (auto& k : keys) {
        if (!projects_.contains(k.project_id))
            throw std::invalid_argument("api key maps to unknown project " + k.project_id);
        if (keys_.contains(k.key)) throw std::invalid_argument("duplicate api key");
        buckets_.emplace(k.key, RateBucket(projects_.at(k.project_id).rate_limit, 0));
        key_usage_[k.key];
        keys_.emplace(k.key, std::move(k));
    }
}

const ModelProfile* Gateway::profile(const std::string& model) const {
    auto it = catalog_.find(model);
    return it == catalog_.end() ? nullptr : &it->second;
}

const Project* Gateway::project_for_key(const std::string& key) const {
    auto it = keys_.find(key);
    return it == keys_.end() ? nullptr : &projects_.at(it->second.project_id);
}

Outcome Gateway::admit(const InferenceRequest& r, SimTime now) {
    auto k = keys_.find(r.api_key);
    if (k == keys_.end() || (k->second.expiry && *k->second.expiry <= now)) return Outcome::RejectedAuth;
    const ApiKey& key = k->second;
    const Project& proj = projects_.at(key.project_id);

    const ModelProfile* prof = profile(r.model);
    if (!prof || !proj.allowed_models.contains(r.model)) return Outcome::RejectedModel;
    if (r.prompt_tokens < 1 || r.max_tokens < 1 || r.prompt_tokens + r.max_tokens > prof->max_context)
        return Outcome::RejectedModel;

    RateBucket& bucket = buckets_.at(key.key);
    bucket.refill(now);
    if (!bucket.has_token()) return Outcome::RejectedRate;

    const Tokens want = r.prompt_tokens + r.max_tokens;
    const Credits want_credits = token_cost(want, *prof);
    BudgetState& b = budgets_.at(proj.id);
    KeyUsage& ku = key_usage_.at(key.key);
    if (want > b.remaining || want_credits > b.credit_remaining) return Outcome::RejectedBudget;
    if (key.per_key_budget && ku.settled + ku.reserved + want > *key.per_key_budget) return Outcome::RejectedBudget;
    if (reservations_.contains(r.id) || settled_.contains(r.id))
        throw std::invalid_argument("duplicate request id " + r.id);

    bucket.consume();
    b.remaining -= want;
    b.reserved += want;
    b.credit_remaining -= want_credits;
    b.credit_reserved += want_credits;
    ku.reserved += want;
    reservations_.emplace(r.id, Reservation{proj.id, key.key, r.model, r.prompt_tokens, want, want_credits});
    return Outcome::Admitted;
}

const LedgerEntry& Gateway::settle(const std::string& request_id, Tokens output_tokens, SimTime now) {
    if (settled_.contains(request_id)) throw DoubleSettle("request " + request_id + " already settled");
    auto it = reservations_.find(request_id);
    if (it == reservations_.end()) throw std::invalid_argument("settle: request " + request_id + " was not admitted");
    const Reservation res = it->second;
    const Tokens used = res.prompt_tokens + output_tokens;
    if (output_tokens < 1 || used > res.tokens)
        throw std::invalid_argument("settle: output tokens outside the reservation for " + request_id);
    const Credits credits = token_cost(used, catalog_.at(res.model));

    BudgetState& b = budgets_.at(res.project);
    b.reserved -= res.tokens;
    b.settled += used;
    b.remaining += res.tokens - used;
    b.credit_reserved -= res.credits;
    b.credit_settled += credits;
    b.credit_remaining += res.credits - credits;
    KeyUsage& ku = key_usage_.at(res.key);
    ku.reserved -= res.tokens;
    ku.settled += used;

    reservations_.erase(it);
    settled_.insert(request_id);

    ProjectTotals& t = totals_[res.project];
    ++t.requests;
    t.prompt_tokens += res.prompt_tokens;
    t.output_tokens += output_tokens;
    t.credits += credits;

    ledger_.push_back({now, request_id, res.project, res.key, res.model, res.prompt_tokens, output_tokens, credits});
    return ledger_.back();
}

void Gateway::release(const std::string& request_id) {
    auto it = reservations_.find(request_id);
    if (it == reservations_.end()) return;
    const Reservation& res = it->second;
    BudgetState& b = budgets_.at(res.project);
    b.reserved -= res.tokens;
    b.remaining += res.tokens;
    b.credit_reserved -= res.credits;
    b.credit_remaining += res.credits;
    key_usage_.at(res.key).reserved -= res.tokens;
    reservations_.erase(it);
}

Tokens Gateway::outstanding(const std::string& project) const {
    Tokens sum = 0;
    for (const auto& [_, r] : reservations_)
        if (r.project == project) sum += r.tokens;
    return sum;
}

}  // namespace hybridsim
