#include "hybridsim/elastic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "hybridsim/error.hpp"

namespace hybridsim {

std::string_view to_string(ScalingPolicy p) {
    switch (p) {
        case ScalingPolicy::Demand: return "demand";
        case ScalingPolicy::Schedule: return "schedule";
        case ScalingPolicy::Static: return "static";
    }
    return "?";
}

ScalingPolicy parse_policy(std::string_view s) {
    if (s == "demand") return ScalingPolicy::Demand;
    if (s == "schedule") return ScalingPolicy::Schedule;
    if (s == "static") return ScalingPolicy::Static;
    throw std::invalid_argument("unknown scaling policy '" + std::string(s) + "'");
}

std::string_view to_string(ActionKind k) {
    switch (k) {
        case ActionKind::Acquire: return "AcquireNode";
        case ActionKind::Release: return "ReleaseNode";
        case ActionKind::None: return "None";
    }
    return "?";
}

int baseline_floor(std::span<const ModelProfile> hot_models, const Node& node_template) {
    std::vector<int> demand;
    for (const auto& m : hot_models) {
        if (m.gpus_required > node_template.gpus)
            throw InfeasibleProfile("model " + m.name + " needs " + std::to_string(m.gpus_required) +
                                    " GPUs; nodes have " + std::to_string(node_template.gpus));
        demand.push_back(m.gpus_required);
    }
    std::sort(demand.begin(), demand.end(), std::greater<>());
    std::vector<int> free_gpus;
    for (int d : demand) {
        auto bin = std::find_if(free_gpus.begin(), free_gpus.end(), [d](int f) { return f >= d; });
        if (bin == free_gpus.end())
            free_gpus.push_back(node_template.gpus - d);
        else
            *bin -= d;
    }
    const int ffd = static_cast<int>(free_gpus.size());

    // First-fit decreasing is an upper bound; confirm no smaller count packs.
    const int total = std::accumulate(demand.begin(), demand.end(), 0);
    const int lower = node_template.gpus > 0 ? (total + node_template.gpus - 1) / node_template.gpus : 0;
    for (int k = lower; k < ffd; ++k) {
        std::vector<int> bins(static_cast<std::size_t>(k), node_template.gpus);
        auto place = [&](auto& self, std::size_t i) -> bool {
            if (i == demand.size()) return true;
            for (std::size_t b = 0; b < bins.size(); ++b) {
                if (bins[b] < demand[i]) continue;
                // Equal remaining capacity means an identical subtree.
                bool seen = false;
                for (std::size_t c = 0; c < b && !seen; ++c) seen = bins[c] == bins[b];
                if (seen) continue;
                bins[b] -= demand[i];
                if (self(self, i + 1)) return true;
                bins[b] += demand[i];
            }
            return false;
        };
        if (place(place, 0)) return k;
    }
    return ffd;
}

int scheduled_target(const ElasticConfig& config, SimTime now) {
    const int hi = config.baseline_nodes + config.delta_max;
    if (config.schedule.empty()) return config.baseline_nodes;
    const int hour = static_cast<int>((now / 3'600'000) % 24);
    int target = config.schedule.back().second;  // wraps from the previous day
    for (const auto& [h, n] : config.schedule)
        if (h <= hour) target = n;
    return std::clamp(target, config.baseline_nodes, hi);
}

Decision decide(const WindowStats& stats, const ElasticConfig& config, const ElasticState& state, SimTime now) {
    Decision d;
    d.next = state;
    const bool up = stats.mean_queue_wait_ms > config.scale_up_threshold_ms || stats.pending_replicas > 0;
    const bool down = stats.utilization < config.scale_down_threshold;
    d.next.up_streak = up ? state.up_streak + 1 : 0;
    d.next.down_streak = down ? state.down_streak + 1 : 0;
    d.up_streak = d.next.up_streak;
    d.down_streak = d.next.down_streak;

    const bool cooled = !state.last_action || now - *state.last_action >= config.cooldown_ms;
    const int ceiling = config.baseline_nodes + config.delta_max;

    auto act = [&](ActionKind k, std::string reason) {
        d.kind = k;
        d.reason = std::move(reason);
        d.next.last_action = now;
        d.next.up_streak = 0;
        d.next.down_streak = 0;
        d.next.current_nodes += k == ActionKind::Acquire ? 1 : -1;
    };
    auto none = [&](std::string reason) {
        d.kind = ActionKind::None;
        d.reason = std::move(reason);
        return d;
    };

    switch (config.policy) {
        case ScalingPolicy::Static: return none("static");
        case ScalingPolicy::Schedule: {
            const int target = scheduled_target(config, now);
            if (state.current_nodes < target) {
                if (!cooled) return none("cooldown");
                act(ActionKind::Acquire, "schedule");
                return d;
            }
            if (state.current_nodes > target) {
                if (state.current_nodes <= config.baseline_nodes) return none("baseline floor");
                if (!cooled) return none("cooldown");
                act(ActionKind::Release, "schedule");
                return d;
            }
            return none("on schedule");
        }
        case ScalingPolicy::Demand: break;
    }

    if (d.next.up_streak >= config.consecutive_windows) {
        if (state.current_nodes >= ceiling) return none("ceiling");
        if (!cooled) return none("cooldown");
        act(ActionKind::Acquire, stats.pending_replicas > 0 ? "pending replicas" : "queue wait");
    } else if (d.next.down_streak >= config.consecutive_windows) {
        if (state.current_nodes <= config.baseline_nodes) return none("baseline floor");
        if (!cooled) return none("cooldown");
        act(ActionKind::Release, "low utilization");
    } else {
        none(up || down ? "streak" : "steady");
    }
    return d;
}

std::optional<std::string> choose_acquire(std::span<const AcquireCandidate> candidates) {
    const AcquireCandidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!best) {
            best = &c;
            continue;
        }
        auto key = [](const AcquireCandidate& x) { return std::tuple(!x.idle, x.idle ? 0 : x.busy_until, x.node_id); };
        if (key(c) < key(*best)) best = &c;
    }
    if (!best) return std::nullopt;
    return best->node_id;
}

ElasticManager::ElasticManager(ElasticConfig config) : config_(std::move(config)) {
    state_.current_nodes = config_.baseline_nodes;
}

Decision ElasticManager::poll(const WindowStats& stats, SimTime now) {
    before_poll_ = state_;
    Decision d = decide(stats, config_, state_, now);
    state_ = d.next;
    last_ = d;
    log_.push_back({now, stats, ScalingAction{now, d.kind, {}, d.reason}});
    return d;
}

void ElasticManager::note_acquired(const std::string& node_id, SimTime now) {
    acquired_.push_back(node_id);
    ScalingAction a{now, ActionKind::Acquire, node_id, log_.empty() ? "" : log_.back().action.reason};
    if (!log_.empty()) log_.back().action = a;
    actions_.push_back(a);
}

void ElasticManager::note_released(const std::string& node_id, SimTime now) {
    std::erase(acquired_, node_id);
    ScalingAction a{now, ActionKind::Release, node_id, log_.empty() ? "" : log_.back().action.reason};
    if (!log_.empty()) log_.back().action = a;
    actions_.push_back(a);
}

void ElasticManager::note_unapplied(const std::string& reason, SimTime now) {
    state_ = before_poll_;
    // Keep the evidence so the next window retries immediately.
    state_.up_streak = last_.up_streak;
    state_.down_streak = last_.down_streak;
    if (!log_.empty()) log_.back().action = ScalingAction{now, ActionKind::None, {}, reason};
}

std::optional<std::string> ElasticManager::release_candidate() const {
    if (acquired_.empty()) return std::nullopt;
    return acquired_.back();
}

}  // namespace hybridsim
