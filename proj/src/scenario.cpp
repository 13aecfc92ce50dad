#include "hybridsim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hybridsim/error.hpp"

namespace hybridsim {

using nlohmann::json;

namespace {

template <class T>
bool holds(const json& v) {
    if constexpr (std::is_same_v<T, bool>)
        return v.is_boolean();
    else if constexpr (std::is_integral_v<T>)
        return v.is_number_integer();
    else if constexpr (std::is_floating_point_v<T>)
        return v.is_number();
    else if constexpr (std::is_same_v<T, std::string>)
        return v.is_string();
    else
        return false;
}

template <class T>
constexpr const char* type_name() {
    if constexpr (std::is_same_v<T, bool>)
        return "boolean";
    else if constexpr (std::is_integral_v<T>)
        return "integer";
    else if constexpr (std::is_floating_point_v<T>)
        return "number";
    else
        return "string";
}

// Collects every problem instead of stopping at the first.
class Reader {
public:
    std::vector<std::string> problems;

    void fail(const std::string& path, const std::string& what) { problems.push_back(path + ": " + what); }

    static std::string at(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : path + "." + std::string(key);
    }
    static std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

    bool object(const json& v, const std::string& path) {
        if (v.is_object()) return true;
        fail(path, "expected an object");
        return false;
    }

    bool array(const json& v, const std::string& path) {
        if (v.is_array()) return true;
        fail(path, "expected an array");
        return false;
    }

    void known(const json& o, const std::string& path, std::initializer_list<std::string_view> keys) {
        if (!o.is_object()) return;
        for (const auto& [k, _] : o.items())
            if (std::find(keys.begin(), keys.end(), k) == keys.end()) fail(at(path, k), "unknown field");
    }

    template <class T>
    std::optional<T> maybe(const json& o, const std::string& path, std::string_view key) {
        if (!o.is_object()) return std::nullopt;
        auto it = o.find(key);
        if (it == o.end() || it->is_null()) return std::nullopt;
        if (!holds<T>(*it)) {
            fail(at(path, key), std::string("expected ") + type_name<T>());
            return std::nullopt;
        }
        return it->template get<T>();
    }

    template <class T>
    T get(const json& o, const std::string& path, std::string_view key, T fallback) {
        return maybe<T>(o, path, key).value_or(std::move(fallback));
    }

    template <class T>
    T need(const json& o, const std::string& path, std::string_view key) {
        if (o.is_object() && (!o.contains(key) || o.at(key).is_null())) {
            fail(at(path, key), "required");
            return T{};
        }
        return maybe<T>(o, path, key).value_or(T{});
    }

    std::set<std::string> strings(const json& o, const std::string& path, std::string_view key) {
        std::set<std::string> out;
        if (!o.is_object() || !o.contains(key)) return out;
        const auto p = at(path, key);
        if (!array(o.at(key), p)) return out;
        for (std::size_t i = 0; i < o.at(key).size(); ++i) {
            const auto& v = o.at(key)[i];
            if (v.is_string())
                out.insert(v.get<std::string>());
            else
                fail(at(p, i), "expected string");
        }
        return out;
    }

    const json& list(const json& o, const std::string& path, std::string_view key) {
        static const json empty = json::array();
        if (!o.is_object() || !o.contains(key)) return empty;
        return array(o.at(key), at(path, key)) ? o.at(key) : empty;
    }

    const json& sub(const json& o, const std::string& path, std::string_view key) {
        static const json empty = json::object();
        if (!o.is_object() || !o.contains(key)) return empty;
        return object(o.at(key), at(path, key)) ? o.at(key) : empty;
    }

    template <class E, class Parse>
    std::optional<E> choice(const json& o, const std::string& path, std::string_view key, Parse parse) {
        auto s = maybe<std::string>(o, path, key);
        if (!s) return std::nullopt;
        try {
            return parse(*s);
        } catch (const std::invalid_argument& e) {
            fail(at(path, key), e.what());
            return std::nullopt;
        }
    }
};

std::optional<NodeState> parse_state(const std::string& s) {
    if (s == "detached") return NodeState::detached();
    if (s == "batch") return NodeState::batch();
    if (s == "maintenance") return NodeState::maintenance();
    if (s.starts_with("service:") && s.size() > 8) return NodeState::service(s.substr(8));
    return std::nullopt;
}

Node parse_node(Reader& r, const json& o, const std::string& path, std::string id) {
    r.known(o, path,
            {"id", "id_prefix", "count", "first", "width", "flavour", "gpus", "gpu_mem_gb", "cpu_cores",
             "network_paths", "labels", "taints", "cached_models", "state"});
    Node n;
    n.id = std::move(id);
    n.flavour = r.choice<NodeFlavour>(o, path, "flavour", parse_flavour).value_or(NodeFlavour::HpcDiskless);
    n.gpus = r.get<int>(o, path, "gpus", 0);
    n.gpu_mem_gb = r.get<double>(o, path, "gpu_mem_gb", 0.0);
    n.cpu_cores = r.get<int>(o, path, "cpu_cores", 0);
    if (n.gpus < 0) r.fail(Reader::at(path, "gpus"), "must be >= 0");
    if (n.gpus > 0 && n.gpu_mem_gb <= 0) r.fail(Reader::at(path, "gpu_mem_gb"), "must be > 0 when gpus > 0");

    const auto& paths = r.list(o, path, "network_paths");
    for (std::size_t i = 0; i < paths.size(); ++i) {
        const auto p = Reader::at(Reader::at(path, "network_paths"), i);
        if (!r.object(paths[i], p)) continue;
        r.known(paths[i], p, {"kind", "lanes"});
        auto kind = r.choice<PathKind>(paths[i], p, "kind", parse_path_kind);
        if (!kind) {
            if (!paths[i].contains("kind")) r.fail(Reader::at(p, "kind"), "required");
            continue;
        }
        NetworkPath np{*kind, r.get<int>(paths[i], p, "lanes", *kind == PathKind::HsnTcpMulti ? 4 : 1)};
        if (!np.valid()) r.fail(Reader::at(p, "lanes"), "invalid lane count for " + std::string(to_string(*kind)));
        n.network_paths.push_back(np);
    }

    n.labels = r.strings(o, path, "labels");
    n.taints = r.strings(o, path, "taints");
    for (const auto& l : n.labels)
        if (!valid_label(l)) r.fail(Reader::at(path, "labels"), "malformed label '" + l + "'");
    for (const auto& t : n.taints)
        if (!valid_label(t)) r.fail(Reader::at(path, "taints"), "malformed taint '" + t + "'");

    const auto& cached = r.sub(o, path, "cached_models");
    for (const auto& [model, gb] : cached.items()) {
        if (!gb.is_number() || gb.get<double>() < 0)
            r.fail(Reader::at(Reader::at(path, "cached_models"), model), "expected a non-negative number");
        else
            n.cached_models[model] = gb.get<double>();
    }

    if (auto s = r.maybe<std::string>(o, path, "state")) {
        if (auto st = parse_state(*s))
            n.state = *st;
        else
            r.fail(Reader::at(path, "state"), "expected detached, batch, maintenance or service:<cluster>");
    }
    return n;
}

LengthDist parse_length(Reader& r, const json& o, const std::string& path) {
    r.known(o, path, {"low", "high", "mode"});
    LengthDist d;
    d.low = r.need<Tokens>(o, path, "low");
    d.high = r.need<Tokens>(o, path, "high");
    d.mode = r.get<Tokens>(o, path, "mode", (d.low + d.high) / 2);
    if (!d.valid()) r.fail(path, "need 0 <= low <= mode <= high");
    return d;
}

TransitionSpec parse_durations(Reader& r, const json& o, const std::string& path, TransitionSpec base) {
    base.drain_ms = r.get<SimTime>(o, path, "drain_ms", base.drain_ms);
    base.reboot_ms = r.get<SimTime>(o, path, "reboot_ms", base.reboot_ms);
    base.join_ms = r.get<SimTime>(o, path, "join_ms", base.join_ms);
    base.detach_ms = r.get<SimTime>(o, path, "detach_ms", base.detach_ms);
    for (auto [k, v] : {std::pair{"drain_ms", base.drain_ms}, {"reboot_ms", base.reboot_ms},
                        {"join_ms", base.join_ms}, {"detach_ms", base.detach_ms}})
        if (v < 0) r.fail(Reader::at(path, k), "must be >= 0");
    return base;
}

json read_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError({path.string() + ": cannot open"});
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError({path.string() + ": " + e.what()});
    }
}

json load_layered(const std::filesystem::path& path, int depth) {
    if (depth > 8) throw ConfigError({path.string() + ": extends chain too deep"});
    json doc = read_json(path);
    if (!doc.is_object()) throw ConfigError({path.string() + ": top level must be an object"});
    if (!doc.contains("extends")) return doc;
    if (!doc["extends"].is_string()) throw ConfigError({"extends: expected string"});
    json base = load_layered(path.parent_path() / doc["extends"].get<std::string>(), depth + 1);
    doc.erase("extends");
    base.merge_patch(doc);
    return base;
}

}  // namespace

std::vector<ModelProfile> Scenario::hot_models() const {
    std::vector<ModelProfile> out;
    for (const auto& [_, m] : models)
        if (m.hot) out.push_back(m);
    return out;
}

json load_scenario_document(const std::filesystem::path& path) { return load_layered(path, 0); }

Scenario load_scenario(const std::filesystem::path& path) {
    Scenario s = parse_scenario(load_scenario_document(path));
    if (s.request_trace && s.request_trace->is_relative()) s.request_trace = path.parent_path() / *s.request_trace;
    return s;
}

Scenario parse_scenario(const json& doc) {
    Reader r;
    Scenario s;
    if (!r.object(doc, "(root)")) throw ConfigError(r.problems);
    r.known(doc, "",
            {"name", "seed", "horizon_ms", "node_template", "nodes", "models", "projects", "api_keys", "traffic",
             "request_trace", "deployments", "deployment_updates", "sandboxes", "service", "batch", "finetune",
             "elastic", "lifecycle", "maintenance", "failures", "gateway", "slo", "notes"});

    s.name = r.get<std::string>(doc, "", "name", "unnamed");
    s.seed = r.need<std::uint64_t>(doc, "", "seed");
    s.horizon_ms = r.need<SimTime>(doc, "", "horizon_ms");
    if (doc.contains("horizon_ms") && s.horizon_ms <= 0) r.fail("horizon_ms", "must be > 0");

    // Nodes: each entry is merged over node_template; id_prefix + count expands.
    const json tmpl = doc.contains("node_template") ? doc["node_template"] : json::object();
    std::set<std::string> node_ids;
    const auto& nodes = r.list(doc, "", "nodes");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        const auto p = Reader::at("nodes", i);
        if (!r.object(nodes[i], p)) continue;
        json entry = tmpl;
        entry.merge_patch(nodes[i]);
        std::vector<std::string> ids;
        if (auto id = r.maybe<std::string>(nodes[i], p, "id")) {
            ids.push_back(*id);
        } else if (auto prefix = r.maybe<std::string>(nodes[i], p, "id_prefix")) {
            const int count = r.need<int>(nodes[i], p, "count");
            const int first = r.get<int>(nodes[i], p, "first", 1);
            const int width = r.get<int>(nodes[i], p, "width", 3);
            for (int k = 0; k < count; ++k) {
                auto num = std::to_string(first + k);
                if (static_cast<int>(num.size()) < width) num.insert(0, static_cast<std::size_t>(width) - num.size(), '0');
                ids.push_back(*prefix + num);
            }
        } else {
            r.fail(p, "needs id or id_prefix + count");
        }
        for (auto& id : ids) {
            if (!node_ids.insert(id).second) r.fail(Reader::at(p, "id"), "duplicate node id " + id);
            s.nodes.push_back(parse_node(r, entry, p, id));
        }
    }

    const auto& models = r.list(doc, "", "models");
    for (std::size_t i = 0; i < models.size(); ++i) {
        const auto p = Reader::at("models", i);
        const auto& o = models[i];
        if (!r.object(o, p)) continue;
        r.known(o, p,
                {"name", "params_b", "weights_gb", "gpus_required", "max_concurrent", "ttft_base_ms",
                 "prefill_per_token_ms", "itl_ms", "cost_per_1k_tokens", "hot", "max_context"});
        ModelProfile m;
        m.name = r.need<std::string>(o, p, "name");
        m.params_b = r.get<double>(o, p, "params_b", 0.0);
        m.weights_gb = r.need<double>(o, p, "weights_gb");
        m.gpus_required = r.get<int>(o, p, "gpus_required", 1);
        m.max_concurrent = r.get<int>(o, p, "max_concurrent", 1);
        m.ttft_base_ms = r.get<SimTime>(o, p, "ttft_base_ms", 0);
        m.prefill_per_token_us = std::llround(r.get<double>(o, p, "prefill_per_token_ms", 0.0) * 1000.0);
        m.itl_ms = r.need<SimTime>(o, p, "itl_ms");
        m.cost_per_1k_millicredits = credits_to_millicredits(r.get<double>(o, p, "cost_per_1k_tokens", 0.0));
        m.hot = r.get<bool>(o, p, "hot", false);
        m.max_context = r.get<Tokens>(o, p, "max_context", 4096);
        if (!m.valid()) r.fail(p, "needs gpus_required >= 1, itl_ms > 0, max_concurrent >= 1, weights_gb > 0");
        if (m.ttft_base_ms < 0 || m.prefill_per_token_us < 0) r.fail(p, "latency parameters must be >= 0");
        if (!m.name.empty() && !s.models.emplace(m.name, m).second) r.fail(Reader::at(p, "name"), "duplicate model " + m.name);
    }
    auto model_ref = [&](const std::string& path, const std::string& name) {
        if (!s.models.contains(name)) r.fail(path, "unknown model '" + name + "'");
    };

    const auto& projects = r.list(doc, "", "projects");
    std::set<std::string> project_ids;
    for (std::size_t i = 0; i < projects.size(); ++i) {
        const auto p = Reader::at("projects", i);
        const auto& o = projects[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"id", "members", "token_budget", "credit_budget", "rate_limit", "allowed_models"});
        Project pr;
        pr.id = r.need<std::string>(o, p, "id");
        pr.members = r.strings(o, p, "members");
        pr.token_budget = r.get<Tokens>(o, p, "token_budget", 0);
        pr.credit_budget = r.get<Credits>(o, p, "credit_budget", 0);
        if (pr.token_budget < 0) r.fail(Reader::at(p, "token_budget"), "must be >= 0");
        if (pr.credit_budget < 0) r.fail(Reader::at(p, "credit_budget"), "must be >= 0");
        const auto rp = Reader::at(p, "rate_limit");
        const auto& rl = r.sub(o, p, "rate_limit");
        r.known(rl, rp, {"capacity", "refill_per_s"});
        const auto cap = r.get<std::int64_t>(rl, rp, "capacity", 1);
        const auto refill = r.get<double>(rl, rp, "refill_per_s", 1.0);
        if (cap < 1) r.fail(Reader::at(rp, "capacity"), "must be >= 1");
        if (refill <= 0) r.fail(Reader::at(rp, "refill_per_s"), "must be > 0");
        if (cap >= 1 && refill > 0) pr.rate_limit = RateLimitSpec::from_rate(cap, refill);
        pr.allowed_models = r.strings(o, p, "allowed_models");
        for (const auto& m : pr.allowed_models) model_ref(Reader::at(p, "allowed_models"), m);
        if (!pr.id.empty() && !project_ids.insert(pr.id).second) r.fail(Reader::at(p, "id"), "duplicate project " + pr.id);
        s.projects.push_back(std::move(pr));
    }
    auto project_ref = [&](const std::string& path, const std::string& id) {
        if (!project_ids.contains(id)) r.fail(path, "unknown project '" + id + "'");
    };

    std::set<std::string> key_ids;
    const auto& keys = r.list(doc, "", "api_keys");
    for (std::size_t i = 0; i < keys.size(); ++i) {
        const auto p = Reader::at("api_keys", i);
        const auto& o = keys[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"key", "project", "per_key_budget", "expiry_ms"});
        ApiKey k;
        k.key = r.need<std::string>(o, p, "key");
        k.project_id = r.need<std::string>(o, p, "project");
        k.per_key_budget = r.maybe<Tokens>(o, p, "per_key_budget");
        k.expiry = r.maybe<SimTime>(o, p, "expiry_ms");
        if (o.contains("project")) project_ref(Reader::at(p, "project"), k.project_id);
        if (!k.key.empty() && !key_ids.insert(k.key).second) r.fail(Reader::at(p, "key"), "duplicate key");
        s.keys.push_back(std::move(k));
    }

    // A project reachable through a key must be allowed at least one model.
    for (std::size_t i = 0; i < s.projects.size(); ++i) {
        const auto& pr = s.projects[i];
        const bool keyed = std::any_of(s.keys.begin(), s.keys.end(), [&](const ApiKey& k) { return k.project_id == pr.id; });
        if (keyed && pr.allowed_models.empty())
            r.fail(Reader::at(Reader::at("projects", i), "allowed_models"), "must be nonempty for a project with API keys");
    }

    const auto& traffic = r.list(doc, "", "traffic");
    for (std::size_t i = 0; i < traffic.size(); ++i) {
        const auto p = Reader::at("traffic", i);
        const auto& o = traffic[i];
        if (!r.object(o, p)) continue;
        r.known(o, p,
                {"model", "api_key", "mean_qps", "diurnal_amplitude", "peak_hour", "prompt_len", "output_len",
                 "long_tail"});
        TrafficProfile t;
        t.model = r.need<std::string>(o, p, "model");
        t.api_key = r.need<std::string>(o, p, "api_key");
        if (o.contains("model")) model_ref(Reader::at(p, "model"), t.model);
        if (o.contains("api_key") && !key_ids.contains(t.api_key)) r.fail(Reader::at(p, "api_key"), "unknown api key");
        t.mean_qps = r.need<double>(o, p, "mean_qps");
        t.diurnal_amplitude = r.get<double>(o, p, "diurnal_amplitude", 0.0);
        t.peak_hour = r.get<double>(o, p, "peak_hour", 14.0);
        if (t.mean_qps < 0) r.fail(Reader::at(p, "mean_qps"), "must be >= 0");
        if (t.diurnal_amplitude < 0 || t.diurnal_amplitude > 1)
            r.fail(Reader::at(p, "diurnal_amplitude"), "must lie in [0, 1]");
        t.prompt_len = parse_length(r, r.sub(o, p, "prompt_len"), Reader::at(p, "prompt_len"));
        t.output_len = parse_length(r, r.sub(o, p, "output_len"), Reader::at(p, "output_len"));
        if (t.prompt_len.low < 1) r.fail(Reader::at(p, "prompt_len.low"), "must be >= 1");
        if (t.output_len.low < 1) r.fail(Reader::at(p, "output_len.low"), "must be >= 1");
        if (o.contains("long_tail")) {
            const auto lp = Reader::at(p, "long_tail");
            const auto& lt = r.sub(o, p, "long_tail");
            r.known(lt, lp, {"probability", "low", "high"});
            LongTail tail{r.need<double>(lt, lp, "probability"), r.need<Tokens>(lt, lp, "low"),
                          r.need<Tokens>(lt, lp, "high")};
            if (tail.probability < 0 || tail.probability > 1) r.fail(Reader::at(lp, "probability"), "must lie in [0, 1]");
            if (tail.low < 1 || tail.low > tail.high) r.fail(lp, "need 1 <= low <= high");
            t.long_tail = tail;
        }
        s.traffic.push_back(std::move(t));
    }
    if (auto rt = r.maybe<std::string>(doc, "", "request_trace")) s.request_trace = *rt;

    std::set<std::string> deployment_ids;
    const auto& deps = r.list(doc, "", "deployments");
    for (std::size_t i = 0; i < deps.size(); ++i) {
        const auto p = Reader::at("deployments", i);
        const auto& o = deps[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"id", "project", "cluster", "model", "replicas", "gpus", "labels", "tolerations"});
        DeploymentSpec d;
        d.id = r.need<std::string>(o, p, "id");
        d.project_id = r.need<std::string>(o, p, "project");
        if (o.contains("project")) project_ref(Reader::at(p, "project"), d.project_id);
        d.cluster = r.get<std::string>(o, p, "cluster", "inference");
        d.model = r.maybe<std::string>(o, p, "model");
        if (d.model) model_ref(Reader::at(p, "model"), *d.model);
        d.replicas = r.get<int>(o, p, "replicas", 1);
        d.gpus = r.get<int>(o, p, "gpus", 0);
        if (d.replicas < 0) r.fail(Reader::at(p, "replicas"), "must be >= 0");
        d.labels = r.strings(o, p, "labels");
        d.tolerations = r.strings(o, p, "tolerations");
        if (!d.id.empty() && !deployment_ids.insert(d.id).second) r.fail(Reader::at(p, "id"), "duplicate deployment");
        s.deployments.push_back(std::move(d));
    }
    const auto& updates = r.list(doc, "", "deployment_updates");
    for (std::size_t i = 0; i < updates.size(); ++i) {
        const auto p = Reader::at("deployment_updates", i);
        const auto& o = updates[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"at_ms", "deployment", "replicas"});
        DeploymentUpdate u{r.need<SimTime>(o, p, "at_ms"), r.need<std::string>(o, p, "deployment"),
                           r.need<int>(o, p, "replicas")};
        if (o.contains("deployment") && !deployment_ids.contains(u.deployment_id))
            r.fail(Reader::at(p, "deployment"), "unknown deployment '" + u.deployment_id + "'");
        if (u.at < 0) r.fail(Reader::at(p, "at_ms"), "must be >= 0");
        if (u.replicas < 0) r.fail(Reader::at(p, "replicas"), "must be >= 0");
        s.deployment_updates.push_back(std::move(u));
    }

    const auto& sb = r.sub(doc, "", "sandboxes");
    r.known(sb, "sandboxes", {"prune", "observed"});
    s.prune_sandboxes = r.get<bool>(sb, "sandboxes", "prune", true);
    const auto& observed = r.list(sb, "sandboxes", "observed");
    for (std::size_t i = 0; i < observed.size(); ++i) {
        const auto p = Reader::at("sandboxes.observed", i);
        const auto& o = observed[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"project", "repo", "reconciler_app", "namespace", "access_bindings"});
        SandboxRecord rec;
        rec.project_id = r.need<std::string>(o, p, "project");
        rec.repo = r.get<bool>(o, p, "repo", false);
        rec.reconciler_app = r.get<bool>(o, p, "reconciler_app", false);
        rec.namespace_ready = r.get<bool>(o, p, "namespace", false);
        rec.access_bindings = r.strings(o, p, "access_bindings");
        s.observed_sandboxes.push_back(std::move(rec));
    }

    const auto& svc = r.sub(doc, "", "service");
    r.known(svc, "service", {"fetch_bw_gb_per_s", "reconcile_interval_ms"});
    s.fetch_bw_gb_per_s = r.get<double>(svc, "service", "fetch_bw_gb_per_s", 1.0);
    s.reconcile_interval_ms = r.get<SimTime>(svc, "service", "reconcile_interval_ms", 300'000);
    if (s.fetch_bw_gb_per_s <= 0) r.fail("service.fetch_bw_gb_per_s", "must be > 0");
    if (s.reconcile_interval_ms <= 0) r.fail("service.reconcile_interval_ms", "must be > 0");

    const auto& batch = r.sub(doc, "", "batch");
    r.known(batch, "batch", {"default_path", "factors", "jobs"});
    s.default_path = r.choice<PathKind>(batch, "batch", "default_path", parse_path_kind).value_or(PathKind::HsnRdma);
    const auto& factors = r.list(batch, "batch", "factors");
    for (std::size_t i = 0; i < factors.size(); ++i) {
        const auto p = Reader::at("batch.factors", i);
        const auto& o = factors[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"path", "comm_class", "num", "den"});
        auto path = r.choice<PathKind>(o, p, "path", parse_path_kind);
        auto cls = r.choice<CommClass>(o, p, "comm_class", parse_comm_class);
        Ratio ratio{r.need<std::int64_t>(o, p, "num"), r.need<std::int64_t>(o, p, "den")};
        if (ratio.num <= 0 || ratio.den <= 0) r.fail(p, "num and den must be > 0");
        else if (path && cls) s.factors.set(*path, *cls, ratio);
        if (!path && !o.contains("path")) r.fail(Reader::at(p, "path"), "required");
        if (!cls && !o.contains("comm_class")) r.fail(Reader::at(p, "comm_class"), "required");
    }
    const auto& jobs = r.list(batch, "batch", "jobs");
    for (std::size_t i = 0; i < jobs.size(); ++i) {
        const auto p = Reader::at("batch.jobs", i);
        const auto& o = jobs[i];
        if (!r.object(o, p)) continue;
        r.known(o, p,
                {"submit_ms", "project", "nodes", "gpus_per_node", "walltime_ms", "base_runtime_ms", "comm_class",
                 "path"});
        BatchJobSpec js;
        js.submit = r.get<SimTime>(o, p, "submit_ms", 0);
        auto& j = js.job;
        j.project_id = r.need<std::string>(o, p, "project");
        if (o.contains("project")) project_ref(Reader::at(p, "project"), j.project_id);
        j.nodes_requested = r.get<int>(o, p, "nodes", 1);
        j.gpus_per_node = r.get<int>(o, p, "gpus_per_node", 0);
        j.walltime_estimate_ms = r.need<SimTime>(o, p, "walltime_ms");
        j.base_runtime_ms = r.need<SimTime>(o, p, "base_runtime_ms");
        j.comm_class = r.choice<CommClass>(o, p, "comm_class", parse_comm_class)
                           .value_or(j.nodes_requested > 1 ? CommClass::Large : CommClass::Small);
        j.path = r.choice<PathKind>(o, p, "path", parse_path_kind);
        if (js.submit < 0) r.fail(Reader::at(p, "submit_ms"), "must be >= 0");
        if (j.nodes_requested < 1) r.fail(Reader::at(p, "nodes"), "must be >= 1");
        if (j.walltime_estimate_ms <= 0) r.fail(Reader::at(p, "walltime_ms"), "must be > 0");
        if (j.base_runtime_ms <= 0) r.fail(Reader::at(p, "base_runtime_ms"), "must be > 0");
        if (j.base_runtime_ms > j.walltime_estimate_ms) r.fail(Reader::at(p, "base_runtime_ms"), "exceeds walltime_ms");
        s.batch_jobs.push_back(std::move(js));
    }
    if (!s.factors.valid()) r.fail("batch.factors", "every factor must be positive");

    const auto& ft = r.sub(doc, "", "finetune");
    r.known(ft, "finetune", {"recipes", "submissions", "rate_per_day", "mix", "adapter_gb", "retention"});
    std::set<std::string> recipe_ids;
    const auto& recipes = r.list(ft, "finetune", "recipes");
    for (std::size_t i = 0; i < recipes.size(); ++i) {
        const auto p = Reader::at("finetune.recipes", i);
        const auto& o = recipes[i];
        if (!r.object(o, p)) continue;
        r.known(o, p,
                {"id", "base_model", "technique", "lora_rank", "epochs", "nodes", "gpus_per_node", "est_ms_per_epoch",
                 "checkpoint_every_epochs", "dataset_ref", "project", "blueprint", "parent_checkpoint"});
        FineTuneRecipe rc;
        rc.id = r.need<std::string>(o, p, "id");
        rc.base_model = r.need<std::string>(o, p, "base_model");
        if (o.contains("base_model")) model_ref(Reader::at(p, "base_model"), rc.base_model);
        rc.technique = r.choice<Technique>(o, p, "technique", parse_technique).value_or(Technique::FullSFT);
        rc.lora_rank = r.get<int>(o, p, "lora_rank", 0);
        rc.epochs = r.get<int>(o, p, "epochs", 1);
        rc.nodes = r.get<int>(o, p, "nodes", 1);
        rc.gpus_per_node = r.get<int>(o, p, "gpus_per_node", 4);
        rc.est_ms_per_epoch = r.need<SimTime>(o, p, "est_ms_per_epoch");
        rc.checkpoint_every_epochs = r.get<int>(o, p, "checkpoint_every_epochs", 1);
        rc.dataset_ref = r.get<std::string>(o, p, "dataset_ref", "");
        rc.project_id = r.need<std::string>(o, p, "project");
        if (o.contains("project")) project_ref(Reader::at(p, "project"), rc.project_id);
        rc.blueprint = r.get<bool>(o, p, "blueprint", false);
        rc.parent_checkpoint = r.maybe<std::string>(o, p, "parent_checkpoint");
        if (!rc.valid()) r.fail(p, "needs epochs, nodes, checkpoint_every_epochs >= 1, est_ms_per_epoch > 0 and a LoRA rank for LoRA");
        if (!rc.id.empty() && !recipe_ids.insert(rc.id).second) r.fail(Reader::at(p, "id"), "duplicate recipe");
        s.recipes.push_back(std::move(rc));
    }
    const auto& subs = r.list(ft, "finetune", "submissions");
    for (std::size_t i = 0; i < subs.size(); ++i) {
        const auto p = Reader::at("finetune.submissions", i);
        const auto& o = subs[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"at_ms", "recipe"});
        RecipeSubmission rs{r.get<SimTime>(o, p, "at_ms", 0), r.need<std::string>(o, p, "recipe")};
        if (o.contains("recipe") && !recipe_ids.contains(rs.recipe_id))
            r.fail(Reader::at(p, "recipe"), "unknown recipe '" + rs.recipe_id + "'");
        s.recipe_submissions.push_back(std::move(rs));
    }
    s.finetune_rate_per_day = r.get<double>(ft, "finetune", "rate_per_day", 0.0);
    if (s.finetune_rate_per_day < 0) r.fail("finetune.rate_per_day", "must be >= 0");
    for (const auto& [id, w] : r.sub(ft, "finetune", "mix").items()) {
        const auto p = "finetune.mix." + id;
        if (!recipe_ids.contains(id)) r.fail(p, "unknown recipe '" + id + "'");
        if (!w.is_number() || w.get<double>() < 0)
            r.fail(p, "expected a non-negative weight");
        else
            s.finetune_mix.emplace_back(id, w.get<double>());
    }
    if (s.finetune_rate_per_day > 0 && s.finetune_mix.empty()) r.fail("finetune.mix", "required when rate_per_day > 0");
    s.checkpoint_sizing.adapter_gb = r.get<double>(ft, "finetune", "adapter_gb", 1.0);
    const auto& ret = r.sub(ft, "finetune", "retention");
    r.known(ret, "finetune.retention", {"keep_last_k", "min_age_ms"});
    s.retention.keep_last_k_per_lineage = r.get<int>(ret, "finetune.retention", "keep_last_k", 3);
    s.retention.min_age_ms = r.get<SimTime>(ret, "finetune.retention", "min_age_ms", 0);
    if (s.retention.keep_last_k_per_lineage < 1) r.fail("finetune.retention.keep_last_k", "must be >= 1");

    const auto& lc = r.sub(doc, "", "lifecycle");
    r.known(lc, "lifecycle", {"drain_ms", "reboot_ms", "join_ms", "detach_ms", "per_flavour", "service_allowlist"});
    s.transition = parse_durations(r, lc, "lifecycle", TransitionSpec{});
    for (const auto& [name, spec] : r.sub(lc, "lifecycle", "per_flavour").items()) {
        const auto p = "lifecycle.per_flavour." + name;
        try {
            const auto f = parse_flavour(name);
            if (r.object(spec, p)) {
                r.known(spec, p, {"drain_ms", "reboot_ms", "join_ms", "detach_ms"});
                s.transition_per_flavour[f] = parse_durations(r, spec, p, s.transition);
            }
        } catch (const std::invalid_argument& e) {
            r.fail(p, e.what());
        }
    }
    if (lc.contains("service_allowlist")) {
        std::set<std::pair<std::string, std::string>> allow;
        const auto& al = r.list(lc, "lifecycle", "service_allowlist");
        for (std::size_t i = 0; i < al.size(); ++i) {
            const auto p = Reader::at("lifecycle.service_allowlist", i);
            if (!r.object(al[i], p)) continue;
            r.known(al[i], p, {"node", "cluster"});
            auto node = r.need<std::string>(al[i], p, "node");
            auto cluster = r.need<std::string>(al[i], p, "cluster");
            if (al[i].contains("node") && !node_ids.contains(node)) r.fail(Reader::at(p, "node"), "unknown node '" + node + "'");
            allow.emplace(node, cluster);
        }
        s.service_allowlist = std::move(allow);
    }

    const auto& el = r.sub(doc, "", "elastic");
    r.known(el, "elastic",
            {"policy", "baseline_nodes", "delta_max", "poll_interval_ms", "scale_up_threshold_ms",
             "scale_down_threshold", "consecutive_windows", "cooldown_ms", "schedule", "cluster", "deployment"});
    auto& ec = s.elastic;
    ec.policy = r.choice<ScalingPolicy>(el, "elastic", "policy", parse_policy).value_or(ScalingPolicy::Static);
    ec.baseline_nodes = r.get<int>(el, "elastic", "baseline_nodes", 0);
    ec.delta_max = r.get<int>(el, "elastic", "delta_max", 0);
    ec.poll_interval_ms = r.get<SimTime>(el, "elastic", "poll_interval_ms", 60'000);
    ec.scale_up_threshold_ms = r.get<double>(el, "elastic", "scale_up_threshold_ms", 1'000.0);
    ec.scale_down_threshold = r.get<double>(el, "elastic", "scale_down_threshold", 0.3);
    ec.consecutive_windows = r.get<int>(el, "elastic", "consecutive_windows", 3);
    ec.cooldown_ms = r.get<SimTime>(el, "elastic", "cooldown_ms", 600'000);
    ec.cluster = r.get<std::string>(el, "elastic", "cluster", "inference");
    ec.elastic_deployment = r.maybe<std::string>(el, "elastic", "deployment");
    if (ec.baseline_nodes < 0) r.fail("elastic.baseline_nodes", "must be >= 0");
    if (ec.delta_max < 0) r.fail("elastic.delta_max", "must be >= 0");
    if (ec.poll_interval_ms <= 0) r.fail("elastic.poll_interval_ms", "must be > 0");
    if (ec.consecutive_windows < 1) r.fail("elastic.consecutive_windows", "must be >= 1");
    if (ec.cooldown_ms < 0) r.fail("elastic.cooldown_ms", "must be >= 0");
    if (ec.scale_down_threshold < 0 || ec.scale_down_threshold > 1)
        r.fail("elastic.scale_down_threshold", "must lie in [0, 1]");
    if (ec.elastic_deployment && !deployment_ids.contains(*ec.elastic_deployment))
        r.fail("elastic.deployment", "unknown deployment '" + *ec.elastic_deployment + "'");
    const auto& sched = r.list(el, "elastic", "schedule");
    for (std::size_t i = 0; i < sched.size(); ++i) {
        const auto p = Reader::at("elastic.schedule", i);
        const auto& e = sched[i];
        if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer()) {
            r.fail(p, "expected [hour, nodes]");
            continue;
        }
        const int h = e[0].get<int>(), n = e[1].get<int>();
        if (h < 0 || h > 23) r.fail(p, "hour must lie in [0, 23]");
        if (!ec.schedule.empty() && h <= ec.schedule.back().first) r.fail(p, "hours must increase");
        ec.schedule.emplace_back(h, n);
    }
    if (ec.policy == ScalingPolicy::Schedule && ec.schedule.empty()) r.fail("elastic.schedule", "required for the schedule policy");

    // The baseline must host one replica of every hot model.
    {
        int node_gpus = 0, in_cluster = 0;
        for (const auto& n : s.nodes)
            if (n.state.phase == NodePhase::JoinedService && n.state.cluster == ec.cluster) {
                node_gpus = std::max(node_gpus, n.gpus);
                ++in_cluster;
            }
        const auto hot = s.hot_models();
        if (!hot.empty() && in_cluster > 0) {
            Node tmpl_node;
            tmpl_node.gpus = node_gpus;
            try {
                const int floor = baseline_floor(hot, tmpl_node);
                if (ec.baseline_nodes < floor)
                    r.fail("elastic.baseline_nodes", "below the hot-model floor of " + std::to_string(floor));
            } catch (const InfeasibleProfile& e) {
                r.fail("models", e.what());
            }
        }
        if (ec.baseline_nodes > in_cluster && ec.baseline_nodes > 0)
            r.fail("elastic.baseline_nodes", "only " + std::to_string(in_cluster) + " nodes start in cluster '" +
                                                 ec.cluster + "'");
    }

    const auto& maint = r.list(doc, "", "maintenance");
    std::map<std::string, std::vector<std::pair<SimTime, SimTime>>> windows;
    for (std::size_t i = 0; i < maint.size(); ++i) {
        const auto p = Reader::at("maintenance", i);
        const auto& o = maint[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"nodes", "flavour", "start_ms", "end_ms"});
        MaintenanceSpec m;
        m.start = r.need<SimTime>(o, p, "start_ms");
        m.end = r.need<SimTime>(o, p, "end_ms");
        if (m.start >= m.end) r.fail(p, "start_ms must precede end_ms");
        for (const auto& id : r.strings(o, p, "nodes")) {
            if (!node_ids.contains(id)) r.fail(Reader::at(p, "nodes"), "unknown node '" + id + "'");
            m.nodes.push_back(id);
        }
        if (auto f = r.choice<NodeFlavour>(o, p, "flavour", parse_flavour))
            for (const auto& n : s.nodes)
                if (n.flavour == *f && std::find(m.nodes.begin(), m.nodes.end(), n.id) == m.nodes.end())
                    m.nodes.push_back(n.id);
        if (m.nodes.empty()) r.fail(p, "selects no nodes");
        for (const auto& id : m.nodes) {
            for (auto [a, b] : windows[id])
                if (m.start < b && a < m.end) r.fail(p, "overlaps another window on node " + id);
            windows[id].emplace_back(m.start, m.end);
        }
        s.maintenance.push_back(std::move(m));
    }

    const auto& fl = r.sub(doc, "", "failures");
    r.known(fl, "failures", {"enabled", "events"});
    s.failure_injection = r.get<bool>(fl, "failures", "enabled", false);
    const auto& fevents = r.list(fl, "failures", "events");
    for (std::size_t i = 0; i < fevents.size(); ++i) {
        const auto p = Reader::at("failures.events", i);
        const auto& o = fevents[i];
        if (!r.object(o, p)) continue;
        r.known(o, p, {"node", "at_ms", "duration_ms"});
        FailureSpec f{r.need<std::string>(o, p, "node"), r.need<SimTime>(o, p, "at_ms"),
                      r.need<SimTime>(o, p, "duration_ms")};
        if (o.contains("node") && !node_ids.contains(f.node)) r.fail(Reader::at(p, "node"), "unknown node '" + f.node + "'");
        if (f.duration_ms <= 0) r.fail(Reader::at(p, "duration_ms"), "must be > 0");
        s.failures.push_back(std::move(f));
    }

    const auto& gw = r.sub(doc, "", "gateway");
    r.known(gw, "gateway", {"itl_alpha_permille"});
    s.itl_alpha_permille = r.get<std::int64_t>(gw, "gateway", "itl_alpha_permille", 0);
    const auto& slo = r.sub(doc, "", "slo");
    r.known(slo, "slo", {"ttft_p99_ms"});
    s.slo_ttft_p99_ms = r.get<SimTime>(slo, "slo", "ttft_p99_ms", 2'500);

    if (!r.problems.empty()) throw ConfigError(r.problems);
    return s;
}

}  // namespace hybridsim
