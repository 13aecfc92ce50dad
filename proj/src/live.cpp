#include "hybridsim/live.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <mutex>

#include <httplib.h>

#include "hybridsim/error.hpp"

namespace hybridsim {

using nlohmann::json;

namespace {

HttpResponse error(int status, std::string message) { return {status, {{"error", std::move(message)}}}; }

std::optional<JobId> parse_job_id(const std::string& s) {
    JobId id = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), id);
    if (ec != std::errc{} || ptr != s.data() + s.size()) return std::nullopt;
    return id;
}

BatchJob inline_job(const json& j) {
    BatchJob job;
    job.project_id = j.at("project").get<std::string>();
    job.nodes_requested = j.value("nodes", 1);
    job.gpus_per_node = j.value("gpus_per_node", 0);
    job.walltime_estimate_ms = j.at("walltime_ms").get<SimTime>();
    job.base_runtime_ms = j.at("base_runtime_ms").get<SimTime>();
    job.comm_class = parse_comm_class(j.value("comm_class", job.nodes_requested > 1 ? "Large" : "Small"));
    if (j.contains("path")) job.path = parse_path_kind(j.at("path").get<std::string>());
    return job;
}

}  // namespace

int status_for(Outcome o) {
    switch (o) {
        case Outcome::Admitted:
        case Outcome::Completed: return 200;
        case Outcome::RejectedAuth: return 401;
        case Outcome::RejectedBudget: return 402;
        case Outcome::RejectedModel: return 403;
        case Outcome::RejectedRate: return 429;
        case Outcome::RejectedUnavailable: return 503;
    }
    return 500;
}

LiveService::LiveService(const Scenario& s, Clock clock)
    : catalog_(s.models),
      gateway_(s.models, s.projects, s.keys),
      batch_(s.factors, s.default_path),
      bridge_(batch_, s.models, s.recipes),
      clock_(std::move(clock)) {
    std::set<std::string> ids;
    for (const auto& p : s.projects) ids.insert(p.id);
    batch_.set_known_projects(std::move(ids));
    for (const auto& n : s.nodes)
        if (n.state.phase == NodePhase::JoinedBatch) batch_.add_node(n);
}

HttpResponse LiveService::handle(const HttpRequest& req) {
    const SimTime now = clock_();
    advance(now);

    json body;
    if (!req.body.empty()) {
        body = json::parse(req.body, nullptr, false);
        if (body.is_discarded() || !body.is_object()) return error(400, "body must be a JSON object");
    }

    static constexpr std::string_view jobs_prefix = "/bridge/jobs/";
    try {
        if (req.path == "/v1/completions") {
            if (req.method != "POST") return error(405, "use POST");
            return completions(body, now);
        }
        if (req.path == "/v1/usage") {
            if (req.method != "GET") return error(405, "use GET");
            return usage(req.query);
        }
        if (req.path == "/bridge/jobs") {
            if (req.method != "POST") return error(405, "use POST");
            return submit_job(body, now);
        }
        if (req.path.starts_with(jobs_prefix)) {
            const auto id = req.path.substr(jobs_prefix.size());
            if (req.method == "GET") return job_status(id, now);
            if (req.method == "DELETE") return cancel_job(id, now);
            return error(405, "use GET or DELETE");
        }
    } catch (const json::exception& e) {
        return error(400, e.what());
    } catch (const std::invalid_argument& e) {
        return error(400, e.what());
    } catch (const InvalidJob& e) {
        return error(400, e.what());
    } catch (const UnknownBaseModel& e) {
        return error(400, e.what());
    }
    return error(404, "no route for " + req.path);
}

HttpResponse LiveService::completions(const json& body, SimTime now) {
    InferenceRequest r;
    char id[32];
    std::snprintf(id, sizeof id, "live-%06lld", static_cast<long long>(next_request_++));
    r.id = id;
    r.api_key = body.at("key").get<std::string>();
    r.model = body.at("model").get<std::string>();
    r.prompt_tokens = body.at("prompt_tokens").get<Tokens>();
    r.max_tokens = body.at("max_tokens").get<Tokens>();
    r.output_tokens = std::min(body.value("output_tokens", r.max_tokens), r.max_tokens);
    r.arrival = now;
    if (r.prompt_tokens < 1 || r.max_tokens < 1 || r.output_tokens < 1)
        return error(400, "token counts must be >= 1");

    const Outcome o = gateway_.admit(r, now);
    if (o != Outcome::Admitted) return {status_for(o), {{"request_id", r.id}, {"outcome", to_string(o)}}};

    const auto lat = compute_latency(catalog_.at(r.model), r.prompt_tokens, r.output_tokens, 0);
    gateway_.settle(r.id, r.output_tokens, now);
    return {200,
            {{"request_id", r.id},
             {"ttft_ms", lat.ttft_ms},
             {"e2el_ms", lat.e2el_ms},
             {"output_tokens", r.output_tokens}}};
}

HttpResponse LiveService::usage(const std::map<std::string, std::string>& query) const {
    auto it = query.find("project");
    if (it == query.end()) return error(400, "project query parameter required");
    const auto& budgets = gateway_.budgets();
    auto b = budgets.find(it->second);
    if (b == budgets.end()) return error(404, "unknown project " + it->second);
    json out{{"project", it->second},
             {"tokens_settled", b->second.settled},
             {"tokens_reserved", b->second.reserved},
             {"tokens_remaining", b->second.remaining},
             {"credits_settled", b->second.credit_settled},
             {"credits_remaining", b->second.credit_remaining}};
    if (auto t = gateway_.totals().find(it->second); t != gateway_.totals().end()) {
        out["requests"] = t->second.requests;
        out["prompt_tokens"] = t->second.prompt_tokens;
        out["output_tokens"] = t->second.output_tokens;
    }
    return {200, std::move(out)};
}

HttpResponse LiveService::submit_job(const json& body, SimTime now) {
    JobId id = 0;
    if (body.contains("recipe_id")) {
        const auto recipe = body.at("recipe_id").get<std::string>();
        if (!bridge_.recipe(recipe)) return error(404, "unknown recipe " + recipe);
        id = bridge_.submit_recipe(recipe, now);
    } else if (body.contains("job")) {
        id = bridge_.submit(inline_job(body.at("job")), now);
    } else {
        return error(400, "expected recipe_id or job");
    }
    batch_.schedule_pass(now);
    return {201, {{"job_id", std::to_string(id)}}};
}

HttpResponse LiveService::job_status(const std::string& id, SimTime now) const {
    const auto job = parse_job_id(id);
    if (!job || !batch_.has_job(*job)) return error(404, "unknown job " + id);
    const auto p = bridge_.poll(*job, now);
    return {200, {{"job_id", id}, {"state", to_string(p.state)}, {"progress", p.progress}}};
}

HttpResponse LiveService::cancel_job(const std::string& id, SimTime now) {
    const auto job = parse_job_id(id);
    if (!job || !batch_.has_job(*job)) return error(404, "unknown job " + id);
    bridge_.cancel(*job, now);
    batch_.schedule_pass(now);
    return {200, {{"job_id", id}, {"state", to_string(batch_.job(*job).state)}}};
}

void LiveService::advance(SimTime now) {
    for (;;) {
        std::optional<JobId> next;
        SimTime when = now + 1;
        for (const auto& [id, j] : batch_.jobs())
            if (j.state == JobState::Running && j.end_time <= now && j.end_time < when) {
                next = id;
                when = j.end_time;
            }
        if (!next) break;
        batch_.complete(*next, when);
        batch_.schedule_pass(when);
    }
    batch_.schedule_pass(now);
}

bool serve(LiveService& service, const std::string& host, int port) {
    httplib::Server server;
    std::mutex writer;

    auto adapt = [&](const httplib::Request& in, httplib::Response& out) {
        HttpRequest req{in.method, in.path, {}, in.body};
        for (const auto& [k, v] : in.params) req.query.emplace(k, v);
        HttpResponse res;
        {
            std::lock_guard lock(writer);
            res = service.handle(req);
        }
        out.status = res.status;
        out.set_content(res.body.dump(), "application/json");
    };
    server.Post("/v1/completions", adapt);
    server.Get("/v1/usage", adapt);
    server.Post("/bridge/jobs", adapt);
    server.Get(R"(/bridge/jobs/([^/]+))", adapt);
    server.Delete(R"(/bridge/jobs/([^/]+))", adapt);
    return server.listen(host, port);
}

}  // namespace hybridsim
