#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "hybridsim/live.hpp"

using namespace hybridsim;
using nlohmann::json;

namespace {

Scenario live_scenario() {
    return parse_scenario(json::parse(R"({
        "seed": 1,
        "horizon_ms": 1000,
        "node_template": {"gpus": 4, "gpu_mem_gb": 96, "network_paths": [{"kind": "HsnTcpSingle"}]},
        "nodes": [{"id": "b1", "state": "batch"}, {"id": "b2", "state": "batch"}],
        "batch": {"default_path": "HsnTcpSingle"},
        "models": [{"name": "m", "weights_gb": 16, "itl_ms": 10, "ttft_base_ms": 100,
                    "prefill_per_token_ms": 1, "gpus_required": 1, "max_context": 4096},
                   {"name": "other", "weights_gb": 16, "itl_ms": 10, "gpus_required": 1}],
        "projects": [{"id": "p", "token_budget": 1000, "credit_budget": 100,
                      "rate_limit": {"capacity": 2, "refill_per_s": 1}, "allowed_models": ["m"]},
                     {"id": "tiny", "token_budget": 50, "credit_budget": 100,
                      "rate_limit": {"capacity": 10, "refill_per_s": 1}, "allowed_models": ["m"]}],
        "api_keys": [{"key": "k", "project": "p"}, {"key": "kt", "project": "tiny"}],
        "finetune": {"recipes": [{"id": "r", "base_model": "m", "technique": "FullSFT", "epochs": 2,
                                   "nodes": 1, "est_ms_per_epoch": 1000, "project": "p"}]}
    })"));
}

struct Harness {
    SimTime now = 0;
    LiveService svc{live_scenario(), [this] { return now; }};

    HttpResponse call(std::string method, std::string path, const json& body = nullptr,
                      std::map<std::string, std::string> query = {}) {
        return svc.handle({std::move(method), std::move(path), std::move(query), body.is_null() ? "" : body.dump()});
    }
    HttpResponse complete(const std::string& key, const std::string& model, Tokens prompt, Tokens max) {
        return call("POST", "/v1/completions", {{"key", key}, {"model", model}, {"prompt_tokens", prompt}, {"max_tokens", max}});
    }
};

}  // namespace

TEST_CASE("status codes map gateway outcomes") {
    CHECK(status_for(Outcome::Completed) == 200);
    CHECK(status_for(Outcome::RejectedAuth) == 401);
    CHECK(status_for(Outcome::RejectedBudget) == 402);
    CHECK(status_for(Outcome::RejectedModel) == 403);
    CHECK(status_for(Outcome::RejectedRate) == 429);
    CHECK(status_for(Outcome::RejectedUnavailable) == 503);
}

TEST_CASE("completions walk the admission order") {
    Harness h;
    auto r = h.complete("k", "m", 10, 5);
    REQUIRE(r.status == 200);
    CHECK(r.body["ttft_ms"] == 110);
    CHECK(r.body["e2el_ms"] == 110 + 10 * 4);
    CHECK(r.body["output_tokens"] == 5);

    CHECK(h.complete("nope", "m", 10, 5).status == 401);
    auto denied = h.complete("k", "other", 10, 5);
    CHECK(denied.status == 403);
    CHECK(denied.body["outcome"] == "RejectedModel");

    CHECK(h.complete("k", "m", 10, 5).status == 200);
    CHECK(h.complete("k", "m", 10, 5).status == 429);  // bucket of two is empty
    h.now = 1000;
    CHECK(h.complete("k", "m", 10, 5).status == 200);

    CHECK(h.complete("kt", "m", 10, 20).status == 200);  // 30 of 50
    CHECK(h.complete("kt", "m", 10, 20).status == 402);

    auto usage = h.call("GET", "/v1/usage", nullptr, {{"project", "p"}});
    REQUIRE(usage.status == 200);
    CHECK(usage.body["tokens_settled"] == 45);
    CHECK(usage.body["tokens_reserved"] == 0);
    CHECK(usage.body["tokens_remaining"] == 955);
    CHECK(usage.body["requests"] == 3);
    CHECK(h.call("GET", "/v1/usage", nullptr, {{"project", "ghost"}}).status == 404);
    CHECK(h.call("GET", "/v1/usage").status == 400);
}

TEST_CASE("malformed requests are client errors") {
    Harness h;
    CHECK(h.svc.handle({"POST", "/v1/completions", {}, "{oops"}).status == 400);
    CHECK(h.call("POST", "/v1/completions", {{"key", "k"}}).status == 400);
    CHECK(h.complete("k", "m", 0, 5).status == 400);
    CHECK(h.call("GET", "/v1/completions").status == 405);
    CHECK(h.call("GET", "/elsewhere").status == 404);
}

TEST_CASE("bridge jobs can be submitted, polled and cancelled") {
    Harness h;
    auto sub = h.call("POST", "/bridge/jobs", {{"recipe_id", "r"}});
    REQUIRE(sub.status == 201);
    const std::string id = sub.body["job_id"];

    auto st = h.call("GET", "/bridge/jobs/" + id);
    REQUIRE(st.status == 200);
    CHECK(st.body["state"] == "Running");
    h.now = 1000;
    st = h.call("GET", "/bridge/jobs/" + id);
    CHECK(st.body["progress"].get<double>() == doctest::Approx(0.5));
    h.now = 5000;
    st = h.call("GET", "/bridge/jobs/" + id);
    CHECK(st.body["state"] == "Completed");

    auto inline_job = h.call("POST", "/bridge/jobs",
                             {{"job", {{"project", "p"}, {"walltime_ms", 10000}, {"base_runtime_ms", 5000}}}});
    REQUIRE(inline_job.status == 201);
    const std::string id2 = inline_job.body["job_id"];
    auto del = h.call("DELETE", "/bridge/jobs/" + id2);
    CHECK(del.status == 200);
    CHECK(del.body["state"] == "Cancelled");

    CHECK(h.call("POST", "/bridge/jobs", {{"recipe_id", "ghost"}}).status == 404);
    CHECK(h.call("GET", "/bridge/jobs/999").status == 404);
    CHECK(h.call("DELETE", "/bridge/jobs/abc").status == 404);
    CHECK(h.call("POST", "/bridge/jobs", {{"job", {{"project", "ghost"}, {"walltime_ms", 1}, {"base_runtime_ms", 1}}}})
              .status == 400);
    CHECK(h.call("POST", "/bridge/jobs", json::object()).status == 400);
    CHECK(h.call("PUT", "/bridge/jobs/1").status == 405);
}
