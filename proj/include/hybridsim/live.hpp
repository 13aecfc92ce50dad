#pragma once

// Opt-in live mode: the gateway and the fine-tuning bridge behind a small
// JSON-over-HTTP surface. The handler is an ordinary function of (state,
// request) so it can be exercised without sockets; `serve` wraps it in an
// httplib server and funnels every call through one mutex.
//
//   POST   /v1/completions      {key, model, prompt_tokens, max_tokens[, output_tokens]}
//   GET    /v1/usage?project=P
//   POST   /bridge/jobs         {recipe_id} | {job: {...}}
//   GET    /bridge/jobs/{id}
//   DELETE /bridge/jobs/{id}
//
// Live mode has no queueing: an admitted completion is served at once and
// settled immediately with the modelled latency.

#include <functional>
#include <map>
#include <string>

#include <json.hpp>

#include "hybridsim/batch.hpp"
#include "hybridsim/bridge.hpp"
#include "hybridsim/gateway.hpp"
#include "hybridsim/scenario.hpp"

namespace hybridsim {

struct HttpRequest {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
};

struct HttpResponse {
    int status = 200;
    nlohmann::json body = nlohmann::json::object();
};

/// HTTP status for a gateway outcome.
int status_for(Outcome o);

class LiveService {
public:
    using Clock = std::function<SimTime()>;

    /// Uses the scenario's catalog, projects, keys, recipes and batch nodes.
    /// `clock` returns milliseconds since start; it must never go backwards.
    LiveService(const Scenario& scenario, Clock clock);

    HttpResponse handle(const HttpRequest& req);

    const Gateway& gateway() const { return gateway_; }
    const BatchPlane& batch() const { return batch_; }

private:
    HttpResponse completions(const nlohmann::json& body, SimTime now);
    HttpResponse usage(const std::map<std::string, std::string>& query) const;
    HttpResponse submit_job(const nlohmann::json& body, SimTime now);
    HttpResponse job_status(const std::string& id, SimTime now) const;
    HttpResponse cancel_job(const std::string& id, SimTime now);
    /// Completes jobs whose planned end has passed and refills idle nodes.
    void advance(SimTime now);

    std::map<std::string, ModelProfile> catalog_;
    Gateway gateway_;
    BatchPlane batch_;
    Bridge bridge_;
    Clock clock_;
    std::int64_t next_request_ = 1;
};

/// Blocks serving `service` on host:port until the process is stopped.
/// Returns false when the socket cannot be bound.
bool serve(LiveService& service, const std::string& host, int port);

}  // namespace hybridsim
