// SPDX-License-Identifier: Apache-2.0
#include "tracelab/service.hpp"

#include "tracelab/common.hpp"
#include "tracelab/rewards.hpp"

#include <httplib.h>

#include <thread>

namespace tracelab
{

using nlohmann::json;

struct ScoringService::Impl
{
    Impl(Config c, Backends b): config(std::move(c)), backends(std::move(b)), ctx(backends.scoring(config)) {}

    Config config;
    Backends backends;
    rewards::ScoringContext ctx;
    httplib::Server http;
    std::thread worker;
};

namespace
{
    std::pair<int, json> failure(int status, const std::string& message)
    {
        return {status, json {{"error", message}}};
    }
} // namespace

ScoringService::ScoringService(Config config, Backends backends): _impl(std::make_unique<Impl>(std::move(config), std::move(backends)))
{
    auto& http = _impl->http;
    const auto& svc = _impl->config.service;
    const auto cap = static_cast<size_t>(std::max(svc.max_concurrent, 1));
    http.new_task_queue = [cap] { return new httplib::ThreadPool(cap); };
    const auto timeout = std::chrono::milliseconds(svc.request_timeout_ms);
    http.set_read_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), (timeout.count() % 1000) * 1000);
    http.set_write_timeout(std::chrono::duration_cast<std::chrono::seconds>(timeout).count(), (timeout.count() % 1000) * 1000);

    http.Post("/score", [this](const httplib::Request& req, httplib::Response& res) {
        const auto [status, body] = handle_score(req.body);
        res.status = status;
        res.set_content(body.dump(), "application/json");
    });
    http.Get("/health", [this](const httplib::Request&, httplib::Response& res) { res.set_content(health().dump(), "application/json"); });
}

ScoringService::~ScoringService()
{
    stop();
}

std::pair<int, json> ScoringService::handle_score(const std::string& body) const
{
    json request;
    try
    {
        request = json::parse(body);
    }
    catch (const json::parse_error& e)
    {
        return failure(400, std::string("request is not JSON: ") + e.what());
    }
    if (!request.is_object())
        return failure(400, "request must be an object");
    for (const auto* key: {"trace", "reference_report", "step"})
        if (!request.contains(key))
            return failure(400, std::string("missing field '") + key + "'");
    if (!request["reference_report"].is_string())
        return failure(400, "reference_report must be a string");
    if (!request["step"].is_number_integer() || request["step"].get<long long>() < 0)
        return failure(400, "step must be a non-negative integer");

    try
    {
        const auto trace = Trace::from_json(request["trace"]);
        const auto breakdown =
            rewards::score_trace(trace, request["reference_report"].get<std::string>(), request["step"].get<int>(), _impl->ctx);
        return {200, breakdown.to_json()};
    }
    catch (const FormatError& e)
    {
        return failure(400, e.what());
    }
    catch (const TransportError& e)
    {
        return failure(503, e.what());
    }
    catch (const JudgeParseError& e)
    {
        return failure(502, e.what());
    }
    catch (const ConfigError& e)
    {
        return failure(500, e.what());
    }
    catch (const std::exception& e)
    {
        return failure(400, e.what());
    }
}

json ScoringService::health() const
{
    return {{"status", "ok"}, {"config_hash", _impl->config.hash()}, {"max_concurrent", _impl->config.service.max_concurrent}};
}

int ScoringService::start(const std::string& host, int port)
{
    const int bound = port == 0 ? _impl->http.bind_to_any_port(host) : (_impl->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0)
        throw TransportError("cannot bind scoring service to " + host + ":" + std::to_string(port));
    _impl->worker = std::thread([this] { _impl->http.listen_after_bind(); });
    _impl->http.wait_until_ready();
    return bound;
}

void ScoringService::listen_blocking(const std::string& host, int port)
{
    if (!_impl->http.listen(host, port))
        throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
}

void ScoringService::stop()
{
    if (!_impl)
        return;
    _impl->http.stop();
    if (_impl->worker.joinable())
        _impl->worker.join();
}

} // namespace tracelab
