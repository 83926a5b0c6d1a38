// SPDX-License-Identifier: Apache-2.0
#include "tracelab/chat.hpp"

#include "tracelab/common.hpp"
#include "tracelab/http.hpp"

#include <thread>

namespace tracelab::chat
{

using nlohmann::json;

json Message::to_json() const
{
    return {{"role", role}, {"content", content}};
}

Message Message::from_json(const json& j)
{
    return {j.at("role").get<std::string>(), j.at("content").get<std::string>()};
}

json to_json(const std::vector<Message>& messages)
{
    json out = json::array();
    for (const auto& m: messages)
        out.push_back(m.to_json());
    return out;
}

json Endpoint::to_json() const
{
    return {{"url", url},
            {"model", model},
            {"timeout_ms", timeout.count()},
            {"retries", retries},
            {"backoff_ms", backoff.count()}};
}

Endpoint Endpoint::from_json(const json& j)
{
    Endpoint e;
    e.url = j.value("url", "");
    e.model = j.value("model", "");
    e.api_key = j.value("api_key", "");
    e.timeout = std::chrono::milliseconds(j.value("timeout_ms", e.timeout.count()));
    e.retries = j.value("retries", e.retries);
    e.backoff = std::chrono::milliseconds(j.value("backoff_ms", e.backoff.count()));
    if (e.retries < 0 || e.timeout.count() <= 0)
        throw ConfigError("endpoint retries must be >= 0 and timeout positive");
    return e;
}

std::string complete(const Endpoint& endpoint, const std::vector<Message>& messages, const Sampling& sampling)
{
    if (endpoint.url.empty())
        throw ConfigError("chat endpoint URL is not configured");
    json body = {{"messages", to_json(messages)}, {"temperature", sampling.temperature}, {"max_tokens", sampling.max_tokens}};
    if (!endpoint.model.empty())
        body["model"] = endpoint.model;
    if (sampling.seed)
        body["seed"] = *sampling.seed;
    http::Headers headers;
    if (!endpoint.api_key.empty())
        headers.emplace_back("Authorization", "Bearer " + endpoint.api_key);

    const auto payload = body.dump();
    std::string lastError;
    for (int attempt = 0; attempt <= endpoint.retries; ++attempt)
    {
        if (attempt > 0)
            std::this_thread::sleep_for(endpoint.backoff * attempt);
        http::Response r;
        try
        {
            r = http::post(endpoint.url, payload, "application/json", endpoint.timeout, headers);
        }
        catch (const TransportError& e)
        {
            lastError = e.what();
            continue;
        }
        if (r.status == 429 || r.status >= 500)
        {
            lastError = "HTTP " + std::to_string(r.status) + " from " + endpoint.url;
            continue;
        }
        if (r.status < 200 || r.status >= 300)
            throw TransportError("HTTP " + std::to_string(r.status) + " from " + endpoint.url + ": " + r.body.substr(0, 200));
        try
        {
            const auto reply = json::parse(r.body);
            const auto& content = reply.at("choices").at(0).at("message").at("content");
            return content.is_string() ? content.get<std::string>() : content.dump();
        }
        catch (const json::exception& e)
        {
            throw TransportError("malformed chat-completion reply from " + endpoint.url + ": " + e.what());
        }
    }
    throw TransportError("chat endpoint failed after " + std::to_string(endpoint.retries + 1) + " attempts: " + lastError);
}

} // namespace tracelab::chat
