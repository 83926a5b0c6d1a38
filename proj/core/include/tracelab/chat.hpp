// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

/// OpenAI-compatible chat-completion client shared by the policy and the
/// remote judges.
namespace tracelab::chat
{

struct Message
{
    std::string role; // system | user | assistant
    std::string content;

    [[nodiscard]] nlohmann::json to_json() const;
    static Message from_json(const nlohmann::json& j);

    friend bool operator==(const Message&, const Message&) = default;
};

nlohmann::json to_json(const std::vector<Message>& messages);

struct Endpoint
{
    std::string url; // full URL of the chat/completions route
    std::string model;
    std::string api_key; // sent as a bearer token when nonempty
    std::chrono::milliseconds timeout {std::chrono::seconds(120)};
    int retries = 2; // extra attempts after a retryable failure
    std::chrono::milliseconds backoff {500};

    [[nodiscard]] nlohmann::json to_json() const; // omits the key
    static Endpoint from_json(const nlohmann::json& j);
};

struct Sampling
{
    double temperature = 0.0;
    int max_tokens = 4096;
    std::optional<std::int64_t> seed;
};

/// Returns choices[0].message.content. Unreachable servers, 429 and 5xx are
/// retried with linear backoff; other statuses and malformed replies fail
/// at once. Throws TransportError.
std::string complete(const Endpoint& endpoint, const std::vector<Message>& messages, const Sampling& sampling);

} // namespace tracelab::chat
