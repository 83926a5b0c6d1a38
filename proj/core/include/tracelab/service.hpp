// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/config.hpp"

#include <nlohmann/json.hpp>

#include <memory>
#include <string>
#include <utility>

namespace tracelab
{

/// HTTP scoring endpoint for external trainers.
///
///   POST /score  {"trace": Trace, "reference_report": str, "step": int}
///                -> 200 RewardBreakdown
///   GET  /health -> 200 {"status": "ok", ...}
///
/// Errors carry {"error": message} and never a score: 400 for schema
/// problems, 503 when a labeler/judge backend is unreachable, 502 when a
/// judge answers unparseably, 500 for configuration faults.
class ScoringService
{
  public:
    ScoringService(Config config, Backends backends);
    ~ScoringService();
    ScoringService(const ScoringService&) = delete;
    ScoringService& operator=(const ScoringService&) = delete;

    /// Transport-free request handling; returns (status, body).
    [[nodiscard]] std::pair<int, nlohmann::json> handle_score(const std::string& body) const;
    [[nodiscard]] nlohmann::json health() const;

    /// Binds (port 0 picks a free port), serves on a background thread and
    /// returns the bound port.
    int start(const std::string& host, int port);
    void listen_blocking(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
};

} // namespace tracelab
