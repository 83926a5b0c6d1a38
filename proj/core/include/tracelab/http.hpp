// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace tracelab::http
{

struct Response
{
    int status = 0;
    std::string body;
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// POSTs a body to an http:// URL. Throws TransportError when the server
/// cannot be reached or the connection fails; HTTP error statuses are
/// returned, not thrown.
Response post(const std::string& url, const std::string& body, const std::string& contentType,
              std::chrono::milliseconds timeout, const Headers& headers = {});

Response get(const std::string& url, std::chrono::milliseconds timeout);

} // namespace tracelab::http
