// SPDX-License-Identifier: Apache-2.0
#include "tracelab/http.hpp"

#include "tracelab/common.hpp"

#include <httplib.h>

#include <regex>

namespace tracelab::http
{

namespace
{
    struct Endpoint
    {
        std::string host;
        int port = 80;
        std::string path;
    };

    Endpoint parse_url(const std::string& url)
    {
        static const std::regex re(R"(^http://([^/:]+)(?::(\d+))?(/.*)?$)");
        std::smatch m;
        if (!std::regex_match(url, m, re))
            throw TransportError("unsupported URL (expected http://host[:port]/path): " + url);
        Endpoint e;
        e.host = m[1];
        e.port = m[2].matched ? std::stoi(m[2]) : 80;
        e.path = m[3].matched ? m[3].str() : "/";
        return e;
    }

    httplib::Client make_client(const Endpoint& e, std::chrono::milliseconds timeout)
    {
        httplib::Client cli(e.host, e.port);
        const auto secs = static_cast<time_t>(timeout.count() / 1000);
        const auto usecs = static_cast<time_t>((timeout.count() % 1000) * 1000);
        cli.set_connection_timeout(secs, usecs);
        cli.set_read_timeout(secs, usecs);
        cli.set_write_timeout(secs, usecs);
        return cli;
    }
} // namespace

Response post(const std::string& url, const std::string& body, const std::string& contentType, std::chrono::milliseconds timeout,
              const Headers& headers)
{
    const auto e = parse_url(url);
    auto cli = make_client(e, timeout);
    httplib::Headers h;
    for (const auto& [k, v]: headers)
        h.emplace(k, v);
    auto res = cli.Post(e.path, h, body, contentType);
    if (!res)
        throw TransportError("POST " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

Response get(const std::string& url, std::chrono::milliseconds timeout)
{
    const auto e = parse_url(url);
    auto cli = make_client(e, timeout);
    auto res = cli.Get(e.path);
    if (!res)
        throw TransportError("GET " + url + " failed: " + httplib::to_string(res.error()));
    return {res->status, res->body};
}

} // namespace tracelab::http
