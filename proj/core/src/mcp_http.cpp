// SPDX-License-Identifier: Apache-2.0
#include "tracelab/mcp.hpp"

#include "tracelab/common.hpp"

#include <httplib.h>

#include <thread>

namespace tracelab::mcp
{

struct HttpServer::Impl
{
    explicit Impl(const Server& s): server(s) {}

    const Server& server;
    httplib::Server http;
    std::thread worker;
};

HttpServer::HttpServer(const Server& server): _impl(std::make_unique<Impl>(server))
{
    _impl->http.Post(R"(/.*)", [this](const httplib::Request& req, httplib::Response& res) {
        const auto reply = _impl->server.handle_text(req.body);
        if (reply.empty())
        {
            res.status = 202;
            return;
        }
        res.set_content(reply, "application/json");
    });
}

HttpServer::~HttpServer()
{
    stop();
}

int HttpServer::start(const std::string& host, int port)
{
    const int bound = port == 0 ? _impl->http.bind_to_any_port(host) : (_impl->http.bind_to_port(host, port) ? port : -1);
    if (bound < 0)
        throw TransportError("cannot bind MCP HTTP server to " + host + ":" + std::to_string(port));
    _impl->worker = std::thread([this] { _impl->http.listen_after_bind(); });
    _impl->http.wait_until_ready();
    return bound;
}

void HttpServer::listen_blocking(const std::string& host, int port)
{
    if (!_impl->http.listen(host, port))
        throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
}

void HttpServer::stop()
{
    if (!_impl)
        return;
    _impl->http.stop();
    if (_impl->worker.joinable())
        _impl->worker.join();
}

} // namespace tracelab::mcp
