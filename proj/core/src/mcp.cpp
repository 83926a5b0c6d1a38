// SPDX-License-Identifier: Apache-2.0
#include "tracelab/mcp.hpp"

#include "tracelab/common.hpp"
#include "tracelab/http.hpp"

#include <algorithm>
#include <cerrno>
#include <csignal>
#include <cstring>
#include <istream>
#include <ostream>

#include <fcntl.h>
#include <poll.h>
#include <sys/wait.h>
#include <unistd.h>

namespace tracelab::mcp
{

namespace
{
    constexpr int kParseError = -32700;
    constexpr int kInvalidRequest = -32600;
    constexpr int kMethodNotFound = -32601;
    constexpr int kInvalidParams = -32602;

    nlohmann::json rpc_error(const nlohmann::json& id, int code, const std::string& message)
    {
        return {{"jsonrpc", "2.0"}, {"id", id}, {"error", {{"code", code}, {"message", message}}}};
    }

    nlohmann::json rpc_result(const nlohmann::json& id, nlohmann::json result)
    {
        return {{"jsonrpc", "2.0"}, {"id", id}, {"result", std::move(result)}};
    }

    // Unwraps a JSON-RPC response, throwing TransportError on protocol errors.
    nlohmann::json unwrap(const nlohmann::json& response, long long id)
    {
        if (!response.is_object() || response.value("jsonrpc", "") != "2.0")
            throw TransportError("malformed JSON-RPC response");
        if (response.contains("id") && response.at("id") != nlohmann::json(id))
            throw TransportError("JSON-RPC response id mismatch");
        if (const auto it = response.find("error"); it != response.end())
            throw TransportError("server error " + std::to_string(it->value("code", 0)) + ": " + it->value("message", std::string {}));
        if (!response.contains("result"))
            throw TransportError("JSON-RPC response without result");
        return response.at("result");
    }

    std::vector<tools::ToolDescriptor> decode_tool_list(const nlohmann::json& result, const std::string& address)
    {
        std::vector<tools::ToolDescriptor> out;
        for (const auto& t: result.at("tools"))
            out.push_back(tools::ToolDescriptor::from_mcp_json(t, {tools::Binding::Kind::mcp, address}));
        return out;
    }

    nlohmann::json call_params(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx)
    {
        return {{"name", tool}, {"arguments", args.is_null() ? nlohmann::json::object() : args}, {"_meta", ctx.to_json()}};
    }
} // namespace

nlohmann::json encode_call_result(const ToolResult& r)
{
    return {{"content", nlohmann::json::array({{{"type", "text"}, {"text", r.observation()}}})},
            {"isError", !r.success},
            {"structuredContent", r.to_json()}};
}

ToolResult decode_call_result(const nlohmann::json& result)
{
    if (const auto it = result.find("structuredContent"); it != result.end() && it->is_object() && it->contains("success"))
        return ToolResult::from_json(*it);
    std::string text;
    for (const auto& c: result.value("content", nlohmann::json::array()))
        if (c.value("type", "") == "text")
            text += c.value("text", std::string {});
    return result.value("isError", false) ? ToolResult::failure(text.empty() ? "Tool call failed." : text) : ToolResult::ok(text);
}

Server::Server(const tools::Toolbox& box, std::string name, std::string defaultArtifactRoot):
    _box(box), _name(std::move(name)), _defaultRoot(std::move(defaultArtifactRoot))
{
}

nlohmann::json Server::handle(const nlohmann::json& request) const
{
    if (!request.is_object() || request.value("jsonrpc", "") != "2.0" || !request.contains("method") || !request.at("method").is_string())
        return rpc_error(request.is_object() ? request.value("id", nlohmann::json()) : nlohmann::json(), kInvalidRequest, "invalid request");
    const auto method = request.at("method").get<std::string>();
    const bool isNotification = !request.contains("id");
    const auto id = request.value("id", nlohmann::json());
    const auto params = request.value("params", nlohmann::json::object());

    if (isNotification)
        return nullptr;
    if (method == "initialize")
        return rpc_result(id, {{"protocolVersion", kProtocolVersion},
                               {"capabilities", {{"tools", nlohmann::json::object()}}},
                               {"serverInfo", {{"name", _name}, {"version", "0.1.0"}}}});
    if (method == "ping")
        return rpc_result(id, nlohmann::json::object());
    if (method == "tools/list")
    {
        nlohmann::json list = nlohmann::json::array();
        for (const auto& d: _box.descriptors())
            list.push_back(d.to_mcp_json());
        return rpc_result(id, {{"tools", list}});
    }
    if (method == "tools/call")
    {
        if (!params.is_object() || !params.contains("name") || !params.at("name").is_string())
            return rpc_error(id, kInvalidParams, "tools/call requires a string 'name'");
        auto ctx = tools::EpisodeContext::from_json(params.value("_meta", nlohmann::json::object()));
        if (ctx.artifact_root.empty())
            ctx.artifact_root = _defaultRoot;
        const auto result = _box.call(params.at("name").get<std::string>(), params.value("arguments", nlohmann::json::object()), ctx);
        return rpc_result(id, encode_call_result(result));
    }
    return rpc_error(id, kMethodNotFound, "method not found: " + method);
}

std::string Server::handle_text(const std::string& text) const
{
    nlohmann::json request;
    try
    {
        request = nlohmann::json::parse(text);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        return rpc_error(nullptr, kParseError, e.what()).dump();
    }
    const auto response = handle(request);
    return response.is_null() ? std::string {} : response.dump();
}

void Server::serve_stdio(std::istream& in, std::ostream& out) const
{
    std::string line;
    while (std::getline(in, line))
    {
        if (trim(line).empty())
            continue;
        const auto response = handle_text(line);
        if (!response.empty())
            out << response << '\n' << std::flush;
    }
}

StdioClient::StdioClient(std::vector<std::string> argv, std::chrono::milliseconds timeout): _argv(std::move(argv)), _timeout(timeout)
{
    if (_argv.empty())
        throw ConfigError("stdio MCP server command is empty");
}

StdioClient::~StdioClient()
{
    shutdown();
}

std::string StdioClient::address() const
{
    return "stdio:" + join(_argv, " ");
}

void StdioClient::ensure_started()
{
    if (_pid > 0)
        return;
    // A server that dies mid-request must surface as EPIPE, not kill us.
    static std::once_flag ignoreSigpipe;
    std::call_once(ignoreSigpipe, [] { std::signal(SIGPIPE, SIG_IGN); });
    int in[2], out[2];
    if (pipe(in) != 0 || pipe(out) != 0)
        throw TransportError(std::string("pipe failed: ") + std::strerror(errno));
    const pid_t pid = fork();
    if (pid < 0)
        throw TransportError(std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0)
    {
        dup2(in[0], STDIN_FILENO);
        dup2(out[1], STDOUT_FILENO);
        close(in[0]);
        close(in[1]);
        close(out[0]);
        close(out[1]);
        std::vector<char*> args;
        for (auto& a: _argv)
            args.push_back(a.data());
        args.push_back(nullptr);
        execvp(args[0], args.data());
        _exit(127);
    }
    close(in[0]);
    close(out[1]);
    _pid = pid;
    _toChild = in[1];
    _fromChild = out[0];
    fcntl(_toChild, F_SETFD, FD_CLOEXEC);
    fcntl(_fromChild, F_SETFD, FD_CLOEXEC);
    _buffer.clear();
    try
    {
        request("initialize", {{"protocolVersion", kProtocolVersion},
                               {"capabilities", nlohmann::json::object()},
                               {"clientInfo", {{"name", "tracelab"}, {"version", "0.1.0"}}}});
        const std::string note = nlohmann::json({{"jsonrpc", "2.0"}, {"method", "notifications/initialized"}}).dump() + "\n";
        if (write(_toChild, note.data(), note.size()) < 0)
            throw TransportError("failed to write to MCP server");
    }
    catch (...)
    {
        shutdown();
        throw;
    }
}

void StdioClient::shutdown() noexcept
{
    if (_toChild >= 0)
        close(_toChild);
    if (_fromChild >= 0)
        close(_fromChild);
    _toChild = _fromChild = -1;
    if (_pid > 0)
    {
        int status = 0;
        for (int i = 0; i < 50; ++i)
        {
            if (waitpid(_pid, &status, WNOHANG) != 0)
            {
                _pid = -1;
                return;
            }
            usleep(10000);
        }
        kill(_pid, SIGKILL);
        waitpid(_pid, &status, 0);
        _pid = -1;
    }
}

nlohmann::json StdioClient::request(const std::string& method, const nlohmann::json& params)
{
    const auto id = _nextId++;
    const auto line = nlohmann::json({{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}}).dump() + "\n";
    size_t written = 0;
    while (written < line.size())
    {
        const auto n = write(_toChild, line.data() + written, line.size() - written);
        if (n < 0)
        {
            if (errno == EINTR)
                continue;
            throw TransportError(std::string("write to MCP server failed: ") + std::strerror(errno));
        }
        written += static_cast<size_t>(n);
    }

    const auto deadline = std::chrono::steady_clock::now() + _timeout;
    for (;;)
    {
        if (const auto nl = _buffer.find('\n'); nl != std::string::npos)
        {
            const auto reply = _buffer.substr(0, nl);
            _buffer.erase(0, nl + 1);
            if (trim(reply).empty())
                continue;
            nlohmann::json response;
            try
            {
                response = nlohmann::json::parse(reply);
            }
            catch (const nlohmann::json::parse_error& e)
            {
                throw TransportError(std::string("unparseable MCP response: ") + e.what());
            }
            if (!response.contains("id"))
                continue; // server notification
            return unwrap(response, id);
        }
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now()).count();
        if (left <= 0)
            throw TransportError("MCP request '" + method + "' timed out");
        pollfd pfd {_fromChild, POLLIN, 0};
        const int ready = poll(&pfd, 1, static_cast<int>(left));
        if (ready < 0 && errno == EINTR)
            continue;
        if (ready <= 0)
            throw TransportError("MCP request '" + method + "' timed out");
        char buf[65536];
        const auto n = read(_fromChild, buf, sizeof buf);
        if (n <= 0)
            throw TransportError("MCP server closed the connection");
        _buffer.append(buf, static_cast<size_t>(n));
    }
}

std::vector<tools::ToolDescriptor> StdioClient::list_tools()
{
    std::lock_guard lock(_mutex);
    try
    {
        ensure_started();
        return decode_tool_list(request("tools/list", nlohmann::json::object()), address());
    }
    catch (const TransportError&)
    {
        shutdown();
        throw;
    }
}

ToolResult StdioClient::invoke(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx)
{
    std::lock_guard lock(_mutex);
    try
    {
        ensure_started();
        return decode_call_result(request("tools/call", call_params(tool, args, ctx)));
    }
    catch (const std::exception& e)
    {
        shutdown();
        return ToolResult::failure(std::string("MCP transport failure: ") + e.what());
    }
}

HttpClient::HttpClient(std::string url, std::chrono::milliseconds timeout): _url(std::move(url)), _timeout(timeout) {}

nlohmann::json HttpClient::request(const std::string& method, const nlohmann::json& params)
{
    const auto id = _nextId++;
    const nlohmann::json body = {{"jsonrpc", "2.0"}, {"id", id}, {"method", method}, {"params", params}};
    const auto res = http::post(_url, body.dump(), "application/json", _timeout);
    if (res.status != 200)
        throw TransportError("MCP server returned HTTP " + std::to_string(res.status));
    try
    {
        return unwrap(nlohmann::json::parse(res.body), id);
    }
    catch (const nlohmann::json::parse_error& e)
    {
        throw TransportError(std::string("unparseable MCP response: ") + e.what());
    }
}

std::vector<tools::ToolDescriptor> HttpClient::list_tools()
{
    return decode_tool_list(request("tools/list", nlohmann::json::object()), _url);
}

ToolResult HttpClient::invoke(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx)
{
    try
    {
        return decode_call_result(request("tools/call", call_params(tool, args, ctx)));
    }
    catch (const std::exception& e)
    {
        return ToolResult::failure(std::string("MCP transport failure: ") + e.what());
    }
}

void bind_tools(tools::Toolbox& box, std::shared_ptr<Client> client, const std::vector<std::string>& names)
{
    if (!client)
        throw ConfigError("MCP client is null");
    auto remote = client->list_tools();
    std::vector<tools::ToolDescriptor> selected;
    if (names.empty())
        selected = std::move(remote);
    else
        for (const auto& n: names)
        {
            const auto it = std::find_if(remote.begin(), remote.end(), [&](const auto& d) { return d.name == n; });
            if (it == remote.end())
                throw ConfigError("MCP server " + client->address() + " does not offer tool '" + n + "'");
            selected.push_back(*it);
        }
    for (auto& d: selected)
    {
        const auto name = d.name;
        box.add(std::move(d), [client, name](const nlohmann::json& args, const tools::EpisodeContext& ctx) { return client->invoke(name, args, ctx); });
    }
}

} // namespace tracelab::mcp
