// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/tools.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <chrono>
#include <iosfwd>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

/// Model Context Protocol over JSON-RPC 2.0: a server exposing a Toolbox and
/// clients that bind remote tools back into a Toolbox.
///
/// Tool results travel as MCP content (`content[0].text`, `isError`) plus the
/// full ToolResult in `structuredContent`, so artifacts survive the wire.
/// Episode context travels in `params._meta`.
namespace tracelab::mcp
{

constexpr const char* kProtocolVersion = "2024-11-05";

/// Transport-independent request handler.
class Server
{
  public:
    /// `defaultArtifactRoot` is used when a call carries no artifact_root.
    explicit Server(const tools::Toolbox& box, std::string name = "tracelab-mcp", std::string defaultArtifactRoot = {});

    /// Returns the response object, or null for notifications.
    [[nodiscard]] nlohmann::json handle(const nlohmann::json& request) const;
    /// Parses one message; malformed JSON yields a JSON-RPC parse error.
    [[nodiscard]] std::string handle_text(const std::string& text) const;

    /// Newline-delimited JSON-RPC until EOF.
    void serve_stdio(std::istream& in, std::ostream& out) const;

  private:
    const tools::Toolbox& _box;
    std::string _name;
    std::string _defaultRoot;
};

/// JSON-RPC over HTTP POST (one request per POST, any path). Runs on a
/// background thread until stop() or destruction.
class HttpServer
{
  public:
    explicit HttpServer(const Server& server);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds and starts listening; port 0 picks a free port. Returns the port.
    int start(const std::string& host, int port);
    /// Blocks serving on the calling thread.
    void listen_blocking(const std::string& host, int port);
    void stop();

  private:
    struct Impl;
    std::unique_ptr<Impl> _impl;
};

class Client
{
  public:
    virtual ~Client() = default;
    virtual std::vector<tools::ToolDescriptor> list_tools() = 0;
    /// Transport and protocol failures come back as failed ToolResults.
    virtual ToolResult invoke(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx) = 0;
    [[nodiscard]] virtual std::string address() const = 0;
};

/// Spawns the server executable and speaks newline-delimited JSON-RPC over
/// its stdin/stdout. Requests are serialized; each waits at most `timeout`.
class StdioClient final: public Client
{
  public:
    StdioClient(std::vector<std::string> argv, std::chrono::milliseconds timeout = std::chrono::seconds(60));
    ~StdioClient() override;
    StdioClient(const StdioClient&) = delete;
    StdioClient& operator=(const StdioClient&) = delete;

    std::vector<tools::ToolDescriptor> list_tools() override;
    ToolResult invoke(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx) override;
    [[nodiscard]] std::string address() const override;

  private:
    nlohmann::json request(const std::string& method, const nlohmann::json& params);
    void ensure_started();
    void shutdown() noexcept;

    std::vector<std::string> _argv;
    std::chrono::milliseconds _timeout;
    std::mutex _mutex;
    int _pid = -1;
    int _toChild = -1;
    int _fromChild = -1;
    std::string _buffer;
    long long _nextId = 1;
};

class HttpClient final: public Client
{
  public:
    explicit HttpClient(std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(60));

    std::vector<tools::ToolDescriptor> list_tools() override;
    ToolResult invoke(const std::string& tool, const nlohmann::json& args, const tools::EpisodeContext& ctx) override;
    [[nodiscard]] std::string address() const override { return _url; }

  private:
    nlohmann::json request(const std::string& method, const nlohmann::json& params);

    std::string _url;
    std::chrono::milliseconds _timeout;
    std::atomic<long long> _nextId {1};
};

/// Registers the client's tools (all, or only `names`) with an mcp binding.
/// Throws TransportError when the server cannot be listed and ConfigError
/// when a requested name is missing.
void bind_tools(tools::Toolbox& box, std::shared_ptr<Client> client, const std::vector<std::string>& names = {});

/// Decodes a tools/call result into a ToolResult.
ToolResult decode_call_result(const nlohmann::json& result);
nlohmann::json encode_call_result(const ToolResult& r);

} // namespace tracelab::mcp
