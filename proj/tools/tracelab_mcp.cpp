// SPDX-License-Identifier: Apache-2.0
#include "tracelab/common.hpp"
#include "tracelab/config.hpp"
#include "tracelab/mcp.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace tracelab;

namespace
{

// Diagnostic tool for wire tests: returns its text argument unchanged.
tools::ToolDescriptor echo_descriptor()
{
    tools::ToolDescriptor d;
    d.name = "echo";
    d.doc = "Returns the given text.";
    tools::ParamSpec p;
    p.name = "text";
    p.required = true;
    p.doc = "Text to return.";
    d.params.push_back(p);
    return d;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app {"tracelab-mcp: serve the simulated tool registry over MCP"};
    std::string configPath, casesDir, transport = "stdio", host = "127.0.0.1", artifactRoot;
    int port = 0;
    bool echo = false;
    app.add_option("-c,--config", configPath, "JSON configuration file (noise profile, vocabulary)")->check(CLI::ExistingFile);
    app.add_option("--cases", casesDir, "Case directory from simgen");
    app.add_option("--transport", transport, "stdio | http")->check(CLI::IsMember({"stdio", "http"}))->capture_default_str();
    app.add_option("--host", host, "HTTP bind address")->capture_default_str();
    app.add_option("--port", port, "HTTP port (0: pick one and print it)")->capture_default_str();
    app.add_option("--artifact-root", artifactRoot, "Artifact root for calls that carry none");
    app.add_flag("--echo", echo, "Also expose an echo tool");
    CLI11_PARSE(app, argc, argv);

    try
    {
        const auto config = configPath.empty() ? Config {} : Config::load(configPath);
        const auto vocab = load_vocabulary(config);
        auto store = std::make_shared<sim::CaseStore>(*vocab, casesDir);
        auto box = tools::make_sim_toolbox(store, config.noise);
        if (echo)
            box.add(echo_descriptor(), [](const nlohmann::json& args, const tools::EpisodeContext&) {
                return ToolResult::ok(args.at("text").get<std::string>());
            });
        const mcp::Server server(box, "tracelab-mcp", artifactRoot);
        if (transport == "stdio")
        {
            server.serve_stdio(std::cin, std::cout);
            return 0;
        }
        mcp::HttpServer http(server);
        if (port == 0)
        {
            const int bound = http.start(host, 0);
            std::cout << "http://" << host << ":" << bound << "/mcp" << std::endl;
            std::string line;
            while (std::getline(std::cin, line))
            {
            }
            http.stop();
            return 0;
        }
        http.listen_blocking(host, port);
    }
    catch (const ConfigError& e)
    {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    catch (const std::exception& e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
