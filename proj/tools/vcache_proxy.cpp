// vcache-proxy: chat-completions caching proxy.

#include <csignal>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "vcache/service.hpp"

namespace {
vcache::ProxyService* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}
}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"vcache-proxy: semantic caching proxy for chat completions"};
  std::string config_path;
  app.add_option("--config", config_path, "config file")->required()->check(CLI::ExistingFile);
  CLI11_PARSE(app, argc, argv);

  try {
    vcache::ServiceConfig config = vcache::load_config(config_path);
    auto service = std::make_unique<vcache::ProxyService>(config);
    g_service = service.get();
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "vcache-proxy: listening on " << config.listen_host << ":" << config.listen_port
              << " (policy " << vcache::policy_name(config.policy) << ")\n";
    service->run();
    g_service = nullptr;
  } catch (const std::exception& e) {
    std::cerr << "vcache-proxy: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
