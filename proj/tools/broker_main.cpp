#include <csignal>
#include <cstdlib>
#include <iostream>
#include <thread>

#include <spdlog/spdlog.h>

#include "CLI11.hpp"
#include "nstream/broker/broker.hpp"
#include "nstream/broker/webhooks.hpp"
#include "nstream/connectors/sfu.hpp"
#include "nstream/net/ws_server.hpp"

namespace {

bool split_listen(const std::string& text, std::string& host, std::uint16_t& port) {
  auto colon = text.rfind(':');
  if (colon == std::string::npos) return false;
  host = text.substr(0, colon);
  try {
    auto p = std::stoul(text.substr(colon + 1));
    if (p > 65535) return false;
    port = static_cast<std::uint16_t>(p);
  } catch (const std::exception&) {
    return false;
  }
  return !host.empty();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Named-stream signaling broker"};
  std::string listen = "127.0.0.1:8080";
  std::string token;
  int idle_gc_seconds = 60;
  std::string log_level = "info";
  bool hashed_only = false;
  bool debug_endpoints = false;
  bool no_sfu = false;
  app.add_option("--listen", listen, "address:port to bind");
  app.add_option("--token", token, "static bearer token required at handshake");
  app.add_option("--idle-gc-seconds", idle_gc_seconds, "grace period before empty streams are dropped")
      ->check(CLI::PositiveNumber);
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error, critical or off");
  app.add_flag("--hashed-only", hashed_only, "refuse raw-name subscriptions");
  app.add_flag("--debug-endpoints", debug_endpoints, "serve the /streams registry snapshot");
  app.add_flag("--no-sfu", no_sfu, "do not serve the /sfu forwarding endpoint");
  CLI11_PARSE(app, argc, argv);

  spdlog::set_level(spdlog::level::from_str(log_level));

  nstream::WsServer::Options opts;
  if (!split_listen(listen, opts.address, opts.port)) {
    std::cerr << "--listen expects <address>:<port>\n";
    return 2;
  }
  opts.token = token;
  opts.debug_endpoints = debug_endpoints;

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  nstream::EventLoop loop(nstream::EventLoop::Mode::real_time);
  nstream::WebhookDispatcher webhooks;
  nstream::Broker broker(loop, {std::chrono::seconds(idle_gc_seconds), hashed_only}, &webhooks);
  nstream::SfuService sfu(loop);
  nstream::WsServer server(opts, loop, broker, no_sfu ? nullptr : &sfu);

  try {
    auto port = server.start();
    spdlog::info("listening on {}:{}", opts.address, port);
  } catch (const std::exception& e) {
    spdlog::critical("cannot start: {}", e.what());
    return 1;
  }

  bool stopping = false;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    loop.post([&] { stopping = true; });
  });

  while (!stopping) loop.run_for(std::chrono::milliseconds(200));
  spdlog::info("shutting down");
  server.stop();
  waiter.join();
  return 0;
}
