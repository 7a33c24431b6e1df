#include "nstream/runtime/sim_network.hpp"

#include <algorithm>

namespace nstream {

struct SimNetwork::Conn {
  std::string host;
  std::string tag;
  LineService* service = nullptr;
  ClientTransport::Handlers client;
  std::shared_ptr<LinePeer> peer;
  std::uint64_t generation = 0;
  bool open = false;
  bool closed = false;
  Millis last_up{0};
  Millis last_down{0};
};

class SimServerPeer final : public LinePeer {
 public:
  SimServerPeer(SimNetwork& net, std::weak_ptr<SimNetwork::Conn> conn) : net_(net), conn_(std::move(conn)) {}

  void send(std::string line) override {
    if (auto c = conn_.lock()) net_.deliver_to_client(c, std::move(line));
  }
  void close() override {
    if (auto c = conn_.lock()) net_.sever(c, "closed by server", true, true);
  }

 private:
  SimNetwork& net_;
  std::weak_ptr<SimNetwork::Conn> conn_;
};

class SimClientTransport final : public ClientTransport {
 public:
  SimClientTransport(SimNetwork& net, std::string host, std::string tag)
      : net_(net), conn_(std::make_shared<SimNetwork::Conn>()) {
    conn_->host = std::move(host);
    conn_->tag = std::move(tag);
  }
  ~SimClientTransport() override { close(); }

  void open(Handlers handlers) override {
    conn_->client = std::move(handlers);
    net_.conns_.push_back(conn_);
    auto c = conn_;
    auto& net = net_;
    net_.sched_.post_after(net_.sample_latency(), [&net, c] {
      if (c->closed) return;
      auto it = net.hosts_.find(c->host);
      if (it == net.hosts_.end()) {
        c->closed = true;
        if (c->client.on_close) c->client.on_close("connection refused");
        return;
      }
      c->service = it->second.service;
      c->generation = it->second.generation;
      c->open = true;
      c->peer = std::make_shared<SimServerPeer>(net, c);
      c->service->on_open(c->peer);
      if (!c->closed && c->client.on_open) c->client.on_open();
    });
  }

  void send(std::string line) override {
    if (conn_->closed) return;
    net_.deliver_to_server(conn_, std::move(line));
  }

  void close() override {
    if (conn_->closed) return;
    conn_->client = {};
    net_.sever(conn_, "closed by client", false, true);
  }

 private:
  SimNetwork& net_;
  std::shared_ptr<SimNetwork::Conn> conn_;
};

SimNetwork::SimNetwork(Scheduler& sched, std::uint64_t seed) : SimNetwork(sched, seed, Options{}) {}

SimNetwork::SimNetwork(Scheduler& sched, std::uint64_t seed, Options options)
    : sched_(sched), options_(options), rng_(seed) {}

SimNetwork::~SimNetwork() = default;

void SimNetwork::listen(const std::string& host, LineService& service) { hosts_[host] = Host{&service, ++generation_}; }

void SimNetwork::shutdown(const std::string& host) {
  hosts_.erase(host);
  for (auto& w : conns_) {
    if (auto c = w.lock(); c && c->host == host && !c->closed) sever(c, "server shutdown", true, true);
  }
}

TransportFactory SimNetwork::factory(std::string tag) {
  return [this, tag](const std::string& origin, const std::string&) -> std::unique_ptr<ClientTransport> {
    return std::make_unique<SimClientTransport>(*this, origin_host(origin), tag);
  };
}

std::size_t SimNetwork::drop(const std::string& tag) {
  std::size_t n = 0;
  for (auto& w : conns_) {
    if (auto c = w.lock(); c && c->tag == tag && !c->closed) {
      sever(c, "transport dropped", true, true);
      ++n;
    }
  }
  return n;
}

std::size_t SimNetwork::open_connections() const {
  return static_cast<std::size_t>(std::count_if(conns_.begin(), conns_.end(), [](const auto& w) {
    auto c = w.lock();
    return c && c->open && !c->closed;
  }));
}

Millis SimNetwork::sample_latency() {
  std::uniform_int_distribution<std::int64_t> dist(options_.min_latency.count(), options_.max_latency.count());
  return Millis(dist(rng_));
}

bool SimNetwork::serving(const Conn& c) const {
  if (c.service == nullptr) return false;
  auto it = hosts_.find(c.host);
  return it != hosts_.end() && it->second.generation == c.generation;
}

Millis SimNetwork::fifo_time(Millis& last) {
  auto at = std::max(last, sched_.now() + sample_latency());
  last = at;
  return at;
}

void SimNetwork::deliver_to_server(const std::shared_ptr<Conn>& c, std::string line) {
  sched_.post_at(fifo_time(c->last_up), [this, c, line = std::move(line)] {
    if (!serving(*c)) return;
    c->service->on_line(c->peer, line);
  });
}

void SimNetwork::deliver_to_client(const std::shared_ptr<Conn>& c, std::string line) {
  if (c->closed) return;
  sched_.post_at(fifo_time(c->last_down), [c, line = std::move(line)] {
    if (c->client.on_line) c->client.on_line(line);
  });
}

void SimNetwork::sever(const std::shared_ptr<Conn>& c, const std::string& reason, bool notify_client,
                       bool notify_server) {
  if (c->closed) return;
  c->closed = true;
  bool was_open = c->open;
  c->open = false;
  auto handlers = notify_client ? c->client : ClientTransport::Handlers{};
  // Close notifications queue behind data already in flight.
  if (notify_client && handlers.on_close) {
    sched_.post_at(fifo_time(c->last_down), [handlers, reason] { handlers.on_close(reason); });
  }
  if (notify_server && was_open && c->service) {
    sched_.post_at(fifo_time(c->last_up), [this, c] {
      if (serving(*c)) c->service->on_close(c->peer);
    });
  }
}

std::string origin_host(const std::string& origin) {
  auto start = origin.find("://");
  start = start == std::string::npos ? 0 : start + 3;
  auto end = origin.find_first_of("/?", start);
  return origin.substr(start, end == std::string::npos ? std::string::npos : end - start);
}

}  // namespace nstream
