#include "nstream/net/ws_server.hpp"

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <deque>
#include <future>
#include <thread>

#include <spdlog/spdlog.h>

#include "nstream/broker/broker.hpp"
#include "nstream/protocol/codec.hpp"
#include "nstream/protocol/payloads.hpp"

namespace nstream {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;

namespace {

std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    if (end > start) out.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

std::string overflow_line() {
  SignalEnvelope env;
  env.from = EndpointId("broker");
  env.kind = MessageKind::error;
  env.payload = ErrorPayload{Errc::overflow, "outbound queue full"}.dump();
  return encode(env);
}

std::string query_param(std::string_view target, std::string_view key) {
  auto q = target.find('?');
  if (q == std::string_view::npos) return {};
  auto query = target.substr(q + 1);
  while (!query.empty()) {
    auto amp = query.find('&');
    auto pair = query.substr(0, amp);
    auto eq = pair.find('=');
    if (eq != std::string_view::npos && pair.substr(0, eq) == key) return std::string(pair.substr(eq + 1));
    if (amp == std::string_view::npos) break;
    query = query.substr(amp + 1);
  }
  return {};
}

}  // namespace

struct WsServer::Impl {
  Options options;
  Scheduler& loop;
  Broker& broker;
  LineService* sfu;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;

  Impl(Options o, Scheduler& l, Broker& b, LineService* s) : options(std::move(o)), loop(l), broker(b), sfu(s) {}

  void do_accept();
};

namespace {

class WsSession;

class SessionPeer final : public LinePeer {
 public:
  SessionPeer(std::weak_ptr<WsSession> session, net::io_context& ioc) : session_(std::move(session)), ioc_(ioc) {}
  void send(std::string line) override;
  void close() override;

 private:
  std::weak_ptr<WsSession> session_;
  net::io_context& ioc_;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, WsServer::Impl& server, LineService& service)
      : ws_(std::move(socket)), server_(server), service_(service) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void enqueue(std::string line) {
    if (closing_) return;
    if (outbox_.size() >= server_.options.outbox_limit) {
      spdlog::warn("outbound queue overflow, closing connection");
      outbox_.push_back(overflow_line());
      request_close();
      if (!writing_) write_next();
      return;
    }
    outbox_.push_back(std::move(line));
    if (!writing_) write_next();
  }

  void request_close() {
    closing_ = true;
    if (!writing_) do_close();
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    peer_ = std::make_shared<SessionPeer>(weak_from_this(), server_.ioc);
    server_.loop.post([svc = &service_, peer = peer_] { svc->on_open(peer); });
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) return on_closed();
    auto text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    for (auto& line : split_lines(text)) {
      server_.loop.post([svc = &service_, peer = peer_, line = std::move(line)] { svc->on_line(peer, line); });
    }
    do_read();
  }

  void on_closed() {
    if (closed_) return;
    closed_ = true;
    closing_ = true;
    server_.loop.post([svc = &service_, peer = peer_] { svc->on_close(peer); });
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()),
                    [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_write(ec); });
  }

  void on_write(beast::error_code ec) {
    writing_ = false;
    if (ec) return on_closed();
    outbox_.pop_front();
    if (!outbox_.empty()) return write_next();
    if (closing_) do_close();
  }

  void do_close() {
    if (close_sent_ || closed_) return;
    close_sent_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  websocket::stream<beast::tcp_stream> ws_;
  WsServer::Impl& server_;
  LineService& service_;
  std::shared_ptr<SessionPeer> peer_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool writing_ = false;
  bool closing_ = false;
  bool close_sent_ = false;
  bool closed_ = false;
};

void SessionPeer::send(std::string line) {
  net::post(ioc_, [s = session_, line = std::move(line)]() mutable {
    if (auto p = s.lock()) p->enqueue(std::move(line));
  });
}

void SessionPeer::close() {
  net::post(ioc_, [s = session_] {
    if (auto p = s.lock()) p->request_close();
  });
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, WsServer::Impl& server) : stream_(std::move(socket)), server_(server) {}

  void run() {
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

 private:
  bool authorized() const {
    const auto& token = server_.options.token;
    if (token.empty()) return true;
    std::string target(req_.target());
    if (query_param(target, "token") == token) return true;
    auto auth = req_[http::field::authorization];
    return auth == "Bearer " + token;
  }

  void on_read(beast::error_code ec) {
    if (ec) return;
    std::string target(req_.target());
    auto path = target.substr(0, target.find('?'));

    if (websocket::is_upgrade(req_)) {
      LineService* service = nullptr;
      if (path == "/ws") service = &server_.broker;
      if (path == "/sfu") service = server_.sfu;
      if (service == nullptr) return respond(http::status::not_found, "no such endpoint\n");
      if (!authorized()) return respond(http::status::unauthorized, "bad token\n");
      stream_.expires_never();
      std::make_shared<WsSession>(stream_.release_socket(), server_, *service)->run(std::move(req_));
      return;
    }
    if (path == "/healthz") return respond(http::status::ok, "ok\n");
    if (path == "/streams" && server_.options.debug_endpoints) {
      if (!authorized()) return respond(http::status::unauthorized, "bad token\n");
      auto promise = std::make_shared<std::promise<std::string>>();
      auto result = promise->get_future();
      server_.loop.post([promise, broker = &server_.broker] { promise->set_value(broker->snapshot()); });
      if (result.wait_for(std::chrono::seconds(2)) != std::future_status::ready)
        return respond(http::status::service_unavailable, "busy\n");
      return respond(http::status::ok, result.get(), "application/json");
    }
    respond(http::status::not_found, "not found\n");
  }

  void respond(http::status status, std::string body, const char* type = "text/plain") {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, type);
    res->keep_alive(false);
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
      beast::error_code ignored;
      self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
    });
  }

  beast::tcp_stream stream_;
  WsServer::Impl& server_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

void WsServer::Impl::do_accept() {
  acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
    if (ec) {
      if (ec != net::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
      if (!acceptor.is_open()) return;
    } else {
      std::make_shared<HttpSession>(std::move(socket), *this)->run();
    }
    do_accept();
  });
}

WsServer::WsServer(Options options, Scheduler& loop, Broker& broker, LineService* sfu)
    : impl_(std::make_unique<Impl>(std::move(options), loop, broker, sfu)) {}

WsServer::~WsServer() { stop(); }

std::uint16_t WsServer::start() {
  auto endpoint = tcp::endpoint(net::ip::make_address(impl_->options.address), impl_->options.port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(net::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen(net::socket_base::max_listen_connections);
  impl_->do_accept();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
  return impl_->acceptor.local_endpoint().port();
}

void WsServer::stop() {
  if (!impl_ || !impl_->thread.joinable()) return;
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->ioc.stop();
  impl_->thread.join();
}

// --- client -------------------------------------------------------------------

struct WsClientContext::Impl {
  Scheduler& loop;
  net::io_context ioc{1};
  net::executor_work_guard<net::io_context::executor_type> work{ioc.get_executor()};
  std::thread thread;

  explicit Impl(Scheduler& l) : loop(l) {
    thread = std::thread([this] { ioc.run(); });
  }
  ~Impl() {
    work.reset();
    ioc.stop();
    if (thread.joinable()) thread.join();
  }
};

namespace {

class ClientConn : public std::enable_shared_from_this<ClientConn> {
 public:
  ClientConn(net::io_context& ioc, Scheduler& loop, ClientTransport::Handlers handlers,
             std::shared_ptr<std::atomic<bool>> cancelled)
      : resolver_(ioc), ws_(ioc), loop_(loop), handlers_(std::move(handlers)), cancelled_(std::move(cancelled)) {}

  void start(std::string host, std::string port, std::string path) {
    host_ = host;
    path_ = std::move(path);
    resolver_.async_resolve(host, port, [self = shared_from_this()](beast::error_code ec, tcp::resolver::results_type r) {
      if (ec) return self->fail("resolve: " + ec.message());
      beast::get_lowest_layer(self->ws_).expires_after(std::chrono::seconds(5));
      beast::get_lowest_layer(self->ws_).async_connect(r, [self](beast::error_code ec, const tcp::endpoint&) {
        if (ec) return self->fail("connect: " + ec.message());
        beast::get_lowest_layer(self->ws_).expires_never();
        self->ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::client));
        self->ws_.async_handshake(self->host_, self->path_, [self](beast::error_code ec) {
          if (ec) return self->fail("handshake: " + ec.message());
          self->open_ = true;
          self->post([h = self->handlers_.on_open] {
            if (h) h();
          });
          self->do_read();
          if (!self->outbox_.empty() && !self->writing_) self->write_next();
        });
      });
    });
  }

  void enqueue(std::string line) {
    if (failed_) return;
    outbox_.push_back(std::move(line));
    if (open_ && !writing_) write_next();
  }

  void close() {
    closing_ = true;
    if (open_ && !writing_) do_close();
  }

 private:
  template <typename F>
  void post(F fn) {
    loop_.post([cancelled = cancelled_, fn = std::move(fn)] {
      if (!*cancelled) fn();
    });
  }

  void fail(const std::string& reason) {
    if (failed_) return;
    failed_ = true;
    post([h = handlers_.on_close, reason] {
      if (h) h(reason);
    });
  }

  void do_read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->fail("read: " + ec.message());
      auto text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      for (auto& line : split_lines(text)) {
        self->post([h = self->handlers_.on_line, line = std::move(line)] {
          if (h) h(line);
        });
      }
      self->do_read();
    });
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(net::buffer(outbox_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->fail("write: " + ec.message());
      self->outbox_.pop_front();
      if (!self->outbox_.empty()) return self->write_next();
      if (self->closing_) self->do_close();
    });
  }

  void do_close() {
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  tcp::resolver resolver_;
  websocket::stream<beast::tcp_stream> ws_;
  Scheduler& loop_;
  ClientTransport::Handlers handlers_;
  std::shared_ptr<std::atomic<bool>> cancelled_;
  std::string host_;
  std::string path_;
  beast::flat_buffer buffer_;
  std::deque<std::string> outbox_;
  bool open_ = false;
  bool writing_ = false;
  bool closing_ = false;
  bool failed_ = false;
};

class WsClientTransport final : public ClientTransport {
 public:
  WsClientTransport(std::shared_ptr<WsClientContext::Impl> ctx, std::string origin, std::string path)
      : ctx_(std::move(ctx)), origin_(std::move(origin)), path_(std::move(path)) {}

  ~WsClientTransport() override { close(); }

  void open(Handlers handlers) override {
    std::string rest;
    if (origin_.rfind("ws://", 0) == 0) {
      rest = origin_.substr(5);
    } else {
      ctx_->loop.post([h = handlers.on_close, o = origin_] {
        if (h) h("unsupported origin " + o);
      });
      return;
    }
    auto colon = rest.rfind(':');
    auto host = colon == std::string::npos ? rest : rest.substr(0, colon);
    auto port = colon == std::string::npos ? std::string("80") : rest.substr(colon + 1);
    conn_ = std::make_shared<ClientConn>(ctx_->ioc, ctx_->loop, std::move(handlers), cancelled_);
    net::post(ctx_->ioc, [c = conn_, host, port, path = path_] { c->start(host, port, path); });
  }

  void send(std::string line) override {
    if (!conn_) return;
    net::post(ctx_->ioc, [c = conn_, line = std::move(line)]() mutable { c->enqueue(std::move(line)); });
  }

  void close() override {
    *cancelled_ = true;
    if (!conn_) return;
    net::post(ctx_->ioc, [c = conn_] { c->close(); });
    conn_.reset();
  }

 private:
  std::shared_ptr<WsClientContext::Impl> ctx_;
  std::string origin_;
  std::string path_;
  std::shared_ptr<ClientConn> conn_;
  std::shared_ptr<std::atomic<bool>> cancelled_ = std::make_shared<std::atomic<bool>>(false);
};

}  // namespace

WsClientContext::WsClientContext(Scheduler& loop) : impl_(std::make_shared<Impl>(loop)) {}

WsClientContext::~WsClientContext() = default;

TransportFactory WsClientContext::factory() {
  return [impl = impl_](const std::string& origin, const std::string& path) -> std::unique_ptr<ClientTransport> {
    return std::make_unique<WsClientTransport>(impl, origin, path);
  };
}

}  // namespace nstream
