#pragma once

// HTTP and websocket front end for the planner worker: GET /health,
// GET /scenario and JSON text frames on /ws.

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mtlsynth/reactive/worker.hpp"

namespace mtlsynth::reactive {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct ServerOptions {
  std::string address = "127.0.0.1";
  /// 0 picks a free port; see Server::port().
  unsigned short port = 8080;
  ClockMode clock = ClockMode::Simulated;
  /// Pace steps at dt / speed; off runs steps back to back.
  bool pace = true;
  /// Shut down after the run's done message has been sent.
  bool exit_when_done = false;
};

class WebSocketSession;

/// Client registry and the published worker status. Holds no planner state.
class Hub {
public:
  int add(const std::shared_ptr<WebSocketSession>& s) {
    std::lock_guard lk(mutex_);
    const int id = next_id_++;
    clients_[id] = s;
    return id;
  }

  void remove(int id) {
    std::lock_guard lk(mutex_);
    clients_.erase(id);
  }

  inline void deliver(const Outbound& o);

  void set_status(const WorkerStatus& s) {
    std::lock_guard lk(mutex_);
    status_ = s;
  }

  WorkerStatus status() const {
    std::lock_guard lk(mutex_);
    return status_;
  }

private:
  mutable std::mutex mutex_;
  std::map<int, std::weak_ptr<WebSocketSession>> clients_;
  int next_id_ = 1;
  WorkerStatus status_;
};

class WebSocketSession : public std::enable_shared_from_this<WebSocketSession> {
public:
  WebSocketSession(tcp::socket socket, Hub& hub, PlannerWorker& worker)
      : ws_(std::move(socket)), hub_(hub), worker_(worker) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  /// Thread-safe: queues a text frame on the connection's executor.
  void send(std::shared_ptr<const std::string> msg) {
    net::post(ws_.get_executor(), [self = shared_from_this(), msg = std::move(msg)] {
      self->queue_.push_back(msg);
      if (self->queue_.size() == 1) self->write_next();
    });
  }

private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    id_ = hub_.add(shared_from_this());
    worker_.post_join(id_);
    read_next();
  }

  void read_next() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      close();
      return;
    }
    worker_.post_command(id_, beast::buffers_to_string(buffer_.data()));
    buffer_.consume(buffer_.size());
    read_next();
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(net::buffer(*queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->close();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) self->write_next();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    hub_.remove(id_);
    worker_.post_leave(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  std::deque<std::shared_ptr<const std::string>> queue_;
  Hub& hub_;
  PlannerWorker& worker_;
  int id_ = 0;
  bool closed_ = false;
};

inline void Hub::deliver(const Outbound& o) {
  auto msg = std::make_shared<const std::string>(o.text);
  std::vector<std::shared_ptr<WebSocketSession>> targets;
  {
    std::lock_guard lk(mutex_);
    for (const auto& [id, weak] : clients_) {
      if (o.client && *o.client != id) continue;
      if (auto s = weak.lock()) targets.push_back(std::move(s));
    }
  }
  for (const auto& s : targets) s->send(msg);
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
public:
  HttpSession(tcp::socket socket, Hub& hub, PlannerWorker& worker)
      : stream_(std::move(socket)), hub_(hub), worker_(worker) {}

  void run() { read_next(); }

private:
  void read_next() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      beast::error_code ignored;
      stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
      return;
    }
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WebSocketSession>(stream_.release_socket(), hub_, worker_)->run(std::move(req_));
        return;
      }
    }
    auto res = std::make_shared<http::response<http::string_body>>(respond());
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code wec, std::size_t) {
      if (wec || !res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read_next();
    });
  }

  http::response<http::string_body> respond() const {
    const auto reply = [this](http::status status, std::string body) {
      http::response<http::string_body> res{status, req_.version()};
      res.set(http::field::content_type, "application/json");
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(req_.keep_alive());
      res.body() = std::move(body);
      res.prepare_payload();
      return res;
    };
    const std::string target(req_.target());
    const bool known = target == "/health" || target == "/scenario" || target == "/ws";
    if (!known) return reply(http::status::not_found, R"({"error":"not found"})");
    if (req_.method() != http::verb::get) return reply(http::status::method_not_allowed, R"({"error":"method not allowed"})");
    if (target == "/ws") return reply(http::status::upgrade_required, R"({"error":"websocket upgrade required"})");
    const WorkerStatus s = hub_.status();
    if (target == "/scenario") return reply(http::status::ok, s.scenario);
    const nlohmann::json h = {{"v", kProtocolVersion}, {"status", "ok"},   {"step", s.step},
                              {"horizon", s.horizon},  {"paused", s.paused}, {"done", s.done},
                              {"speed", s.speed},      {"clients", s.clients}, {"seq", s.seq}};
    return reply(http::status::ok, h.dump());
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
  Hub& hub_;
  PlannerWorker& worker_;
};

/// Owns the network thread and the planner worker for one session.
class Server {
public:
  Server(Session& session, ServerOptions options)
      : options_(std::move(options)),
        worker_(
            session, options_.clock, [this](const Outbound& o) { on_message(o); },
            [this](const WorkerStatus& s) { hub_.set_status(s); }, options_.pace, options_.exit_when_done),
        acceptor_(ioc_) {
    const tcp::endpoint ep{net::ip::make_address(options_.address), options_.port};
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen(net::socket_base::max_listen_connections);
    hub_.set_status(status_of(session));
  }

  ~Server() {
    stop();
    wait();
  }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  /// Starts accepting connections and stepping the session.
  void start() {
    accept_next();
    io_thread_ = std::thread([this] { ioc_.run(); });
    worker_.start();
  }

  /// Blocks until the worker stops (on stop() or, with exit_when_done, after
  /// the done message), then drains outgoing frames and closes the network.
  void wait() {
    worker_.join();
    if (io_thread_.joinable()) {
      net::post(ioc_, [this] {
        beast::error_code ignored;
        acceptor_.close(ignored);
      });
      // Queued frames get a moment to flush before the context stops.
      std::this_thread::sleep_for(std::chrono::milliseconds(300));
      ioc_.stop();
      io_thread_.join();
    }
  }

  void stop() { worker_.stop(); }

private:
  void on_message(const Outbound& o) { hub_.deliver(o); }

  void accept_next() {
    acceptor_.async_accept(net::make_strand(ioc_), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) return;
      std::make_shared<HttpSession>(std::move(socket), hub_, worker_)->run();
      accept_next();
    });
  }

  ServerOptions options_;
  Hub hub_;
  PlannerWorker worker_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::thread io_thread_;
};

}  // namespace mtlsynth::reactive
