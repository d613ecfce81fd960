#include "pitchcoach/service/http_server.h"

#include <atomic>
#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <deque>
#include <iostream>
#include <map>

#include "pitchcoach/error.h"

namespace pitchcoach::service {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

HttpResponse json_response(int status, const nlohmann::json& body) {
  return {status, "application/json", body.dump()};
}

HttpResponse error_response(int status, const std::string& what) {
  return json_response(status, {{"error", what}});
}

std::vector<std::string> split_path(std::string target) {
  if (const auto q = target.find('?'); q != std::string::npos) target.resize(q);
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (pos < target.size()) {
    const std::size_t slash = target.find('/', pos);
    const std::size_t end = slash == std::string::npos ? target.size() : slash;
    if (end > pos) parts.push_back(target.substr(pos, end - pos));
    pos = end + 1;
  }
  return parts;
}

}  // namespace

bool OutboundQueue::push(const StreamMessage& m) {
  if (items_.size() >= limit_) {
    const std::size_t first = writing_ ? 1 : 0;
    for (std::size_t i = first; i < items_.size(); ++i) {
      if (items_[i].droppable) {
        items_.erase(items_.begin() + static_cast<std::ptrdiff_t>(i));
        ++dropped_;
        break;
      }
    }
    if (m.droppable() && items_.size() >= limit_) {
      ++dropped_;
      return false;
    }
  }
  items_.push_back({m.to_line(), m.droppable()});
  return true;
}

const std::string& OutboundQueue::begin_write() {
  writing_ = true;
  return items_.front().text;
}

void OutboundQueue::finish_write() {
  items_.pop_front();
  writing_ = false;
}

HttpResponse route_get(const DataStore& store, const std::string& target) {
  const auto parts = split_path(target);
  try {
    if (parts.size() == 1 && parts[0] == "melodies") return json_response(200, store.list_melodies());
    if (parts.size() == 1 && parts[0] == "sessions") return json_response(200, store.list_sessions());
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "log") {
      return {200, "application/x-ndjson", store.fetch_log(parts[1])};
    }
    if (parts.size() == 3 && parts[0] == "sessions" && parts[2] == "score") {
      return json_response(200, store.fetch_score(parts[1]));
    }
    if (parts.size() == 2 && parts[0] == "melodies") return json_response(200, store.melody(parts[1]));
  } catch (const NotFound& e) {
    return error_response(404, e.what());
  } catch (const InputError& e) {
    return error_response(422, e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
  return error_response(404, "no route for " + target);
}

class WsSession;

struct HttpServer::Impl : std::enable_shared_from_this<HttpServer::Impl> {
  explicit Impl(ServerOptions opts)
      : options(std::move(opts)), store(options.data_dir), hub(DataStore(options.data_dir), options.hub), acceptor(io) {}

  void deliver(std::vector<Outgoing> out);
  void accept();

  ServerOptions options;
  asio::io_context io;
  DataStore store;
  LiveHub hub;
  tcp::acceptor acceptor;
  std::map<ConnectionId, std::weak_ptr<WsSession>> sessions;
  std::atomic<std::size_t> dropped{0};
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(std::shared_ptr<HttpServer::Impl> server, tcp::socket socket)
      : server_(std::move(server)), ws_(std::move(socket)) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.set_option(websocket::stream_base::decorator([](websocket::response_type& res) {
      res.set(http::field::server, "pitchcoach");
    }));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->id_ = self->server_->hub.connect();
      self->server_->sessions[self->id_] = self->weak_from_this();
      self->read();
    });
  }

  void enqueue(const StreamMessage& m) {
    if (closed_) return;
    const std::size_t before = queue_.dropped();
    queue_.push(m);
    server_->dropped += queue_.dropped() - before;
    if (!queue_.writing()) write_next();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_read(ec); });
  }

  void on_read(beast::error_code ec) {
    if (ec) {
      close();
      return;
    }
    std::vector<Outgoing> out;
    try {
      if (ws_.got_text()) {
        out = server_->hub.handle_text(id_, beast::buffers_to_string(buffer_.data()));
      } else {
        const auto data = buffer_.data();
        out = server_->hub.handle_audio(
            id_, std::span<const std::uint8_t>(static_cast<const std::uint8_t*>(data.data()), data.size()));
      }
    } catch (const std::exception& e) {
      out.push_back({id_, error_message(e.what())});
    }
    buffer_.consume(buffer_.size());
    server_->deliver(std::move(out));
    read();
  }

  void write_next() {
    if (queue_.empty() || closed_) return;
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.begin_write()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->queue_.finish_write();
      if (ec) {
        self->close();
        return;
      }
      self->write_next();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    server_->sessions.erase(id_);
    if (id_ != 0) server_->deliver(server_->hub.disconnect(id_));
  }

  std::shared_ptr<HttpServer::Impl> server_;
  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  OutboundQueue queue_{server_->options.queue_limit};
  bool closed_ = false;
  ConnectionId id_ = 0;
};

void HttpServer::Impl::deliver(std::vector<Outgoing> out) {
  for (const Outgoing& o : out) {
    if (o.to) {
      if (auto it = sessions.find(*o.to); it != sessions.end()) {
        if (auto s = it->second.lock()) s->enqueue(o.message);
      }
      continue;
    }
    // Copy: enqueue may close a session and erase it from the map.
    const auto targets = sessions;
    for (const auto& [id, weak] : targets) {
      if (!hub.greeted(id)) continue;
      if (auto s = weak.lock()) s->enqueue(o.message);
    }
  }
}

namespace {

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(std::shared_ptr<HttpServer::Impl> server, tcp::socket socket)
      : server_(std::move(server)), stream_(std::move(socket)) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->on_request();
    });
  }

 private:
  void on_request() {
    const std::string target(req_.target());
    if (websocket::is_upgrade(req_)) {
      if (target == "/live" || target.rfind("/live?", 0) == 0) {
        stream_.expires_never();
        std::make_shared<WsSession>(server_, stream_.release_socket())->start(std::move(req_));
        return;
      }
    }
    HttpResponse r;
    if (req_.method() == http::verb::options) {
      r = {204, "text/plain", ""};
    } else if (req_.method() != http::verb::get && req_.method() != http::verb::head) {
      r = {405, "application/json", nlohmann::json{{"error", "method not allowed"}}.dump()};
    } else {
      r = route_get(server_->store, target);
    }
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(r.status), req_.version());
    res->set(http::field::server, "pitchcoach");
    res->set(http::field::content_type, r.content_type);
    res->set(http::field::access_control_allow_origin, "*");
    res->set(http::field::access_control_allow_methods, "GET, OPTIONS");
    res->keep_alive(req_.keep_alive());
    if (req_.method() != http::verb::head) res->body() = std::move(r.body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec) return;
      if (!res->keep_alive()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  std::shared_ptr<HttpServer::Impl> server_;
  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

void HttpServer::Impl::accept() {
  acceptor.async_accept([self = shared_from_this()](beast::error_code ec, tcp::socket socket) {
    if (ec) return;
    std::make_shared<HttpSession>(self, std::move(socket))->read();
    self->accept();
  });
}

HttpServer::HttpServer(ServerOptions options) : impl_(std::make_shared<Impl>(std::move(options))) {
  beast::error_code ec;
  const auto addr = asio::ip::make_address(impl_->options.address == "localhost" ? "127.0.0.1" : impl_->options.address, ec);
  if (ec) throw InputError("bad listen address: " + impl_->options.address);
  const tcp::endpoint ep(addr, impl_->options.port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(ep, ec);
  if (ec) throw InputError("cannot listen on port " + std::to_string(impl_->options.port) + ": " + ec.message());
  impl_->acceptor.listen();
}

HttpServer::~HttpServer() = default;

std::uint16_t HttpServer::port() const { return impl_->acceptor.local_endpoint().port(); }

std::size_t HttpServer::dropped_messages() const { return impl_->dropped.load(); }

void HttpServer::run() {
  impl_->accept();
  impl_->io.run();
}

void HttpServer::stop() {
  asio::post(impl_->io, [impl = impl_] {
    beast::error_code ec;
    impl->acceptor.close(ec);
    impl->io.stop();
  });
}

}  // namespace pitchcoach::service
