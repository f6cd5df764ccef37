#include "vulncity/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include <deque>
#include <fstream>
#include <map>
#include <sstream>

namespace vulncity::net {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

namespace {

std::string_view mime_type(const std::filesystem::path& p) {
  auto ext = p.extension().string();
  if (ext == ".html") return "text/html; charset=utf-8";
  if (ext == ".js" || ext == ".mjs") return "text/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

}  // namespace

class WsSession;
class HttpSession;

struct CollabServer::Impl {
  explicit Impl(ServerOptions opts)
      : options(std::move(opts)), hub(options.sceneHash, options.overlayKeys, options.hub), acceptor(io), ticker(io) {}

  ServerOptions options;
  collab::SessionHub hub;
  asio::io_context io;
  tcp::acceptor acceptor;
  asio::steady_timer ticker;
  std::map<collab::ConnectionId, std::shared_ptr<WsSession>> sessions;
  collab::ConnectionId nextConnection = 0;

  void accept();
  void schedule_tick();
  void dispatch(std::vector<collab::Outgoing> out);
  http::response<http::string_body> respond(const http::request<http::string_body>& req) const;
};

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(CollabServer::Impl& server, tcp::socket socket, collab::ConnectionId id)
      : server_(server), ws_(std::move(socket)), id_(id) {}

  void start(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      self->server_.sessions.emplace(self->id_, self);
      self->read();
    });
  }

  void send(const std::string& text) {
    if (closing_) return;
    queue_.push_back(text);
    if (queue_.size() == 1) write_next();
  }

  void close_after_flush() {
    closeRequested_ = true;
    if (queue_.empty()) close();
  }

 private:
  void read() {
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->disconnected();
        return;
      }
      std::string text = beast::buffers_to_string(self->buffer_.data());
      self->buffer_.consume(self->buffer_.size());
      self->server_.dispatch(self->server_.hub.on_text(self->id_, text, collab::Clock::now()));
      self->read();
    });
  }

  void write_next() {
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) {
        self->queue_.clear();
        return;
      }
      self->queue_.pop_front();
      if (!self->queue_.empty()) {
        self->write_next();
      } else if (self->closeRequested_) {
        self->close();
      }
    });
  }

  void close() {
    if (closing_) return;
    closing_ = true;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) {});
  }

  void disconnected() {
    if (server_.sessions.erase(id_) == 0) return;
    server_.dispatch(server_.hub.on_disconnect(id_, collab::Clock::now()));
  }

  CollabServer::Impl& server_;
  websocket::stream<beast::tcp_stream> ws_;
  collab::ConnectionId id_;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool closeRequested_ = false;
  bool closing_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(CollabServer::Impl& server, tcp::socket socket) : server_(server), stream_(std::move(socket)) {}

  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return;
      self->handle();
    });
  }

 private:
  void handle() {
    if (websocket::is_upgrade(req_) && req_.target() == "/ws") {
      stream_.expires_never();
      auto ws = std::make_shared<WsSession>(server_, stream_.release_socket(), ++server_.nextConnection);
      ws->start(std::move(req_));
      return;
    }
    auto res = std::make_shared<http::response<http::string_body>>(server_.respond(req_));
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || res->need_eof()) {
        beast::error_code ignored;
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ignored);
        return;
      }
      self->read();
    });
  }

  CollabServer::Impl& server_;
  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

void CollabServer::Impl::accept() {
  acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
    if (ec) return;  // acceptor closed
    std::make_shared<HttpSession>(*this, std::move(socket))->read();
    accept();
  });
}

void CollabServer::Impl::schedule_tick() {
  ticker.expires_after(std::chrono::milliseconds(25));
  ticker.async_wait([this](beast::error_code ec) {
    if (ec) return;
    dispatch(hub.tick(collab::Clock::now()));
    schedule_tick();
  });
}

void CollabServer::Impl::dispatch(std::vector<collab::Outgoing> out) {
  for (auto& o : out) {
    auto it = sessions.find(o.to);
    if (it == sessions.end()) continue;
    auto session = it->second;
    if (!o.message.is_null()) session->send(o.message.dump());
    if (o.close) session->close_after_flush();
  }
}

http::response<http::string_body> CollabServer::Impl::respond(const http::request<http::string_body>& req) const {
  auto reply = [&](http::status status, std::string_view type, std::string body) {
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::server, "vulncity");
    res.set(http::field::content_type, std::string(type));
    res.keep_alive(req.keep_alive());
    res.body() = std::move(body);
    res.prepare_payload();
    return res;
  };

  if (req.method() != http::verb::get && req.method() != http::verb::head) {
    return reply(http::status::method_not_allowed, "text/plain", "method not allowed\n");
  }
  std::string target(req.target());
  if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
  if (target == "/scene.json") return reply(http::status::ok, "application/json", options.sceneText);
  if (target == "/scene.hash") return reply(http::status::ok, "text/plain", options.sceneHash + "\n");

  if (options.assetsDir.empty() || target.empty() || target.front() != '/' || target.find("..") != std::string::npos) {
    return reply(http::status::not_found, "text/plain", "not found\n");
  }
  if (target == "/") target = "/index.html";
  auto path = options.assetsDir / target.substr(1);
  std::ifstream in(path, std::ios::binary);
  if (!in) return reply(http::status::not_found, "text/plain", "not found\n");
  std::ostringstream body;
  body << in.rdbuf();
  return reply(http::status::ok, mime_type(path), body.str());
}

CollabServer::CollabServer(ServerOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  impl_->hub.log = [this](const std::string& line) {
    if (log) log(line);
  };
}

CollabServer::~CollabServer() = default;

void CollabServer::listen() {
  tcp::endpoint endpoint(asio::ip::make_address(impl_->options.address), impl_->options.port);
  impl_->acceptor.open(endpoint.protocol());
  impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
  impl_->acceptor.bind(endpoint);
  impl_->acceptor.listen(asio::socket_base::max_listen_connections);
}

unsigned short CollabServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void CollabServer::run() {
  impl_->accept();
  impl_->schedule_tick();
  impl_->io.run();
}

void CollabServer::stop() {
  asio::post(impl_->io, [impl = impl_.get()] {
    beast::error_code ignored;
    impl->acceptor.close(ignored);
    impl->ticker.cancel();
    impl->io.stop();
  });
}

}  // namespace vulncity::net
