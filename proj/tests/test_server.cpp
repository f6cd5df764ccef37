#include <doctest.h>

#include "vulncity/server.hpp"

#include <boost/asio.hpp>
#include <boost/beast.hpp>

#include <fstream>
#include <thread>

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;
using namespace vulncity;

namespace {

// Runs a server on a free port for the lifetime of the fixture.
struct LiveServer {
  std::filesystem::path assets;
  std::unique_ptr<net::CollabServer> server;
  std::thread thread;

  LiveServer() {
    assets = std::filesystem::temp_directory_path() / ("vulncity-assets-" + std::to_string(::getpid()));
    std::filesystem::create_directories(assets);
    std::ofstream(assets / "index.html") << "<html>viewer</html>";
    std::ofstream(assets / "app.js") << "console.log(1)";

    net::ServerOptions opts;
    opts.port = 0;
    opts.sceneText = R"({"nodes":[]})";
    opts.sceneHash = "abc123";
    opts.overlayKeys = {"p.C#m()V"};
    opts.assetsDir = assets;
    server = std::make_unique<net::CollabServer>(opts);
    server->listen();
    thread = std::thread([this] { server->run(); });
  }
  ~LiveServer() {
    server->stop();
    thread.join();
    std::filesystem::remove_all(assets);
  }
  unsigned short port() const { return server->port(); }
};

http::response<http::string_body> get(unsigned short port, const std::string& target) {
  asio::io_context io;
  beast::tcp_stream stream(io);
  stream.connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "localhost");
  http::write(stream, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(stream, buf, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return res;
}

struct WsClient {
  asio::io_context io;
  websocket::stream<tcp::socket> ws{io};

  explicit WsClient(unsigned short port) {
    ws.next_layer().connect(tcp::endpoint(asio::ip::make_address("127.0.0.1"), port));
    ws.handshake("localhost", "/ws");
  }
  void send(const json& msg) { ws.write(asio::buffer(msg.dump())); }
  json recv() {
    beast::flat_buffer buf;
    ws.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }
};

}  // namespace

TEST_CASE("http: scene, hash, assets and 404") {
  LiveServer s;
  auto scene = get(s.port(), "/scene.json");
  CHECK(scene.result() == http::status::ok);
  CHECK(scene.body() == R"({"nodes":[]})");
  CHECK(scene[http::field::content_type] == "application/json");
  CHECK(get(s.port(), "/scene.hash").body() == "abc123\n");
  auto index = get(s.port(), "/");
  CHECK(index.result() == http::status::ok);
  CHECK(index.body() == "<html>viewer</html>");
  CHECK(get(s.port(), "/app.js")[http::field::content_type] == "text/javascript");
  CHECK(get(s.port(), "/missing.css").result() == http::status::not_found);
  CHECK(get(s.port(), "/../etc/passwd").result() == http::status::not_found);
}

TEST_CASE("websocket: two clients share overlay state and presence") {
  LiveServer s;
  WsClient a(s.port());
  a.send({{"type", "join"}, {"room", "review"}, {"name", "dev"}, {"sceneHash", "abc123"}});
  auto welcomeA = a.recv();
  REQUIRE(welcomeA["type"] == "welcome");
  CHECK(welcomeA["snapshot"]["presences"].size() == 1);

  WsClient b(s.port());
  b.send({{"type", "join"}, {"room", "review"}, {"name", "auditor"}, {"sceneHash", "abc123"}});
  auto welcomeB = b.recv();
  CHECK(welcomeB["snapshot"]["presences"].size() == 2);
  auto joined = a.recv();
  CHECK(joined["type"] == "presence");
  CHECK(joined["userId"] == welcomeB["selfId"]);

  b.send({{"type", "toggleOverlay"}, {"methodId", "p.C#m()V"}});
  for (auto* c : {&a, &b}) {
    auto msg = c->recv();
    CHECK(msg["type"] == "overlayState");
    CHECK(msg["active"] == json::array({"p.C#m()V"}));
  }

  b.send({{"type", "toggleOverlay"}, {"methodId", "nope"}});
  CHECK(b.recv()["code"] == "unknown-method");

  b.ws.close(websocket::close_code::normal);
  auto left = a.recv();
  CHECK(left["type"] == "leave");
  CHECK(left["userId"] == welcomeB["selfId"]);
}

TEST_CASE("websocket: wrong scene hash gets an error and a close") {
  LiveServer s;
  WsClient c(s.port());
  c.send({{"type", "join"}, {"room", "r"}, {"name", "x"}, {"sceneHash", "stale"}});
  CHECK(c.recv()["code"] == "scene-mismatch");
  beast::flat_buffer buf;
  beast::error_code ec;
  c.ws.read(buf, ec);
  CHECK(ec == websocket::error::closed);
}

TEST_CASE("listening on a busy port throws") {
  LiveServer s;
  net::ServerOptions opts;
  opts.port = s.port();
  net::CollabServer second(opts);
  CHECK_THROWS_AS(second.listen(), boost::system::system_error);
}
