#include "evac/server/server.hpp"

#include <fstream>
#include <sstream>
#include <thread>

#include <boost/asio/dispatch.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/steady_timer.hpp>
#include <boost/asio/strand.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace evac::server {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
namespace net = boost::asio;
using tcp = net::ip::tcp;
using nlohmann::json;

namespace {

struct Shared {
  ScenarioCatalog catalog;
  SessionStore store;
  ServerOptions options;
  HostEnvironment env;
};

using Request = http::request<http::string_body>;
using Response = http::response<http::string_body>;

Response make_response(const Request& req, http::status status, std::string body, std::string_view content_type) {
  Response res{status, req.version()};
  res.set(http::field::server, "evacsim");
  res.set(http::field::content_type, beast::string_view(content_type.data(), content_type.size()));
  res.keep_alive(req.keep_alive());
  res.body() = std::move(body);
  res.prepare_payload();
  return res;
}

Response json_response(const Request& req, http::status status, const json& body) {
  return make_response(req, status, body.dump(), "application/json");
}

Response not_found(const Request& req, std::string_view what) {
  return json_response(req, http::status::not_found, {{"error", "not_found"}, {"detail", what}});
}

std::string_view mime_type(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  if (ext == ".html") return "text/html";
  if (ext == ".js") return "application/javascript";
  if (ext == ".css") return "text/css";
  if (ext == ".json") return "application/json";
  if (ext == ".png") return "image/png";
  if (ext == ".svg") return "image/svg+xml";
  return "application/octet-stream";
}

json aggregate_json(const ContingencyTable& t) {
  auto row = [&](std::size_t r) {
    return json{{"nearest", t.counts[r][ContingencyTable::kNearest]},
                {"other", t.counts[r][ContingencyTable::kOther]},
                {"total", t.row_total(r)}};
  };
  return {{"familiar", row(ContingencyTable::kFamiliar)}, {"unfamiliar", row(ContingencyTable::kUnfamiliar)}};
}

Response serve_static(const Shared& sh, const Request& req, std::string_view target) {
  if (!sh.options.web_dir) return not_found(req, target);
  std::string rel(target.substr(1));
  if (rel.empty()) rel = "index.html";
  if (rel.find("..") != std::string::npos) return not_found(req, target);
  const auto path = *sh.options.web_dir / rel;
  std::ifstream in(path, std::ios::binary);
  if (!in) return not_found(req, target);
  std::ostringstream ss;
  ss << in.rdbuf();
  return make_response(req, http::status::ok, ss.str(), mime_type(path));
}

Response handle_request(Shared& sh, const Request& req) {
  std::string_view target(req.target().data(), req.target().size());
  if (const auto q = target.find('?'); q != std::string_view::npos) target = target.substr(0, q);
  if (req.method() != http::verb::get) {
    return json_response(req, http::status::method_not_allowed, {{"error", "method_not_allowed"}});
  }

  constexpr std::string_view scenarios = "/api/scenarios";
  constexpr std::string_view sessions = "/api/sessions";
  if (target == scenarios) {
    json out = json::array();
    for (const auto& id : sh.catalog.ids()) {
      const auto spec = sh.catalog.find(id);
      out.push_back({{"id", id}, {"rows", spec->grid.rows()}, {"cols", spec->grid.cols()}});
    }
    return json_response(req, http::status::ok, out);
  }
  if (target.substr(0, scenarios.size() + 1) == "/api/scenarios/") {
    const std::string id(target.substr(scenarios.size() + 1));
    if (const auto* doc = sh.catalog.document(id)) return make_response(req, http::status::ok, *doc, "text/plain");
    return not_found(req, "scenario " + id);
  }
  if (target == sessions) {
    json out = json::array();
    for (const auto& s : sh.store.list()) out.push_back(to_json(s));
    return json_response(req, http::status::ok, out);
  }
  if (target.substr(0, sessions.size() + 1) == "/api/sessions/") {
    std::string id(target.substr(sessions.size() + 1));
    bool want_log = false;
    if (const auto slash = id.find('/'); slash != std::string::npos) {
      if (id.substr(slash) != "/log") return not_found(req, target);
      want_log = true;
      id.resize(slash);
    }
    if (want_log) {
      if (auto log = sh.store.load_log(id)) return make_response(req, http::status::ok, *log, "application/x-ndjson");
    } else if (auto s = sh.store.load_summary(id)) {
      return json_response(req, http::status::ok, to_json(*s));
    }
    return not_found(req, "session " + id);
  }
  if (target == "/api/aggregate") return json_response(req, http::status::ok, aggregate_json(sh.store.aggregate()));
  if (target.substr(0, 5) == "/api/") return not_found(req, target);
  return serve_static(sh, req, target);
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Shared& sh)
      : ws_(std::move(socket)),
        timer_(ws_.get_executor()),
        period_(sh.options.tick_period),
        host_(sh.catalog, &sh.store, sh.options.host, sh.env) {}

  void run(Request req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    do_read();
  }

  void do_read() { ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this())); }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      timer_.cancel();
      return;
    }
    host_.on_message(beast::buffers_to_string(buffer_.data()));
    buffer_.consume(buffer_.size());
    arm_timer();
    flush();
    if (!host_.closed()) do_read();
  }

  void arm_timer() {
    if (timer_armed_ || !host_.ticking()) return;
    const auto now = net::steady_timer::clock_type::now();
    next_tick_ = next_tick_ && *next_tick_ + period_ > now ? *next_tick_ + period_ : now + period_;
    timer_armed_ = true;
    timer_.expires_at(*next_tick_);
    timer_.async_wait(beast::bind_front_handler(&WsSession::on_timer, shared_from_this()));
  }

  void on_timer(beast::error_code ec) {
    timer_armed_ = false;
    if (ec) return;
    host_.on_tick();
    flush();
    arm_timer();
  }

  void flush() {
    if (writing_ || closing_) return;
    auto msg = host_.pop_outgoing();
    if (!msg) {
      if (host_.closed()) {
        closing_ = true;
        timer_.cancel();
        ws_.async_close(websocket::close_code::normal,
                        beast::bind_front_handler(&WsSession::on_close, shared_from_this()));
      }
      return;
    }
    writing_ = true;
    current_ = std::move(*msg);
    ws_.text(true);
    ws_.async_write(net::buffer(current_), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      timer_.cancel();
      return;
    }
    flush();
  }

  void on_close(beast::error_code) {}

  websocket::stream<beast::tcp_stream> ws_;
  net::steady_timer timer_;
  std::chrono::milliseconds period_;
  std::optional<net::steady_timer::time_point> next_tick_;
  beast::flat_buffer buffer_;
  SessionHost host_;
  std::string current_;
  bool writing_{false};
  bool timer_armed_{false};
  bool closing_{false};
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Shared& sh) : stream_(std::move(socket)), sh_(sh) {}

  void run() {
    net::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  void do_read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec == http::error::end_of_stream) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    if (ec) return;
    if (websocket::is_upgrade(req_)) {
      if (req_.target() == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), sh_)->run(std::move(req_));
        return;
      }
      send(not_found(req_, std::string(req_.target())));
      return;
    }
    Response res;
    try {
      res = handle_request(sh_, req_);
    } catch (const std::exception& e) {
      res = json_response(req_, http::status::internal_server_error, {{"error", "internal"}, {"detail", e.what()}});
    }
    send(std::move(res));
  }

  void send(Response res) {
    res_ = std::make_shared<Response>(std::move(res));
    http::async_write(stream_, *res_,
                      beast::bind_front_handler(&HttpSession::on_write, shared_from_this(), res_->need_eof()));
  }

  void on_write(bool close, beast::error_code ec, std::size_t) {
    if (ec) return;
    if (close) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    do_read();
  }

  beast::tcp_stream stream_;
  beast::flat_buffer buffer_;
  Shared& sh_;
  Request req_;
  std::shared_ptr<Response> res_;
};

}  // namespace

struct Server::Impl {
  Impl(ScenarioCatalog catalog, ServerOptions options, HostEnvironment env)
      : shared{std::move(catalog), SessionStore(options.data_dir), std::move(options), std::move(env)} {}

  void do_accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec == net::error::operation_aborted) return;
      if (!ec) std::make_shared<HttpSession>(std::move(socket), shared)->run();
      do_accept();
    });
  }

  Shared shared;
  net::io_context ioc{1};
  tcp::acceptor acceptor{ioc};
  std::thread thread;
  bool listening{false};
};

Server::Server(ScenarioCatalog catalog, ServerOptions options, HostEnvironment env)
    : impl_(std::make_unique<Impl>(std::move(catalog), std::move(options), std::move(env))) {}

Server::~Server() { stop(); }

void Server::listen() {
  if (impl_->listening) return;
  const auto& o = impl_->shared.options;
  const tcp::endpoint endpoint{net::ip::make_address(o.bind_address), o.port};
  auto& a = impl_->acceptor;
  a.open(endpoint.protocol());
  a.set_option(net::socket_base::reuse_address(true));
  a.bind(endpoint);
  a.listen(net::socket_base::max_listen_connections);
  impl_->listening = true;
  impl_->do_accept();
}

std::uint16_t Server::port() const { return impl_->acceptor.local_endpoint().port(); }

void Server::run() {
  listen();
  impl_->ioc.run();
}

void Server::start() {
  listen();
  impl_->thread = std::thread([this] { impl_->ioc.run(); });
}

void Server::stop() {
  impl_->ioc.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

SessionStore& Server::store() { return impl_->shared.store; }

}  // namespace evac::server
