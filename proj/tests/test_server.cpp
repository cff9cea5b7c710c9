#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "evac/server/protocol.hpp"
#include "evac/server/server.hpp"
#include "evac/server/store.hpp"

using namespace evac;
using namespace evac::server;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Player at (1,0) behind one bystander; the exit is five steps to the right.
const char* kHall =
    "name: hall\ncell_size: 0.5\nspread_interval: 30.0\ngrid:\n"
    "|......|\n"
    "|@@...E|\n"
    "exit out kind=main cells=1,5\n"
    "room top ignitable=true rect=0,0,0,5\n";

ScenarioCatalog catalog() {
  ScenarioCatalog c;
  c.add(read_file(fs::path(EVAC_SCENARIO_DIR) / "dei-analog.scn"));
  c.add(kHall);
  return c;
}

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() /
           ("evac-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

struct FakeEnv {
  int ids = 0;
  std::vector<std::string> operator_lines;

  HostEnvironment env() {
    HostEnvironment e;
    e.new_session_id = [this] { return "s-test-" + std::to_string(ids++); };
    e.new_seed = [] { return std::uint64_t{77}; };
    e.now_utc = [] { return std::string("2026-01-01T00:00:00Z"); };
    e.operator_log = [this](const std::string& line) { operator_lines.push_back(line); };
    return e;
  }
};

HostConfig small_config(std::uint32_t stride = 1) {
  HostConfig c;
  c.population = {0, 0, 0, 1};
  c.state_stride = stride;
  return c;
}

std::vector<json> drain(SessionHost& h) {
  std::vector<json> out;
  while (auto m = h.pop_outgoing()) out.push_back(json::parse(*m));
  return out;
}

std::string join_msg(const std::string& scenario, bool familiar = true, bool gamer = false) {
  return json{{"kind", "join"}, {"scenario", scenario}, {"familiar", familiar}, {"gamer", gamer}}.dump();
}

std::string input_msg(const std::string& key, std::int64_t seq) {
  return json{{"kind", "input"}, {"key", key}, {"seq", seq}}.dump();
}

SessionSummary summary(const std::string& id, bool familiar, bool gamer, const std::string& exit) {
  SessionSummary s;
  s.session_id = id;
  s.scenario = "dei-analog";
  s.familiar = familiar;
  s.gamer = gamer;
  s.outcome = exit.empty() ? "trapped" : "escaped";
  if (!exit.empty()) s.score = 21.5;
  s.exit = exit;
  s.nearest_exit = "emergency";
  s.seed = 9;
  s.started_at = "2026-01-01T00:00:00Z";
  s.event_digest = "0123456789abcdef";
  return s;
}

}  // namespace

TEST(Catalog, LoadsDirectoryAndRejectsBadFiles) {
  TempDir dir;
  fs::copy_file(fs::path(EVAC_SCENARIO_DIR) / "dei-analog.scn", dir.path / "a.scn");
  std::ofstream(dir.path / "broken.scn") << "name: x\ngrid:\n|..|\n";
  std::ofstream(dir.path / "notes.txt") << "ignored";
  ScenarioCatalog c;
  const auto errors = c.load_directory(dir.path);
  EXPECT_EQ(errors.size(), 1U);
  EXPECT_EQ(c.ids(), std::vector<std::string>{"dei-analog"});
  ASSERT_NE(c.find("dei-analog"), nullptr);
  EXPECT_EQ(c.find("nope"), nullptr);
}

TEST(Host, JoinSendsScenarioSnapshot) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, HostConfig{}, fe.env());
  h.on_message(join_msg("dei-analog"));
  const auto out = drain(h);
  ASSERT_EQ(out.size(), 1U);
  EXPECT_EQ(out[0]["kind"], "joined");
  EXPECT_EQ(out[0]["session_id"], "s-test-0");
  const auto& sc = out[0]["scenario"];
  EXPECT_EQ(sc["height"], 17);
  EXPECT_EQ(sc["width"], 102);
  EXPECT_EQ(sc["rows"].size(), 17U);
  EXPECT_EQ(sc["exits"].size(), 2U);
  const auto spawn = *cat.find("dei-analog")->default_spawn();
  EXPECT_EQ(sc["spawn"], json::array({spawn.row, spawn.col}));
  ASSERT_NE(h.session(), nullptr);
  EXPECT_EQ(h.session()->agents().size(), 30U);
  EXPECT_TRUE(h.session()->player()->profile.familiar);
  EXPECT_EQ(h.session()->config().seed, 77U);
}

TEST(Host, UnknownScenarioAndSecondJoin) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, small_config(), fe.env());
  h.on_message(join_msg("nope"));
  auto out = drain(h);
  ASSERT_EQ(out.size(), 1U);
  EXPECT_EQ(out[0]["kind"], "error");
  EXPECT_EQ(out[0]["code"], "scenario_not_found");
  EXPECT_EQ(h.session(), nullptr);

  h.on_message(join_msg("hall"));
  h.on_message(join_msg("hall"));
  out = drain(h);
  ASSERT_EQ(out.size(), 2U);
  EXPECT_EQ(out[1]["code"], "already_joined");
}

TEST(Host, MalformedMessages) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, small_config(), fe.env());
  h.on_message("{not json");
  h.on_message(R"({"scenario":"hall"})");
  h.on_message(R"({"kind":"join","scenario":"hall","familiar":"yes","gamer":false})");
  h.on_message(R"({"kind":"dance"})");
  h.on_message(input_msg("W", 1));
  for (const auto& m : drain(h)) EXPECT_EQ(m["kind"], "error");
  h.on_message(join_msg("hall"));
  drain(h);
  h.on_message(input_msg("Q", 2));
  const auto out = drain(h);
  ASSERT_EQ(out.size(), 1U);
  EXPECT_EQ(out[0]["code"], "bad_input");
}

TEST(Host, StaleSequenceNumbersAreDropped) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, small_config(), fe.env());
  h.on_message(join_msg("hall"));
  h.on_message(input_msg("O", 5));
  h.on_message(input_msg("D", 5));
  h.on_message(input_msg("D", 3));
  h.on_message(input_msg("D", 6));
  EXPECT_EQ(h.dropped_inputs(), 2U);
  h.on_tick();
  int inputs = 0;
  for (const auto& e : h.session()->log().records()) inputs += e.kind == EventKind::Input ? 1 : 0;
  EXPECT_EQ(inputs, 2);
}

TEST(Host, InputsWaitForTheTickBoundary) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, small_config(), fe.env());
  h.on_message(join_msg("hall"));
  h.on_message(input_msg("O", 1));
  EXPECT_FALSE(h.session()->alarm_started());
  h.on_tick();
  EXPECT_TRUE(h.session()->alarm_started());
  EXPECT_DOUBLE_EQ(h.session()->timer_origin(), 0.0);
}

TEST(Host, StateEveryTick) {
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, nullptr, HostConfig{}, fe.env());
  h.on_message(join_msg("dei-analog"));
  drain(h);
  for (int i = 0; i < 50; ++i) h.on_tick();
  const auto out = drain(h);
  ASSERT_EQ(out.size(), 50U);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(out[static_cast<std::size_t>(i)]["kind"], "state");
    EXPECT_EQ(out[static_cast<std::size_t>(i)]["tick"], i + 1);
  }
  EXPECT_EQ(out[0]["agents"].size(), 30U);
  EXPECT_EQ(out[0]["timer_running"], false);
  EXPECT_EQ(out[0]["burning"].size(), 0U);
}

TEST(Host, StateStride) {
  FakeEnv fe;
  const auto cat = catalog();
  auto cfg = HostConfig{};
  cfg.state_stride = 5;
  SessionHost h(cat, nullptr, cfg, fe.env());
  h.on_message(join_msg("dei-analog"));
  drain(h);
  for (int i = 0; i < 50; ++i) h.on_tick();
  const auto out = drain(h);
  ASSERT_EQ(out.size(), 10U);
  for (std::size_t i = 0; i < out.size(); ++i) EXPECT_EQ(out[i]["tick"], 5 * (i + 1));
}

TEST(Host, EscapeEndsOnceAndPersists) {
  TempDir dir;
  SessionStore store(dir.path);
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, &store, small_config(), fe.env());
  h.on_message(join_msg("hall", false, true));
  h.on_message(input_msg("O", 1));
  h.on_message(input_msg("D", 2));
  for (int i = 0; i < 200; ++i) h.on_tick();
  const auto out = drain(h);
  int ended = 0;
  bool state_after_end = false;
  json end;
  for (const auto& m : out) {
    if (m["kind"] == "ended") {
      ++ended;
      end = m;
    } else if (ended > 0 && m["kind"] == "state") {
      state_after_end = true;
    }
  }
  EXPECT_EQ(ended, 1);
  EXPECT_FALSE(state_after_end);
  EXPECT_EQ(end["outcome"], "escaped");
  EXPECT_GT(end["score"].get<double>(), 0.0);
  EXPECT_FALSE(h.ticking());
  EXPECT_TRUE(h.persisted());

  const auto s = store.load_summary(h.session_id());
  ASSERT_TRUE(s);
  EXPECT_EQ(s->outcome, "escaped");
  EXPECT_DOUBLE_EQ(*s->score, end["score"].get<double>());
  EXPECT_FALSE(s->familiar);
  EXPECT_TRUE(s->gamer);
  EXPECT_EQ(s->exit, "out");
  EXPECT_TRUE(s->nearest_chosen());
  const auto log = store.load_log(h.session_id());
  ASSERT_TRUE(log);
  EXPECT_EQ(digest_hex(*log), s->event_digest);
  EXPECT_TRUE(replay_log(EventLog::parse(*log)).identical);

  h.on_message(input_msg("W", 3));
  const auto after = drain(h);
  ASSERT_EQ(after.size(), 1U);
  EXPECT_EQ(after[0]["code"], "session_ended");
}

TEST(Host, LeaveAbandonsWithoutStoring) {
  TempDir dir;
  SessionStore store(dir.path);
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, &store, small_config(), fe.env());
  h.on_message(join_msg("hall"));
  h.on_tick();
  h.on_message(R"({"kind":"leave"})");
  EXPECT_TRUE(h.closed());
  EXPECT_FALSE(h.ticking());
  EXPECT_TRUE(store.list().empty());
}

TEST(Host, BoundedOutboxDropsStatesFirst) {
  FakeEnv fe;
  const auto cat = catalog();
  auto cfg = small_config();
  cfg.outbox_capacity = 4;
  SessionHost h(cat, nullptr, cfg, fe.env());
  h.on_message(join_msg("hall"));
  for (int i = 0; i < 10; ++i) h.on_tick();
  EXPECT_EQ(h.outgoing_size(), 4U);
  EXPECT_EQ(h.dropped_states(), 7U);
  const auto out = drain(h);
  EXPECT_EQ(out[0]["kind"], "joined");  // never dropped
  EXPECT_EQ(out[1]["tick"], 8);
  EXPECT_EQ(out[3]["tick"], 10);
}

TEST(Host, StorageFailureIsLoggedNotFatal) {
  TempDir dir;
  const auto blocker = dir.path / "file";
  std::ofstream(blocker) << "x";
  SessionStore store(blocker / "sub");
  FakeEnv fe;
  const auto cat = catalog();
  SessionHost h(cat, &store, small_config(), fe.env());
  h.on_message(join_msg("hall"));
  h.on_message(input_msg("O", 1));
  h.on_message(input_msg("D", 2));
  for (int i = 0; i < 200; ++i) h.on_tick();
  bool ended = false;
  for (const auto& m : drain(h)) ended = ended || m["kind"] == "ended";
  EXPECT_TRUE(ended);
  EXPECT_FALSE(h.persisted());
  ASSERT_EQ(fe.operator_lines.size(), 1U);
  EXPECT_NE(fe.operator_lines[0].find("s-test-0"), std::string::npos);
}

TEST(Store, PersistAndLoad) {
  TempDir dir;
  SessionStore store(dir.path);
  EventLog log;
  log.append(0.0, EventKind::Alarm);
  const auto s = summary("abc", true, false, "emergency");
  store.persist(s, log);
  EXPECT_EQ(*store.load_summary("abc"), s);
  EXPECT_EQ(*store.load_log("abc"), log.serialize());
  EXPECT_THROW(store.persist(s, log), StoreError);
  EXPECT_FALSE(store.load_summary("missing"));
  EXPECT_FALSE(store.load_summary("../etc"));
  EXPECT_THROW(store.persist(summary("../x", true, true, ""), log), StoreError);
}

TEST(Store, TrappedHasNoScore) {
  TempDir dir;
  SessionStore store(dir.path);
  store.persist(summary("t1", false, false, ""), EventLog{});
  const auto s = store.load_summary("t1");
  EXPECT_FALSE(s->score);
  EXPECT_FALSE(s->nearest_chosen());
  const auto j = to_json(*s);
  EXPECT_TRUE(j["score"].is_null());
  EXPECT_TRUE(j["exit"].is_null());
  EXPECT_EQ(summary_from_json(j), *s);
}

TEST(Store, AggregateOverSubjectSample) {
  TempDir dir;
  SessionStore store(dir.path);
  // 14 familiar (8 gamers), 16 unfamiliar (5 gamers).
  std::array<std::array<long, 2>, 2> expect{};
  int n = 0;
  auto add = [&](bool familiar, bool gamer, const std::string& exit) {
    store.persist(summary("s" + std::to_string(n++), familiar, gamer, exit), EventLog{});
    ++expect[familiar ? 0 : 1][exit == "emergency" ? 0 : 1];
  };
  for (int i = 0; i < 8; ++i) add(true, true, i < 7 ? "emergency" : "main");
  for (int i = 0; i < 6; ++i) add(true, false, i < 4 ? "emergency" : (i == 4 ? "main" : ""));
  for (int i = 0; i < 5; ++i) add(false, true, i < 2 ? "emergency" : "main");
  for (int i = 0; i < 11; ++i) add(false, false, i < 4 ? "emergency" : (i < 10 ? "main" : ""));
  EXPECT_EQ(store.list().size(), 30U);
  const auto t = store.aggregate();
  EXPECT_EQ(t.counts, expect);
  EXPECT_EQ(t.row_total(0), 14);
  EXPECT_EQ(t.row_total(1), 16);
}

// --- over the network -------------------------------------------------------

namespace {

namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

http::response<http::string_body> get(std::uint16_t port, const std::string& target,
                                      http::verb verb = http::verb::get) {
  boost::asio::io_context ioc;
  tcp::resolver resolver(ioc);
  beast::tcp_stream stream(ioc);
  stream.connect(resolver.resolve("127.0.0.1", std::to_string(port)));
  http::request<http::string_body> req{verb, target, 11};
  req.set(http::field::host, "127.0.0.1");
  http::write(stream, req);
  beast::flat_buffer buffer;
  http::response<http::string_body> res;
  http::read(stream, buffer, res);
  beast::error_code ec;
  stream.socket().shutdown(tcp::socket::shutdown_both, ec);
  return res;
}

}  // namespace

TEST(Network, RestAndWebSocketRoundTrip) {
  TempDir dir;
  ServerOptions opts;
  opts.port = 0;
  opts.data_dir = dir.path / "data";
  opts.tick_period = std::chrono::milliseconds(5);
  opts.host = small_config();
  opts.web_dir = dir.path / "web";
  fs::create_directories(*opts.web_dir);
  std::ofstream(*opts.web_dir / "index.html") << "<html>hi</html>";
  FakeEnv fe;
  Server server(catalog(), opts, fe.env());
  server.listen();
  server.start();
  const auto port = server.port();
  ASSERT_NE(port, 0);

  auto res = get(port, "/api/scenarios");
  ASSERT_EQ(res.result(), http::status::ok);
  const auto list = json::parse(res.body());
  ASSERT_EQ(list.size(), 2U);
  EXPECT_EQ(list[0]["id"], "dei-analog");
  EXPECT_EQ(list[0]["rows"], 17);
  EXPECT_EQ(list[0]["cols"], 102);

  res = get(port, "/api/scenarios/hall");
  EXPECT_EQ(res.result(), http::status::ok);
  EXPECT_NE(res.body().find("exit out"), std::string::npos);
  EXPECT_EQ(get(port, "/api/scenarios/nope").result(), http::status::not_found);
  EXPECT_EQ(get(port, "/api/sessions/nope").result(), http::status::not_found);
  EXPECT_EQ(get(port, "/api/sessions", http::verb::post).result(), http::status::method_not_allowed);
  EXPECT_EQ(get(port, "/").body(), "<html>hi</html>");
  EXPECT_EQ(get(port, "/../secret").result(), http::status::not_found);

  // Play the hall scenario to the end over a WebSocket.
  std::string session_id;
  json ended;
  {
    boost::asio::io_context ioc;
    tcp::resolver resolver(ioc);
    websocket::stream<beast::tcp_stream> ws(ioc);
    beast::get_lowest_layer(ws).connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", "/ws");
    ws.text(true);
    ws.write(boost::asio::buffer(join_msg("hall", true, false)));
    beast::flat_buffer buffer;
    ws.read(buffer);
    const auto joined = json::parse(beast::buffers_to_string(buffer.data()));
    ASSERT_EQ(joined["kind"], "joined");
    session_id = joined["session_id"];
    ws.write(boost::asio::buffer(input_msg("O", 1)));
    ws.write(boost::asio::buffer(input_msg("D", 2)));
    int states = 0;
    for (int i = 0; i < 1000 && ended.is_null(); ++i) {
      buffer.clear();
      ws.read(buffer);
      const auto m = json::parse(beast::buffers_to_string(buffer.data()));
      if (m["kind"] == "state") ++states;
      if (m["kind"] == "ended") ended = m;
    }
    EXPECT_GT(states, 0);
    ws.close(websocket::close_code::normal);
  }
  ASSERT_FALSE(ended.is_null());
  EXPECT_EQ(ended["outcome"], "escaped");

  // The store write happens on the server strand right after "ended".
  json stored;
  for (int i = 0; i < 100; ++i) {
    res = get(port, "/api/sessions/" + session_id);
    if (res.result() == http::status::ok) {
      stored = json::parse(res.body());
      break;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(10));
  }
  ASSERT_FALSE(stored.is_null());
  EXPECT_EQ(stored["score"], ended["score"]);
  EXPECT_EQ(stored["nearest_chosen"], true);
  res = get(port, "/api/sessions/" + session_id + "/log");
  EXPECT_EQ(res.result(), http::status::ok);
  EXPECT_EQ(digest_hex(res.body()), stored["event_digest"]);
  const auto agg = json::parse(get(port, "/api/aggregate").body());
  EXPECT_EQ(agg["familiar"]["nearest"], 1);
  EXPECT_EQ(agg["unfamiliar"]["total"], 0);
  EXPECT_EQ(json::parse(get(port, "/api/sessions").body()).size(), 1U);

  server.stop();
}
