#include <doctest.h>

#include <openssl/evp.h>

#include <boost/asio.hpp>
#include <boost/beast.hpp>
#include <fstream>
#include <thread>

#include <nlohmann/json.hpp>

#include "stcl/experiment.hpp"
#include "stcl/image_io.hpp"
#include "stcl/recorder.hpp"
#include "test_support.hpp"

using namespace stcl;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

namespace {

struct Client {
  asio::io_context io;
  websocket::stream<tcp::socket> ws{io};

  explicit Client(unsigned short port, const std::string& target = "/session") {
    tcp::resolver resolver(io);
    asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws.handshake("127.0.0.1", target);
    ws.text(true);
  }
  json recv() {
    beast::flat_buffer b;
    ws.read(b);
    return json::parse(beast::buffers_to_string(b.data()));
  }
  void send(const json& j) { ws.write(asio::buffer(j.dump())); }
};

std::vector<std::uint8_t> unbase64(const std::string& s) {
  std::vector<std::uint8_t> out(3 * s.size() / 4 + 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(s.data()), static_cast<int>(s.size()));
  REQUIRE(n >= 0);
  std::size_t pad = 0;
  while (pad < s.size() && s[s.size() - 1 - pad] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

Image decode_frame(const json& frame, const TempDir& dir) {
  const auto bytes = unbase64(frame.at("png_b64").get<std::string>());
  const std::string path = dir / "frame.png";
  std::ofstream(path, std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                              static_cast<std::streamsize>(bytes.size()));
  return read_png_rgb(path);
}

struct Fixture {
  TempDir dir{"rec"};
  ExperimentConfig config;
  Scene scene = build_scene(config);
  std::unique_ptr<RecorderServer> server;
  std::jthread loop;

  Fixture() {
    RecorderOptions o;
    o.port = 0;
    o.out_dir = dir / "out";
    o.render.width = 32;
    o.render.height = 24;
    server = std::make_unique<RecorderServer>(scene, o);
    loop = std::jthread([this] { server->run(); });
  }
  ~Fixture() {
    server->stop();
    loop.join();
  }
};

}  // namespace

TEST_CASE("recorder: a full session writes a valid trajectory") {
  Fixture f;
  Client c(f.server->port());
  const auto summary = c.recv();
  CHECK(summary["type"] == "scene_summary");
  CHECK(summary["minimap_walls"].size() == f.scene.walls.size());
  CHECK(summary["lighting_presets"].size() == f.scene.lighting_presets.size());
  const auto rec = c.recv();
  CHECK(rec == json{{"type", "recording"}, {"active", false}, {"frames", 0}});
  const auto first = c.recv();
  CHECK(first["type"] == "frame");
  const Image img = decode_frame(first, f.dir);
  CHECK(img.width == 32);
  CHECK(img.height == 24);

  c.send({{"type", "start_recording"}});
  CHECK(c.recv() == json{{"type", "recording"}, {"active", true}, {"frames", 1}});

  const char* cmds[] = {"forward", "forward", "rotate_left", "strafe_right", "jump",
                        "idle",    "backward", "rotate_right", "forward",    "strafe_left"};
  std::int64_t last_step = first["step"];
  for (int i = 0; i < 20; ++i) {
    c.send({{"type", "cmd"}, {"cmd", cmds[i % 10]}});
    const auto fr = c.recv();
    REQUIRE(fr["type"] == "frame");
    CHECK(fr["step"].get<std::int64_t>() == last_step + 1);
    last_step = fr["step"];
    CHECK(c.recv() == json{{"type", "recording"}, {"active", true}, {"frames", i + 2}});
  }

  c.send({{"type", "cmd"}, {"cmd", "teleport"}});
  CHECK(c.recv()["type"] == "error");
  c.send({{"type", "dance"}});
  CHECK(c.recv()["type"] == "error");
  c.ws.write(asio::buffer(std::string("{not json")));
  CHECK(c.recv()["type"] == "error");

  c.send({{"type", "stop_recording"}});
  const auto done = c.recv();
  CHECK(done["active"] == false);
  CHECK(done["frames"] == 21);
  const std::string path = done["path"];
  CHECK(f.server->written_files() == std::vector<std::string>{path});

  const Trajectory t = load_trajectory(path);
  CHECK(t.poses.size() == 21);
  CHECK(t.poses.front().step == 0);
  CHECK(t.scene_seed == f.scene.seed);
  CHECK(validate_trajectory(f.scene, t, MotionParams{}).empty());

  c.send({{"type", "stop_recording"}});
  CHECK(c.recv()["type"] == "error");

  const int other = static_cast<int>(f.scene.lighting_presets.size()) - 1;
  REQUIRE(other > 0);
  c.send({{"type", "set_light"}, {"id", other}});
  const auto lit = c.recv();
  CHECK(lit["type"] == "frame");
  CHECK(lit["step"] == last_step);
  CHECK_FALSE(decode_frame(lit, f.dir).pixels == img.pixels);
  c.send({{"type", "set_light"}, {"id", 999}});
  CHECK(c.recv()["type"] == "error");
  c.ws.close(websocket::close_code::normal);
}

TEST_CASE("recorder: a second client is refused while busy") {
  Fixture f;
  Client a(f.server->port());
  a.recv();
  Client b(f.server->port());
  beast::flat_buffer buf;
  beast::error_code ec;
  b.ws.read(buf, ec);
  CHECK(ec == websocket::error::closed);
  CHECK(b.ws.reason().code == 1013);
  CHECK(std::string(b.ws.reason().reason.c_str()) == "busy");
  a.ws.close(websocket::close_code::normal);
}

TEST_CASE("recorder: other paths get 404") {
  Fixture f;
  CHECK_THROWS(Client(f.server->port(), "/other"));
  asio::io_context io;
  tcp::socket s(io);
  tcp::resolver resolver(io);
  asio::connect(s, resolver.resolve("127.0.0.1", std::to_string(f.server->port())));
  beast::http::request<beast::http::empty_body> req{beast::http::verb::get, "/", 11};
  req.set(beast::http::field::host, "localhost");
  beast::http::write(s, req);
  beast::flat_buffer b;
  beast::http::response<beast::http::string_body> res;
  beast::http::read(s, b, res);
  CHECK(res.result_int() == 404);

  Client after(f.server->port());
  CHECK(after.recv()["type"] == "scene_summary");
  after.ws.close(websocket::close_code::normal);
}
