#include "stcl/recorder.hpp"

#include <sys/socket.h>

#include <chrono>
#include <filesystem>
#include <optional>
#include <thread>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "stcl/error.hpp"
#include "stcl/image_io.hpp"

namespace stcl {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

struct RecorderServer::Impl {
  Scene scene;
  RecorderOptions options;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::atomic<bool> stopping{false};
  std::atomic<bool> busy{false};
  std::atomic<int> sessions_done{0};
  mutable std::mutex mu;
  std::vector<std::string> files;
  int file_counter = 0;
  int active_fd = -1;
  std::vector<std::jthread> threads;

  void session(tcp::socket socket);
  void refuse(tcp::socket socket);
  std::string next_path();
};

namespace {

bool read_upgrade(tcp::socket& socket, beast::flat_buffer& buffer, http::request<http::string_body>& req) {
  http::read(socket, buffer, req);
  if (websocket::is_upgrade(req) && req.target() == "/session") return true;
  http::response<http::string_body> res{http::status::not_found, req.version()};
  res.set(http::field::content_type, "text/plain");
  res.body() = "websocket endpoint is /session\n";
  res.prepare_payload();
  http::write(socket, res);
  return false;
}

json frame_message(const Scene& scene, const Pose& pose, int light, const RenderConfig& cfg) {
  const auto [image, labels] = render(scene, pose, scene.lighting(light), cfg);
  json j;
  j["type"] = "frame";
  j["step"] = pose.step;
  j["t"] = pose.t;
  j["pose"] = {{"pos", {pose.position.x, pose.position.y, pose.position.z}}, {"yaw", pose.yaw}};
  j["png_b64"] = base64_encode(encode_png(image));
  return j;
}

json scene_summary(const Scene& scene) {
  json j;
  j["type"] = "scene_summary";
  j["bounds"] = {{"min_x", scene.bounds.min_x},
                 {"min_y", scene.bounds.min_y},
                 {"max_x", scene.bounds.max_x},
                 {"max_y", scene.bounds.max_y}};
  j["minimap_walls"] = json::array();
  for (const auto& w : scene.walls) j["minimap_walls"].push_back({w.x0, w.y0, w.x1, w.y1});
  j["lighting_presets"] = json::array();
  for (const auto& l : scene.lighting_presets) j["lighting_presets"].push_back(l.id);
  return j;
}

json recording_message(bool active, std::size_t frames) {
  return {{"type", "recording"}, {"active", active}, {"frames", frames}};
}

json error_message(const std::string& what) { return {{"type", "error"}, {"message", what}}; }

}  // namespace

std::string RecorderServer::Impl::next_path() {
  std::lock_guard lock(mu);
  namespace fs = std::filesystem;
  std::string path;
  do {
    char name[64];
    std::snprintf(name, sizeof name, "trajectory_%03d.jsonl", file_counter++);
    path = (fs::path(options.out_dir) / name).string();
  } while (fs::exists(path));
  return path;
}

void RecorderServer::Impl::refuse(tcp::socket socket) {
  try {
    beast::flat_buffer buffer;
    http::request<http::string_body> req;
    if (!read_upgrade(socket, buffer, req)) return;
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept(req);
    ws.close(websocket::close_reason(websocket::close_code::try_again_later, "busy"));
    // Drain until the peer acknowledges the close.
    beast::flat_buffer drain;
    beast::error_code ec;
    while (!ec) ws.read(drain, ec);
  } catch (const std::exception&) {
  }
}

void RecorderServer::Impl::session(tcp::socket socket) {
  std::optional<Trajectory> recording;
  auto flush = [&]() -> std::string {
    Trajectory t = *recording;
    recording.reset();
    const std::int64_t s0 = t.poses.front().step;
    for (auto& p : t.poses) {
      p.step -= s0;
      p.t = static_cast<double>(p.step) * t.dt;
    }
    const std::string path = next_path();
    save_trajectory(t, path);
    std::lock_guard lock(mu);
    files.push_back(path);
    return path;
  };

  try {
    beast::flat_buffer buffer;
    http::request<http::string_body> req;
    if (!read_upgrade(socket, buffer, req)) {
      busy = false;  // plain HTTP request, not a session
      return;
    }
    websocket::stream<tcp::socket> ws(std::move(socket));
    ws.accept(req);
    {
      std::lock_guard lock(mu);
      active_fd = ws.next_layer().native_handle();
    }
    ws.text(true);
    auto send = [&](const json& j) { ws.write(asio::buffer(j.dump())); };

    Pose pose = random_walk(scene, options.start_seed, 1, options.motion, WalkPolicy{}).poses.front();
    int light = options.light;

    send(scene_summary(scene));
    send(recording_message(false, 0));
    send(frame_message(scene, pose, light, options.render));

    for (;;) {
      beast::flat_buffer in;
      beast::error_code ec;
      ws.read(in, ec);
      if (ec) break;
      json msg;
      try {
        msg = json::parse(beast::buffers_to_string(in.data()));
      } catch (const json::exception&) {
        send(error_message("message is not valid JSON"));
        continue;
      }
      const std::string type = msg.value("type", "");
      try {
        if (type == "cmd") {
          const NavCommand cmd = parse_command(msg.at("cmd").get<std::string>());
          pose = apply_command(scene, pose, cmd, options.motion);
          send(frame_message(scene, pose, light, options.render));
          if (recording) {
            recording->poses.push_back(pose);
            recording->commands.push_back(cmd);
            recording->lighting_schedule.push_back(light);
            send(recording_message(true, recording->poses.size()));
          }
        } else if (type == "start_recording") {
          if (!recording) {
            recording.emplace();
            recording->scene_seed = scene.seed;
            recording->dt = options.motion.dt;
            recording->poses.push_back(pose);
            recording->commands.push_back(NavCommand::Idle);
            recording->lighting_schedule.push_back(light);
          }
          send(recording_message(true, recording->poses.size()));
        } else if (type == "stop_recording") {
          if (!recording) {
            send(error_message("not recording"));
            continue;
          }
          const std::size_t n = recording->poses.size();
          json reply = recording_message(false, n);
          reply["path"] = flush();
          send(reply);
        } else if (type == "set_light") {
          const int id = msg.at("id").get<int>();
          scene.lighting(id);
          light = id;
          send(frame_message(scene, pose, light, options.render));
        } else {
          send(error_message("unknown message type '" + type + "'"));
        }
      } catch (const json::exception& e) {
        send(error_message(std::string("malformed message: ") + e.what()));
      } catch (const Error& e) {
        send(error_message(e.what()));
      }
    }
  } catch (const std::exception&) {
  }
  if (recording) {
    try {
      flush();
    } catch (const std::exception&) {
    }
  }
  {
    std::lock_guard lock(mu);
    active_fd = -1;
  }
  ++sessions_done;
  busy = false;
}

RecorderServer::RecorderServer(Scene scene, RecorderOptions options) : impl_(std::make_unique<Impl>()) {
  options.render.validate();
  options.motion.validate();
  scene.lighting(options.light);
  std::filesystem::create_directories(options.out_dir);
  impl_->scene = std::move(scene);
  impl_->options = std::move(options);
  beast::error_code ec;
  const auto address = asio::ip::make_address(impl_->options.address, ec);
  if (ec) throw NetworkError("invalid listen address " + impl_->options.address);
  const tcp::endpoint ep(address, impl_->options.port);
  auto& acc = impl_->acceptor;
  acc.open(ep.protocol(), ec);
  if (!ec) acc.set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) acc.bind(ep, ec);
  if (!ec) acc.listen(asio::socket_base::max_listen_connections, ec);
  if (!ec) acc.non_blocking(true, ec);
  if (ec)
    throw NetworkError("cannot listen on " + impl_->options.address + ":" + std::to_string(impl_->options.port) +
                       ": " + ec.message());
}

RecorderServer::~RecorderServer() {
  stop();
  impl_->threads.clear();
}

unsigned short RecorderServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void RecorderServer::run() {
  using namespace std::chrono_literals;
  auto& im = *impl_;
  while (!im.stopping) {
    if (im.options.once && im.sessions_done > 0) break;
    tcp::socket socket(im.io);
    beast::error_code ec;
    im.acceptor.accept(socket, ec);
    if (ec == asio::error::would_block || ec == asio::error::try_again) {
      std::this_thread::sleep_for(10ms);
      continue;
    }
    if (ec) break;
    socket.non_blocking(false, ec);
    if (im.busy.exchange(true)) {
      im.threads.emplace_back([&im, s = std::move(socket)]() mutable { im.refuse(std::move(s)); });
    } else {
      im.threads.emplace_back([&im, s = std::move(socket)]() mutable { im.session(std::move(s)); });
    }
  }
  stop();
  im.threads.clear();
}

void RecorderServer::stop() {
  impl_->stopping = true;
  std::lock_guard lock(impl_->mu);
  if (impl_->active_fd >= 0) ::shutdown(impl_->active_fd, SHUT_RDWR);
}

std::vector<std::string> RecorderServer::written_files() const {
  std::lock_guard lock(impl_->mu);
  return impl_->files;
}

}  // namespace stcl
