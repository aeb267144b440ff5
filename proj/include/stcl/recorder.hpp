#pragma once

// WebSocket service that lets a person steer the agent and record a
// trajectory. Endpoint: ws://host:port/session, one JSON object per message.
//
// server -> client
//   {"type":"scene_summary","bounds":{...},"minimap_walls":[[x0,y0,x1,y1],...],"lighting_presets":[ids]}
//   {"type":"frame","step":n,"t":s,"pose":{"pos":[x,y,z],"yaw":deg},"png_b64":"..."}
//   {"type":"recording","active":bool,"frames":n[,"path":"..."]}
//   {"type":"error","message":"..."}
// client -> server
//   {"type":"cmd","cmd":"forward|backward|strafe_left|strafe_right|rotate_left|rotate_right|jump|idle"}
//   {"type":"start_recording"}  {"type":"stop_recording"}  {"type":"set_light","id":n}
//
// On connect the server sends scene_summary, recording, then a frame. Each
// cmd produces exactly one frame (followed by a recording update while
// recording). Only one session is served at a time; other connections are
// closed with code 1013 and reason "busy".

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "stcl/render.hpp"
#include "stcl/trajectory.hpp"

namespace stcl {

struct RecorderOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::string out_dir = ".";
  RenderConfig render;
  MotionParams motion;
  std::uint64_t start_seed = 0;  // seeds the random free start pose
  int light = 0;
  /// Return from run() once the first session has ended.
  bool once = false;
};

class RecorderServer {
 public:
  /// Binds and listens immediately; throws NetworkError if that fails.
  RecorderServer(Scene scene, RecorderOptions options);
  ~RecorderServer();
  RecorderServer(const RecorderServer&) = delete;
  RecorderServer& operator=(const RecorderServer&) = delete;

  unsigned short port() const;

  /// Accept loop; blocks until stop() or, with `once`, the first session ends.
  void run();
  void stop();

  /// Trajectory files written so far.
  std::vector<std::string> written_files() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace stcl
