#include "service.hpp"

#include <algorithm>
#include <regex>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "commands.hpp"
#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"
#include "ossireg/image.hpp"
#include "ossireg/raster.hpp"

namespace ossireg::cli {
namespace {

using json = nlohmann::json;

HttpResponse json_response(int status, const json& body) {
  return {status, "application/json", body.dump(2) + "\n"};
}

HttpResponse error_response(int status, const std::string& message) {
  return json_response(status, {{"error", message}});
}

// Frame ids become file names; keep them to a safe alphabet.
bool valid_id(const std::string& id) {
  static const std::regex pattern("[A-Za-z0-9_.-]+");
  return !id.empty() && id[0] != '.' && std::regex_match(id, pattern);
}

bool same_camera(const CameraModel& a, const CameraModel& b) {
  return a.focal == b.focal && a.cx == b.cx && a.cy == b.cy && a.width == b.width &&
         a.height == b.height;
}

int status_for(ErrorCode code) {
  return code == ErrorCode::kNumerical || code == ErrorCode::kNoConsensus ? 500 : 400;
}

}  // namespace

RegistrationService::RegistrationService(const Project& project, std::filesystem::path frames_dir,
                                         std::filesystem::path poses_dir)
    : camera_(project.config.camera),
      initial_pose_(default_pose(*project.region)),
      param_(project.parameterization()),
      frames_dir_(std::move(frames_dir)),
      poses_dir_(std::move(poses_dir)) {
  if (!std::filesystem::is_directory(frames_dir_)) {
    throw Error(ErrorCode::kInvalidInput, "frames directory not found: " + frames_dir_.string());
  }
}

RegistrationService::~RegistrationService() { stop(); }

std::vector<std::string> RegistrationService::frame_ids() const {
  std::vector<std::string> ids;
  for (const auto& entry : std::filesystem::directory_iterator(frames_dir_)) {
    const std::string stem = entry.path().stem().string();
    if (entry.is_regular_file() && entry.path().extension() == ".png" && valid_id(stem)) {
      ids.push_back(stem);
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

std::filesystem::path RegistrationService::frame_path(const std::string& id) const {
  if (!valid_id(id)) return {};
  const std::filesystem::path path = frames_dir_ / (id + ".png");
  return std::filesystem::is_regular_file(path) ? path : std::filesystem::path{};
}

RegistrationService::Session* RegistrationService::session(const std::string& id) {
  if (frame_path(id).empty()) return nullptr;
  std::lock_guard lock(sessions_mutex_);
  auto& slot = sessions_[id];
  if (!slot) {
    slot = std::make_unique<Session>();
    const std::filesystem::path saved = poses_dir_ / (id + ".json");
    if (std::filesystem::exists(saved)) {
      slot->record = load_pose(saved);
    } else {
      slot->record = PoseRecord{initial_pose_, camera_, 0};
    }
  }
  return slot.get();
}

HttpResponse RegistrationService::handle(const std::string& method, const std::string& path,
                                         const std::string& body) {
  static const std::regex frame_route("/api/frame/([^/]+)");
  static const std::regex pose_route("/api/pose/([^/]+)");
  static const std::regex save_route("/api/pose/([^/]+)/save");
  std::smatch m;
  try {
    if (path == "/api/frames") {
      if (method != "GET") return error_response(405, "use GET");
      return list_frames();
    }
    if (path == "/api/render") {
      if (method != "POST") return error_response(405, "use POST");
      return render(body);
    }
    if (std::regex_match(path, m, frame_route)) {
      if (method != "GET") return error_response(405, "use GET");
      return get_frame(m[1]);
    }
    if (std::regex_match(path, m, save_route)) {
      if (method != "POST") return error_response(405, "use POST");
      return save_pose(m[1]);
    }
    if (std::regex_match(path, m, pose_route)) {
      if (method == "GET") return get_pose(m[1]);
      if (method == "POST") return post_pose(m[1], body);
      return error_response(405, "use GET or POST");
    }
    return error_response(404, "no route for " + path);
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what());
  } catch (const json::exception& e) {
    return error_response(400, e.what());
  }
}

HttpResponse RegistrationService::list_frames() const {
  json frames = json::array();
  for (const std::string& id : frame_ids()) {
    frames.push_back({{"id", id}, {"image", "/api/frame/" + id}});
  }
  return json_response(200, {{"format", "ossireg.frames"}, {"version", 1}, {"frames", frames}});
}

HttpResponse RegistrationService::get_frame(const std::string& id) const {
  const std::filesystem::path path = frame_path(id);
  if (path.empty()) return error_response(404, "unknown frame " + id);
  return {200, "image/png", read_file(path)};
}

HttpResponse RegistrationService::render(const std::string& body) {
  const json request = json::parse(body);
  const std::string id = request.at("frame").get<std::string>();
  const std::filesystem::path path = frame_path(id);
  if (path.empty()) return error_response(404, "unknown frame " + id);
  const double opacity = request.value("opacity", 0.5);
  PoseRecord record;
  if (request.contains("pose")) {
    record = parse_pose(request.at("pose").dump());
  } else {
    Session* s = session(id);
    std::lock_guard lock(s->mutex);
    record = s->record;
  }
  const Image8 background = load_png(path);
  const CoordinateMap map = render_coordinate_map(param_, record.camera, record.pose);
  return {200, "image/png", encode_png(blend_overlay(map, background, opacity))};
}

HttpResponse RegistrationService::get_pose(const std::string& id) {
  Session* s = session(id);
  if (!s) return error_response(404, "unknown frame " + id);
  std::lock_guard lock(s->mutex);
  return {200, "application/json", format_pose(s->record)};
}

HttpResponse RegistrationService::post_pose(const std::string& id, const std::string& body) {
  Session* s = session(id);
  if (!s) return error_response(404, "unknown frame " + id);
  if (!json::parse(body).contains("revision")) {
    return error_response(400, "pose write needs the revision it was based on");
  }
  const PoseRecord incoming = parse_pose(body);
  if (!same_camera(incoming.camera, camera_)) {
    return error_response(400, "camera differs from the project camera");
  }
  std::lock_guard lock(s->mutex);
  if (incoming.revision != s->record.revision) {
    json conflict = json::parse(format_pose(s->record));
    conflict["error"] = "stale revision " + std::to_string(incoming.revision) + ", current is " +
                        std::to_string(s->record.revision);
    return json_response(409, conflict);
  }
  s->record.pose = incoming.pose;
  s->record.revision = incoming.revision + 1;
  return {200, "application/json", format_pose(s->record)};
}

HttpResponse RegistrationService::save_pose(const std::string& id) {
  Session* s = session(id);
  if (!s) return error_response(404, "unknown frame " + id);
  std::lock_guard lock(s->mutex);
  std::filesystem::create_directories(poses_dir_);
  const std::filesystem::path out = poses_dir_ / (id + ".json");
  write_pose(out, s->record);
  return json_response(200, {{"saved", out.string()}, {"revision", s->record.revision}});
}

int RegistrationService::bind(const std::string& host, int port) {
  server_ = std::make_unique<httplib::Server>();
  const auto forward = [this](const httplib::Request& req, httplib::Response& res) {
    const HttpResponse out = handle(req.method, req.path, req.body);
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };
  server_->Get(R"(/api/.*)", forward);
  server_->Post(R"(/api/.*)", forward);
  server_->Put(R"(/api/.*)", forward);
  server_->Delete(R"(/api/.*)", forward);
  int bound = port;
  if (port == 0) {
    bound = server_->bind_to_any_port(host);
  } else if (!server_->bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound <= 0) {
    throw Error(ErrorCode::kInvalidInput,
                "cannot listen on " + host + ":" + std::to_string(port) + " (port in use?)");
  }
  return bound;
}

void RegistrationService::run() {
  if (!server_) throw Error(ErrorCode::kInvalidInput, "service: bind before run");
  server_->listen_after_bind();
}

void RegistrationService::stop() {
  if (server_) server_->stop();
}

}  // namespace ossireg::cli
