#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "ossireg/camera.hpp"
#include "ossireg/parameterization.hpp"
#include "project.hpp"

namespace httplib {
class Server;
}

namespace ossireg::cli {

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Manual registration API for the viewer. Each frame id has one session
/// holding the current pose and a revision that every accepted write bumps;
/// writes carrying an older revision are rejected. Saving writes the pose file
/// explicitly, nothing is persisted otherwise.
class RegistrationService {
 public:
  RegistrationService(const Project& project, std::filesystem::path frames_dir,
                      std::filesystem::path poses_dir);
  ~RegistrationService();

  /// Routing without the network layer; safe to call from several threads.
  HttpResponse handle(const std::string& method, const std::string& path,
                      const std::string& body);

  std::vector<std::string> frame_ids() const;

  /// Binds (port 0 picks a free one) and returns the port. Throws when the
  /// address cannot be bound.
  int bind(const std::string& host, int port);
  /// Serves until stop().
  void run();
  void stop();

 private:
  struct Session {
    std::mutex mutex;
    PoseRecord record;
  };

  Session* session(const std::string& frame_id);
  std::filesystem::path frame_path(const std::string& frame_id) const;

  HttpResponse list_frames() const;
  HttpResponse get_frame(const std::string& id) const;
  HttpResponse render(const std::string& body);
  HttpResponse get_pose(const std::string& id);
  HttpResponse post_pose(const std::string& id, const std::string& body);
  HttpResponse save_pose(const std::string& id);

  CameraModel camera_;
  Pose initial_pose_;
  SurfaceParameterization param_;
  std::filesystem::path frames_dir_;
  std::filesystem::path poses_dir_;

  std::mutex sessions_mutex_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace ossireg::cli
