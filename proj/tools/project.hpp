#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "ossireg/camera.hpp"
#include "ossireg/parameterization.hpp"
#include "ossireg/pnp.hpp"

namespace ossireg::cli {

/// One registration case. Relative paths resolve against the config file.
struct ProjectConfig {
  std::filesystem::path mesh;
  std::optional<std::filesystem::path> region;  ///< whole mesh when absent
  int alpha = -1;  ///< parent vertex indices of the poles
  int beta = -1;
  CameraModel camera;
  std::filesystem::path output_dir;
  /// Background frames served to the viewer, <id>.png.
  std::optional<std::filesystem::path> frames_dir;
  PnPOptions pnp;
  ParameterizeOptions parameterize;
  double ransac_threshold_px = 8.0;

  std::filesystem::path parameterization_path() const { return output_dir / "param.txt"; }
};

/// Parses the JSON config; checks that referenced files exist.
ProjectConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ProjectConfig load_config(const std::filesystem::path& path);
std::string format_config(const ProjectConfig& config, const std::filesystem::path& base_dir);

/// Mesh and region loaded, poles checked against the region.
struct Project {
  ProjectConfig config;
  std::shared_ptr<const TriangleMesh> mesh;
  std::shared_ptr<const RegionMesh> region;

  explicit Project(ProjectConfig cfg);

  SurfaceParameterization compute_parameterization() const;
  /// The saved parameterization when present, computed otherwise.
  SurfaceParameterization parameterization() const;
};

}  // namespace ossireg::cli
