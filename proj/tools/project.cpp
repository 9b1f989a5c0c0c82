#include "project.hpp"

#include <nlohmann/json.hpp>

#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"

namespace ossireg::cli {
namespace {

using json = nlohmann::json;
namespace fs = std::filesystem;

fs::path resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing(const fs::path& base, const std::string& p, const char* what) {
  const fs::path path = resolve(base, p);
  if (!fs::exists(path)) {
    throw Error(ErrorCode::kInvalidInput,
                std::string(what) + " not found: " + path.string());
  }
  return path;
}

std::string relative_to(const fs::path& path, const fs::path& base) {
  if (base.empty()) return path.string();
  return fs::relative(path, base).string();
}

}  // namespace

ProjectConfig parse_config(const std::string& text, const fs::path& base_dir) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  ProjectConfig c;
  try {
    if (j.value("format", "") != "ossireg.project" || j.value("version", 0) != 1) {
      throw Error(ErrorCode::kParse, "config: expected format ossireg.project version 1");
    }
    c.mesh = existing(base_dir, j.at("mesh").get<std::string>(), "mesh");
    if (j.contains("region") && !j["region"].is_null()) {
      c.region = existing(base_dir, j["region"].get<std::string>(), "region");
    }
    c.alpha = j.at("alpha").get<int>();
    c.beta = j.at("beta").get<int>();
    const json& cam = j.at("camera");
    c.camera.width = cam.at("width").get<int>();
    c.camera.height = cam.at("height").get<int>();
    c.camera.focal = cam.value("focal", 50000.0);
    c.camera.cx = cam.value("cx", c.camera.width / 2.0);
    c.camera.cy = cam.value("cy", c.camera.height / 2.0);
    c.camera.validate();
    c.output_dir = resolve(base_dir, j.value("output_dir", "out"));
    if (j.contains("frames_dir") && !j["frames_dir"].is_null()) {
      c.frames_dir = existing(base_dir, j["frames_dir"].get<std::string>(), "frames_dir");
    }
    if (j.contains("tolerances")) {
      const json& t = j["tolerances"];
      c.pnp.max_iterations = t.value("pnp_max_iterations", c.pnp.max_iterations);
      c.pnp.tol = t.value("pnp_tol", c.pnp.tol);
      c.pnp.step_tol = t.value("pnp_step_tol", c.pnp.step_tol);
      c.pnp.planar_ratio = t.value("planar_ratio", c.pnp.planar_ratio);
      c.ransac_threshold_px = t.value("ransac_threshold_px", c.ransac_threshold_px);
      c.parameterize.fast_march.max_unfold_steps =
          t.value("max_unfold_steps", c.parameterize.fast_march.max_unfold_steps);
      c.parameterize.trace.max_steps = t.value("trace_max_steps", c.parameterize.trace.max_steps);
    }
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kParse, std::string("config: ") + e.what());
  }
  return c;
}

ProjectConfig load_config(const fs::path& path) {
  return parse_config(read_file(path), path.parent_path());
}

std::string format_config(const ProjectConfig& c, const fs::path& base_dir) {
  json j = {{"format", "ossireg.project"},
            {"version", 1},
            {"mesh", relative_to(c.mesh, base_dir)},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"camera",
             {{"focal", c.camera.focal},
              {"cx", c.camera.cx},
              {"cy", c.camera.cy},
              {"width", c.camera.width},
              {"height", c.camera.height}}},
            {"output_dir", relative_to(c.output_dir, base_dir)},
            {"tolerances",
             {{"pnp_max_iterations", c.pnp.max_iterations},
              {"pnp_tol", c.pnp.tol},
              {"pnp_step_tol", c.pnp.step_tol},
              {"planar_ratio", c.pnp.planar_ratio},
              {"ransac_threshold_px", c.ransac_threshold_px},
              {"max_unfold_steps", c.parameterize.fast_march.max_unfold_steps},
              {"trace_max_steps", c.parameterize.trace.max_steps}}}};
  if (c.region) j["region"] = relative_to(*c.region, base_dir);
  if (c.frames_dir) j["frames_dir"] = relative_to(*c.frames_dir, base_dir);
  return j.dump(2) + "\n";
}

Project::Project(ProjectConfig cfg) : config(std::move(cfg)) {
  mesh = std::make_shared<const TriangleMesh>(load_mesh(config.mesh));
  if (config.region) {
    const std::vector<int> selection = load_region_selection(*config.region);
    region = std::make_shared<const RegionMesh>(extract_region(mesh, selection));
  } else {
    region = std::make_shared<const RegionMesh>(extract_full_region(mesh));
  }
  for (int pole : {config.alpha, config.beta}) {
    if (pole < 0 || pole >= mesh->vertex_count() || region->local_index(pole) < 0) {
      throw Error(ErrorCode::kInvalidInput,
                  "pole vertex " + std::to_string(pole) + " is not inside the region");
    }
  }
}

SurfaceParameterization Project::compute_parameterization() const {
  return parameterize(region, config.alpha, config.beta, config.parameterize);
}

SurfaceParameterization Project::parameterization() const {
  const fs::path path = config.parameterization_path();
  if (!fs::exists(path)) return compute_parameterization();
  SurfaceParameterization param = load_parameterization(path, mesh);
  if (param.alpha_parent() != config.alpha || param.beta_parent() != config.beta ||
      param.region->vertex_ids() != region->vertex_ids()) {
    throw Error(ErrorCode::kInvalidInput, path.string() +
                                              " was computed for other poles or another "
                                              "region; rerun parameterize");
  }
  return param;
}

}  // namespace ossireg::cli
