#include "ossireg/parameterization.hpp"

#include <iomanip>
#include <sstream>

#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"

namespace ossireg {
namespace {

constexpr const char* kMagic = "ossireg-parameterization";
constexpr int kVersion = 1;

void attach_cut(SurfaceParameterization& p) {
  p.cut = cut_along_meridian(p.region->surface(), p.meridian);
  const int n = p.cut.mesh.vertex_count();
  p.cut_mu.assign(n, 0.0);
  p.cut_nu.assign(n, 0.0);
  for (int v = 0; v < p.cut.region_vertex_count; ++v) {
    p.cut_mu[v] = p.mu[v];
    p.cut_nu[v] = p.nu[v];
  }
  for (size_t i = 0; i < p.meridian.points.size(); ++i) {
    const int left = p.cut.left_vertex[i];
    const int right = p.cut.right_vertex[i];
    p.cut_mu[left] = p.meridian_mu[i];
    p.cut_nu[left] = 0.0;
    if (right != left) {
      p.cut_mu[right] = p.meridian_mu[i];
      p.cut_nu[right] = 1.0;
    }
  }
}

double interpolate(const SurfaceMesh& mesh, const std::vector<double>& field,
                   const PathPoint& pt) {
  const Face& f = mesh.faces[pt.face];
  return pt.barycentric[0] * field[f[0]] + pt.barycentric[1] * field[f[1]] +
         pt.barycentric[2] * field[f[2]];
}

}  // namespace

double latitude(double d_alpha, double d_beta) {
  const double sum = d_alpha + d_beta;
  if (!(sum > 0.0)) {
    throw Error(ErrorCode::kDegenerate, "latitude: d_alpha + d_beta is zero");
  }
  return d_alpha / sum;
}

double longitude(double d_left, double d_right) {
  const double sum = d_left + d_right;
  return sum > 0.0 ? d_left / sum : 0.0;
}

SurfaceParameterization parameterize(std::shared_ptr<const RegionMesh> region,
                                     int alpha_parent, int beta_parent,
                                     const ParameterizeOptions& options) {
  if (!region) {
    throw Error(ErrorCode::kInvalidInput, "parameterize: null region");
  }
  SurfaceParameterization p;
  p.region = region;
  p.options = options;
  p.alpha = region->local_index(alpha_parent);
  p.beta = region->local_index(beta_parent);
  if (p.alpha < 0 || p.beta < 0) {
    throw Error(ErrorCode::kInvalidInput,
                "parameterize: pole vertices must lie in the region");
  }
  if (p.alpha == p.beta) {
    throw Error(ErrorCode::kInvalidInput, "parameterize: alpha equals beta");
  }
  const SurfaceMesh& surface = region->surface();
  const int from_alpha[] = {p.alpha};
  const int from_beta[] = {p.beta};
  const DistanceField d_alpha = fast_march(surface, from_alpha, options.fast_march);
  const DistanceField d_beta = fast_march(surface, from_beta, options.fast_march);

  const int n = surface.vertex_count();
  p.mu.resize(n);
  for (int v = 0; v < n; ++v) {
    p.mu[v] = latitude(d_alpha.values[v], d_beta.values[v]);
  }

  p.meridian = trace_meridian(surface, d_beta, p.alpha, options.trace);
  for (const PathPoint& pt : p.meridian.points) {
    p.meridian_mu.push_back(latitude(interpolate(surface, d_alpha.values, pt),
                                     interpolate(surface, d_beta.values, pt)));
  }

  const CutSurface cut = cut_along_meridian(surface, p.meridian);
  const DistanceField d_left =
      fast_march(cut.mesh, cut.left_sources, options.fast_march);
  const DistanceField d_right =
      fast_march(cut.mesh, cut.right_sources, options.fast_march);
  p.nu.resize(n);
  for (int v = 0; v < n; ++v) {
    p.nu[v] = longitude(d_left.values[v], d_right.values[v]);
  }
  // Vertices on the meridian take the left-copy value.
  for (int v : cut.left_vertex) {
    if (v < n) p.nu[v] = 0.0;
  }
  attach_cut(p);
  return p;
}

SurfaceParameterization transfer_parameterization(
    const SurfaceParameterization& source,
    std::shared_ptr<const TriangleMesh> target_mesh) {
  if (!target_mesh || !source.region) {
    throw Error(ErrorCode::kInvalidInput, "transfer_parameterization: null input");
  }
  if (target_mesh->vertex_count() != source.region->parent()->vertex_count()) {
    throw Error(ErrorCode::kInvalidInput,
                "transfer_parameterization: vertex count mismatch (" +
                    std::to_string(target_mesh->vertex_count()) + " vs " +
                    std::to_string(source.region->parent()->vertex_count()) + ")");
  }
  SurfaceParameterization p;
  p.region = std::make_shared<const RegionMesh>(
      extract_region(target_mesh, source.region->vertex_ids()));
  p.alpha = source.alpha;
  p.beta = source.beta;
  p.mu = source.mu;
  p.nu = source.nu;
  p.options = source.options;
  p.meridian = source.meridian;
  for (PathPoint& pt : p.meridian.points) {
    pt.position = point_on_face(p.region->surface(), pt.face, pt.barycentric);
  }
  p.meridian_mu = source.meridian_mu;
  attach_cut(p);
  return p;
}

std::string format_parameterization(const SurfaceParameterization& p) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << kMagic << ' ' << kVersion << '\n';
  out << "alpha " << p.alpha_parent() << '\n';
  out << "beta " << p.beta_parent() << '\n';
  out << "fast_march.max_unfold_steps " << p.options.fast_march.max_unfold_steps << '\n';
  out << "trace.max_steps " << p.options.trace.max_steps << '\n';
  out << "trace.snap " << p.options.trace.snap << '\n';
  out << "trace.edge_preference " << p.options.trace.edge_preference << '\n';
  out << "meridian " << p.meridian.points.size() << ' '
      << (p.meridian.edge_fallback ? "edge_fallback" : "descent") << '\n';
  out << "# face b0 b1 b2 x y z mu\n";
  for (size_t i = 0; i < p.meridian.points.size(); ++i) {
    const PathPoint& pt = p.meridian.points[i];
    out << pt.face << ' ' << pt.barycentric[0] << ' ' << pt.barycentric[1] << ' '
        << pt.barycentric[2] << ' ' << pt.position.x() << ' ' << pt.position.y()
        << ' ' << pt.position.z() << ' ' << p.meridian_mu[i] << '\n';
  }
  out << "vertices " << p.mu.size() << '\n';
  out << "# vertex_id mu nu\n";
  for (size_t v = 0; v < p.mu.size(); ++v) {
    out << p.region->parent_index(static_cast<int>(v)) << ' ' << p.mu[v] << ' '
        << p.nu[v] << '\n';
  }
  return out.str();
}

SurfaceParameterization parse_parameterization(
    const std::string& text, std::shared_ptr<const TriangleMesh> mesh) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  const auto fail = [&](const std::string& what) {
    return Error(ErrorCode::kParse,
                 "parameterization line " + std::to_string(line_no) + ": " + what);
  };
  const auto next_line = [&]() -> std::istringstream {
    while (std::getline(in, line)) {
      ++line_no;
      if (!line.empty() && line[0] != '#') return std::istringstream(line);
    }
    throw fail("unexpected end of file");
  };

  std::string magic;
  int version = 0;
  if (!(next_line() >> magic >> version) || magic != kMagic) {
    throw fail("missing header");
  }
  if (version != kVersion) throw fail("unsupported version " + std::to_string(version));

  SurfaceParameterization p;
  int alpha_parent = -1, beta_parent = -1;
  size_t meridian_count = 0;
  std::string key;
  for (;;) {
    auto ls = next_line();
    ls >> key;
    if (key == "alpha") ls >> alpha_parent;
    else if (key == "beta") ls >> beta_parent;
    else if (key == "fast_march.max_unfold_steps") ls >> p.options.fast_march.max_unfold_steps;
    else if (key == "trace.max_steps") ls >> p.options.trace.max_steps;
    else if (key == "trace.snap") ls >> p.options.trace.snap;
    else if (key == "trace.edge_preference") ls >> p.options.trace.edge_preference;
    else if (key == "meridian") {
      std::string kind;
      ls >> meridian_count >> kind;
      p.meridian.edge_fallback = kind == "edge_fallback";
      break;
    } else {
      throw fail("unknown key '" + key + "'");
    }
    if (ls.fail()) throw fail("malformed value for '" + key + "'");
  }
  for (size_t i = 0; i < meridian_count; ++i) {
    auto ls = next_line();
    PathPoint pt;
    double mu = 0.0;
    if (!(ls >> pt.face >> pt.barycentric[0] >> pt.barycentric[1] >>
          pt.barycentric[2] >> pt.position.x() >> pt.position.y() >>
          pt.position.z() >> mu)) {
      throw fail("malformed meridian point");
    }
    p.meridian.points.push_back(pt);
    p.meridian_mu.push_back(mu);
  }
  size_t vertex_count = 0;
  if (!(next_line() >> key >> vertex_count) || key != "vertices") {
    throw fail("expected 'vertices <count>'");
  }
  std::vector<int> ids(vertex_count);
  std::vector<double> mu(vertex_count), nu(vertex_count);
  for (size_t i = 0; i < vertex_count; ++i) {
    if (!(next_line() >> ids[i] >> mu[i] >> nu[i])) throw fail("malformed vertex row");
  }

  p.region = std::make_shared<const RegionMesh>(extract_region(mesh, ids));
  if (p.region->vertex_count() != static_cast<int>(vertex_count)) {
    throw fail("duplicate vertex ids");
  }
  p.mu.assign(vertex_count, 0.0);
  p.nu.assign(vertex_count, 0.0);
  for (size_t i = 0; i < vertex_count; ++i) {
    const int local = p.region->local_index(ids[i]);
    p.mu[local] = mu[i];
    p.nu[local] = nu[i];
  }
  p.alpha = p.region->local_index(alpha_parent);
  p.beta = p.region->local_index(beta_parent);
  if (p.alpha < 0 || p.beta < 0) throw fail("poles not inside the region");
  for (const PathPoint& pt : p.meridian.points) {
    if (pt.face < 0 || pt.face >= p.region->face_count()) {
      throw fail("meridian face index out of range");
    }
  }
  attach_cut(p);
  return p;
}

void write_parameterization(const std::filesystem::path& path,
                            const SurfaceParameterization& param) {
  write_file(path, format_parameterization(param));
}

SurfaceParameterization load_parameterization(
    const std::filesystem::path& path, std::shared_ptr<const TriangleMesh> mesh) {
  return parse_parameterization(read_file(path), std::move(mesh));
}

}  // namespace ossireg
