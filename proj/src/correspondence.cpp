#include "ossireg/correspondence.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "ossireg/error.hpp"

namespace ossireg {

ParameterIndex::ParameterIndex(std::span<const double> mu, std::span<const double> nu)
    : mu_(mu.begin(), mu.end()), nu_(nu.begin(), nu.end()) {
  if (mu.size() != nu.size()) {
    throw Error(ErrorCode::kInvalidInput, "parameter index: mu/nu size mismatch");
  }
  if (mu.empty()) throw Error(ErrorCode::kInvalidInput, "parameter index: no points");
  cells_ = std::clamp(static_cast<int>(std::sqrt(mu.size() / 2.0)), 1, 2048);
  const int n_cells = cells_ * cells_;
  std::vector<int> cell(mu.size());
  start_.assign(n_cells + 1, 0);
  for (size_t i = 0; i < mu.size(); ++i) {
    cell[i] = cell_of(nu[i]) * cells_ + cell_of(mu[i]);
    ++start_[cell[i] + 1];
  }
  for (int c = 0; c < n_cells; ++c) start_[c + 1] += start_[c];
  items_.resize(mu.size());
  std::vector<int> fill(start_.begin(), start_.end() - 1);
  for (size_t i = 0; i < mu.size(); ++i) items_[fill[cell[i]]++] = static_cast<int>(i);
}

int ParameterIndex::cell_of(double value) const {
  return std::clamp(static_cast<int>(std::floor(value * cells_)), 0, cells_ - 1);
}

int ParameterIndex::nearest(double mu, double nu) const {
  if (mu_.empty()) throw Error(ErrorCode::kInvalidInput, "parameter index is empty");
  const int cx = cell_of(mu);
  const int cy = cell_of(nu);
  const double cell = 1.0 / cells_;
  int best = -1;
  double best_d2 = std::numeric_limits<double>::infinity();
  const auto scan = [&](int x, int y) {
    if (x < 0 || x >= cells_ || y < 0 || y >= cells_) return;
    const int c = y * cells_ + x;
    for (int k = start_[c]; k < start_[c + 1]; ++k) {
      const int i = items_[k];
      const double du = mu_[i] - mu, dv = nu_[i] - nu;
      const double d2 = du * du + dv * dv;
      if (d2 < best_d2 || (d2 == best_d2 && i < best)) {
        best_d2 = d2;
        best = i;
      }
    }
  };
  for (int ring = 0; ring < cells_; ++ring) {
    if (best >= 0) {
      // Distance from the query to anything outside the square scanned so far.
      const double reach = std::min({mu - (cx - ring + 1) * cell, (cx + ring) * cell - mu,
                                     nu - (cy - ring + 1) * cell, (cy + ring) * cell - nu});
      if (reach > 0.0 && best_d2 < reach * reach) break;
    }
    if (ring == 0) {
      scan(cx, cy);
      continue;
    }
    for (int x = cx - ring; x <= cx + ring; ++x) {
      scan(x, cy - ring);
      scan(x, cy + ring);
    }
    for (int y = cy - ring + 1; y <= cy + ring - 1; ++y) {
      scan(cx - ring, y);
      scan(cx + ring, y);
    }
  }
  return best;
}

ParameterIndex build_parameter_index(const SurfaceParameterization& param) {
  return ParameterIndex(param.cut_mu, param.cut_nu);
}

namespace {

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + t * ab)).norm();
}

// Closest point of triangle (a, b, c) to p, as barycentric weights.
std::array<double, 3> closest_barycentric(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                                          const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                                          double& distance) {
  const double det = cross2(b - a, c - a);
  const double w1 = cross2(p - a, c - a) / det;
  const double w2 = cross2(b - a, p - a) / det;
  if (w1 >= 0.0 && w2 >= 0.0 && w1 + w2 <= 1.0) {
    distance = 0.0;
    return {1.0 - w1 - w2, w1, w2};
  }
  const std::array<const Eigen::Vector2d*, 3> v = {&a, &b, &c};
  std::array<double, 3> best{};
  distance = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    const Eigen::Vector2d& s = *v[k];
    const Eigen::Vector2d& e = *v[(k + 1) % 3];
    const Eigen::Vector2d se = e - s;
    const double len2 = se.squaredNorm();
    const double t = len2 > 0.0 ? std::clamp((p - s).dot(se) / len2, 0.0, 1.0) : 0.0;
    const double d = (p - (s + t * se)).norm();
    if (d < distance) {
      distance = d;
      best = {0.0, 0.0, 0.0};
      best[k] = 1.0 - t;
      best[(k + 1) % 3] = t;
    }
  }
  return best;
}

}  // namespace

ParameterFaceIndex::ParameterFaceIndex(const SurfaceMesh& mesh, std::span<const double> mu,
                                       std::span<const double> nu, double ambiguity_radius)
    : mesh_(&mesh), radius_(ambiguity_radius) {
  if (mu.size() != mesh.positions.size() || nu.size() != mesh.positions.size()) {
    throw Error(ErrorCode::kInvalidInput, "parameter face index: values do not match the mesh");
  }
  uv_.resize(mu.size());
  for (size_t i = 0; i < mu.size(); ++i) uv_[i] = {mu[i], nu[i]};

  // Signed parameter-space area against surface area; the majority sign is
  // the unfolded orientation.
  const size_t n_faces = mesh.faces.size();
  std::vector<double> signed_area(n_faces), surface_area(n_faces);
  double total_param = 0.0, total_surface = 0.0, orientation = 0.0;
  for (size_t f = 0; f < n_faces; ++f) {
    const auto& face = mesh.faces[f];
    signed_area[f] = 0.5 * cross2(uv_[face[1]] - uv_[face[0]], uv_[face[2]] - uv_[face[0]]);
    surface_area[f] = 0.5 * (mesh.positions[face[1]] - mesh.positions[face[0]])
                                .cross(mesh.positions[face[2]] - mesh.positions[face[0]])
                                .norm();
    total_param += std::abs(signed_area[f]);
    total_surface += surface_area[f];
    orientation += signed_area[f];
  }
  const double sign = orientation < 0.0 ? -1.0 : 1.0;
  const double min_ratio = total_surface > 0.0 ? 1e-3 * total_param / total_surface : 0.0;
  ill_.assign(n_faces, 0);
  for (size_t f = 0; f < n_faces; ++f) {
    ill_[f] = sign * signed_area[f] <= min_ratio * surface_area[f];
  }

  cells_ = std::clamp(static_cast<int>(std::sqrt(n_faces / 2.0)), 1, 2048);
  const auto cell_of = [&](double v) {
    return std::clamp(static_cast<int>(std::floor(v * cells_)), 0, cells_ - 1);
  };
  // Bounding boxes grown by the ambiguity radius. Two passes: count, fill.
  std::vector<std::array<int, 4>> boxes(n_faces);
  start_.assign(cells_ * cells_ + 1, 0);
  for (size_t f = 0; f < n_faces; ++f) {
    const auto& face = mesh.faces[f];
    double lo_u = 1.0, hi_u = 0.0, lo_v = 1.0, hi_v = 0.0;
    for (int v : face) {
      lo_u = std::min(lo_u, uv_[v].x());
      hi_u = std::max(hi_u, uv_[v].x());
      lo_v = std::min(lo_v, uv_[v].y());
      hi_v = std::max(hi_v, uv_[v].y());
    }
    boxes[f] = {cell_of(lo_u - radius_), cell_of(hi_u + radius_), cell_of(lo_v - radius_),
                cell_of(hi_v + radius_)};
    for (int y = boxes[f][2]; y <= boxes[f][3]; ++y) {
      for (int x = boxes[f][0]; x <= boxes[f][1]; ++x) ++start_[y * cells_ + x + 1];
    }
  }
  for (int c = 0; c < cells_ * cells_; ++c) start_[c + 1] += start_[c];
  items_.resize(start_.back());
  std::vector<int> fill(start_.begin(), start_.end() - 1);
  for (size_t f = 0; f < n_faces; ++f) {
    for (int y = boxes[f][2]; y <= boxes[f][3]; ++y) {
      for (int x = boxes[f][0]; x <= boxes[f][1]; ++x) {
        items_[fill[y * cells_ + x]++] = static_cast<int>(f);
      }
    }
  }
}

int ParameterFaceIndex::ill_conditioned_count() const {
  return static_cast<int>(std::count(ill_.begin(), ill_.end(), 1));
}

ParameterFaceIndex::Hit ParameterFaceIndex::locate(double mu, double nu) const {
  Hit hit;
  if (!mesh_) return hit;
  const int x = std::clamp(static_cast<int>(std::floor(mu * cells_)), 0, cells_ - 1);
  const int y = std::clamp(static_cast<int>(std::floor(nu * cells_)), 0, cells_ - 1);
  const int c = y * cells_ + x;
  const Eigen::Vector2d p(mu, nu);
  for (int k = start_[c]; k < start_[c + 1]; ++k) {
    const int f = items_[k];
    const auto& face = mesh_->faces[f];
    const Eigen::Vector2d& a = uv_[face[0]];
    const Eigen::Vector2d& b = uv_[face[1]];
    const Eigen::Vector2d& d = uv_[face[2]];
    if (ill_[f]) {
      // Folded or collapsed: ambiguous if the point is on or near it.
      const double s0 = cross2(b - a, p - a), s1 = cross2(d - b, p - b),
                   s2 = cross2(a - d, p - d);
      const bool inside = (s0 >= 0 && s1 >= 0 && s2 >= 0) || (s0 <= 0 && s1 <= 0 && s2 <= 0);
      const double dist =
          std::min({segment_distance(p, a, b), segment_distance(p, b, d),
                    segment_distance(p, d, a)});
      if ((inside && cross2(b - a, d - a) != 0.0) || dist <= radius_) {
        hit.status = Status::kAmbiguous;
        hit.face = -1;
        return hit;
      }
      continue;
    }
    if (hit.face >= 0) continue;
    const Eigen::Vector2d e1 = b - a, e2 = d - a, q = p - a;
    const double det = cross2(e1, e2);
    const double b1 = cross2(q, e2) / det;
    const double b2 = cross2(e1, q) / det;
    const double b0 = 1.0 - b1 - b2;
    constexpr double kSlack = -1e-12;
    if (b0 < kSlack || b1 < kSlack || b2 < kSlack) continue;
    // Items within a cell are in ascending face order; keep scanning only to
    // catch ill-conditioned neighbours.
    hit.status = Status::kFound;
    hit.face = f;
    hit.barycentric = {b0, b1, b2};
  }
  return hit;
}

ParameterFaceIndex::Hit ParameterFaceIndex::closest(double mu, double nu,
                                                    double max_distance) const {
  Hit hit;
  if (!mesh_) return hit;
  const auto cell_of = [&](double v) {
    return std::clamp(static_cast<int>(std::floor(v * cells_)), 0, cells_ - 1);
  };
  const Eigen::Vector2d p(mu, nu);
  double best = max_distance, ill_best = std::numeric_limits<double>::infinity();
  for (int y = cell_of(nu - max_distance); y <= cell_of(nu + max_distance); ++y) {
    for (int x = cell_of(mu - max_distance); x <= cell_of(mu + max_distance); ++x) {
      const int c = y * cells_ + x;
      for (int k = start_[c]; k < start_[c + 1]; ++k) {
        const int f = items_[k];
        const auto& face = mesh_->faces[f];
        const Eigen::Vector2d& a = uv_[face[0]];
        const Eigen::Vector2d& b = uv_[face[1]];
        const Eigen::Vector2d& d = uv_[face[2]];
        if (ill_[f]) {
          ill_best = std::min({ill_best, segment_distance(p, a, b), segment_distance(p, b, d),
                               segment_distance(p, d, a)});
          continue;
        }
        double dist = 0.0;
        const auto w = closest_barycentric(p, a, b, d, dist);
        if (dist < best || (dist == best && hit.face >= 0 && f < hit.face)) {
          best = dist;
          hit = {Status::kFound, f, w};
        }
      }
    }
  }
  if (hit.face >= 0 && ill_best <= best) return {Status::kAmbiguous, -1, {}};
  return hit;
}

CorrespondenceIndex build_correspondence_index(const SurfaceParameterization& param) {
  return {ParameterIndex(param.cut_mu, param.cut_nu),
          ParameterFaceIndex(param.cut.mesh, param.cut_mu, param.cut_nu)};
}

CorrespondenceSet extract_correspondences(const CoordinateMap& map,
                                          const SurfaceParameterization& param,
                                          const CorrespondenceIndex& index, LookupMode mode) {
  // A few 16-bit quantization steps.
  constexpr double kSnapDistance = 4.0 / 65535.0;
  const SurfaceMesh& mesh = param.cut.mesh;
  if (index.vertices.size() != mesh.vertex_count()) {
    throw Error(ErrorCode::kInvalidInput,
                "extract_correspondences: index does not match the parameterization");
  }
  CorrespondenceSet set;
  set.width = map.width;
  set.height = map.height;
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const int i = map.index(x, y);
      if (!map.valid[i]) continue;
      Vec3 point;
      ParameterFaceIndex::Hit hit;
      if (mode == LookupMode::kInterpolate) {
        hit = index.faces.locate(map.mu[i], map.nu[i]);
        if (hit.status == ParameterFaceIndex::Status::kOutside) {
          hit = index.faces.closest(map.mu[i], map.nu[i], kSnapDistance);
        }
        if (hit.status == ParameterFaceIndex::Status::kAmbiguous) continue;
      }
      if (hit.status == ParameterFaceIndex::Status::kFound) {
        const Face& f = mesh.faces[hit.face];
        point = hit.barycentric[0] * mesh.positions[f[0]] +
                hit.barycentric[1] * mesh.positions[f[1]] +
                hit.barycentric[2] * mesh.positions[f[2]];
      } else {
        point = mesh.positions[index.vertices.nearest(map.mu[i], map.nu[i])];
      }
      set.items.push_back({Eigen::Vector2d(x + 0.5, y + 0.5), point, 1.0});
    }
  }
  return set;
}

CorrespondenceSet extract_correspondences(const CoordinateMap& map,
                                          const SurfaceParameterization& param,
                                          LookupMode mode) {
  return extract_correspondences(map, param, build_correspondence_index(param), mode);
}

std::string format_correspondences(const CorrespondenceSet& set) {
  std::ostringstream out;
  out << std::setprecision(17);
  out << "ossireg-correspondences 1 " << set.width << ' ' << set.height << ' '
      << set.items.size() << '\n';
  out << "# u v x y z w\n";
  for (const auto& c : set.items) {
    out << c.pixel.x() << ' ' << c.pixel.y() << ' ' << c.point.x() << ' ' << c.point.y()
        << ' ' << c.point.z() << ' ' << c.weight << '\n';
  }
  return out.str();
}

CorrespondenceSet parse_correspondences(const std::string& text) {
  std::istringstream in(text);
  std::string magic;
  int version = 0;
  size_t count = 0;
  CorrespondenceSet set;
  if (!(in >> magic >> version >> set.width >> set.height >> count) ||
      magic != "ossireg-correspondences") {
    throw Error(ErrorCode::kFormat, "correspondences: bad header");
  }
  if (version != 1) throw Error(ErrorCode::kFormat, "correspondences: unsupported version");
  std::string line;
  std::getline(in, line);
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream row(line);
    Correspondence c;
    if (!(row >> c.pixel.x() >> c.pixel.y() >> c.point.x() >> c.point.y() >> c.point.z() >>
          c.weight)) {
      throw Error(ErrorCode::kParse, "correspondences: line " + std::to_string(line_no) +
                                         ": expected u v x y z w");
    }
    set.items.push_back(c);
  }
  if (set.items.size() != count) {
    throw Error(ErrorCode::kParse, "correspondences: header says " + std::to_string(count) +
                                       " rows, found " + std::to_string(set.items.size()));
  }
  return set;
}

}  // namespace ossireg
