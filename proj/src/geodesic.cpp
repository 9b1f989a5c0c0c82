#include "ossireg/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <sstream>
#include <unordered_map>

#include "ossireg/error.hpp"

namespace ossireg {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<uint64_t>(static_cast<uint32_t>(a)) << 32) |
         static_cast<uint32_t>(b);
}

struct Topology {
  explicit Topology(const SurfaceMesh& mesh)
      : vertex_faces(mesh.vertex_count()), neighbors(mesh.vertex_count()) {
    for (int f = 0; f < mesh.face_count(); ++f) {
      const Face& t = mesh.faces[f];
      for (int k = 0; k < 3; ++k) {
        vertex_faces[t[k]].push_back(f);
        const int a = t[k];
        const int b = t[(k + 1) % 3];
        edge_faces[edge_key(a, b)].push_back(f);
        neighbors[a].push_back(b);
        neighbors[b].push_back(a);
      }
    }
    for (auto& n : neighbors) {
      std::sort(n.begin(), n.end());
      n.erase(std::unique(n.begin(), n.end()), n.end());
    }
  }

  const std::vector<int>& faces_of_edge(int a, int b) const {
    static const std::vector<int> kNone;
    const auto it = edge_faces.find(edge_key(a, b));
    return it == edge_faces.end() ? kNone : it->second;
  }

  std::vector<std::vector<int>> vertex_faces;
  std::vector<std::vector<int>> neighbors;
  std::unordered_map<uint64_t, std::vector<int>> edge_faces;
};

int third_vertex(const Face& f, int a, int b) {
  for (int v : f) {
    if (v != a && v != b) return v;
  }
  return -1;
}

int slot_of(const Face& f, int v) {
  for (int k = 0; k < 3; ++k) {
    if (f[k] == v) return k;
  }
  return -1;
}

bool face_has(const Face& f, int v) { return slot_of(f, v) >= 0; }

double cross2(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  return a.x() * b.y() - a.y() * b.x();
}

// Arrival time at the apex of a planar wave that reaches the two support
// points (apex at the origin, support vectors with Gram entries g11, g12, g22)
// at times ta and tb. Returns +inf when the wave does not come from inside the
// support cone.
double solve_planar(double g11, double g12, double g22, double ta, double tb) {
  const double det = g11 * g22 - g12 * g12;
  if (!(det > 1e-300)) return kInf;
  const double q11 = g22 / det;
  const double q12 = -g12 / det;
  const double q22 = g11 / det;
  const double a = q11 + 2.0 * q12 + q22;
  const double b = q11 * ta + q12 * (ta + tb) + q22 * tb;
  const double c = q11 * ta * ta + 2.0 * q12 * ta * tb + q22 * tb * tb - 1.0;
  const double disc = b * b - a * c;
  if (disc < 0.0 || a <= 0.0) return kInf;
  const double p = (b + std::sqrt(disc)) / a;
  const double l1 = q11 * (ta - p) + q12 * (tb - p);
  const double l2 = q12 * (ta - p) + q22 * (tb - p);
  if (l1 > 0.0 || l2 > 0.0) return kInf;
  if (p < std::max(ta, tb)) return kInf;
  return p;
}

double solve_planar(const Eigen::Vector2d& e1, const Eigen::Vector2d& e2,
                    double ta, double tb) {
  return solve_planar(e1.dot(e1), e1.dot(e2), e2.dot(e2), ta, tb);
}

// Arrival time at the origin from a virtual point source placed in the
// unfolded plane at distances ta and tb from the support points. Exact for
// point sources on flat meshes. Returns +inf when the source does not see the
// origin through the support edge or the result would break monotonicity.
double solve_circular(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                      double ta, double tb) {
  const Eigen::Vector2d ab = b - a;
  const double d = ab.norm();
  if (!(d > 0.0) || ta + tb < d || std::abs(ta - tb) > d) return kInf;
  const double along = (ta * ta - tb * tb + d * d) / (2.0 * d);
  const double h = std::sqrt(std::max(0.0, ta * ta - along * along));
  const Eigen::Vector2d base = a + along * ab / d;
  const Eigen::Vector2d perp(-ab.y() / d, ab.x() / d);
  // The origin lies on the side where cross(ab, origin - a) has this sign.
  const double origin_side = cross2(ab, -a);
  const Eigen::Vector2d source =
      origin_side > 0.0 ? Eigen::Vector2d(base - h * perp)
                        : Eigen::Vector2d(base + h * perp);
  const double orientation = cross2(a, b);
  if (orientation * cross2(a, source) < 0.0 ||
      orientation * cross2(source, b) < 0.0) {
    return kInf;
  }
  const double t = source.norm();
  if (t < std::max(ta, tb)) return kInf;
  return t;
}

double wave_update(const Eigen::Vector2d& a, const Eigen::Vector2d& b,
                   double ta, double tb) {
  const double t = solve_circular(a, b, ta, tb);
  return std::isfinite(t) ? t : solve_planar(a, b, ta, tb);
}

enum class State : unsigned char { kFar, kTrial, kAccepted };

class FastMarcher {
 public:
  FastMarcher(const SurfaceMesh& mesh, const FastMarchOptions& options)
      : mesh_(mesh), topo_(mesh), options_(options),
        values_(mesh.vertex_count(), kInf),
        state_(mesh.vertex_count(), State::kFar) {}

  void seed(int v, double value) {
    if (v < 0 || v >= mesh_.vertex_count()) {
      throw Error(ErrorCode::kInvalidInput,
                  "fast_march: source vertex " + std::to_string(v) + " not in mesh");
    }
    if (value < values_[v]) {
      values_[v] = value;
      state_[v] = State::kTrial;
      heap_.emplace(value, v);
    }
  }

  std::vector<double> run() {
    while (!heap_.empty()) {
      const auto [value, v] = heap_.top();
      heap_.pop();
      if (state_[v] == State::kAccepted || value != values_[v]) continue;
      state_[v] = State::kAccepted;
      for (int f : topo_.vertex_faces[v]) {
        for (int w : mesh_.faces[f]) {
          if (state_[w] == State::kAccepted) continue;
          const double candidate = update(f, w);
          if (candidate < values_[w]) {
            values_[w] = candidate;
            state_[w] = State::kTrial;
            heap_.emplace(candidate, w);
          }
        }
      }
    }
    for (int v = 0; v < mesh_.vertex_count(); ++v) {
      if (state_[v] != State::kAccepted) {
        throw Error(ErrorCode::kDegenerate,
                    "fast_march: vertex " + std::to_string(v) +
                        " is unreachable from the sources");
      }
    }
    return std::move(values_);
  }

 private:
  bool accepted(int v) const { return state_[v] == State::kAccepted; }

  double update(int face, int c) {
    const Face& f = mesh_.faces[face];
    const int k = slot_of(f, c);
    const int a = f[(k + 1) % 3];
    const int b = f[(k + 2) % 3];
    const Vec3& pc = mesh_.positions[c];
    double best = kInf;
    if (accepted(a)) best = std::min(best, values_[a] + (mesh_.positions[a] - pc).norm());
    if (accepted(b)) best = std::min(best, values_[b] + (mesh_.positions[b] - pc).norm());
    if (accepted(a) && accepted(b)) {
      best = std::min(best, triangle_update(face, c, a, b));
    }
    return best;
  }

  double triangle_update(int face, int c, int a, int b) {
    const Vec3 e1 = mesh_.positions[a] - mesh_.positions[c];
    const Vec3 e2 = mesh_.positions[b] - mesh_.positions[c];
    const double la = e1.norm();
    const Vec3 x_axis = e1 / la;
    const Vec3 e2_perp = e2 - e2.dot(x_axis) * x_axis;
    const Eigen::Vector2d a2(la, 0.0);
    const Eigen::Vector2d b2(e2.dot(x_axis), e2_perp.norm());
    if (b2.y() <= 0.0) return kInf;
    const double direct = wave_update(a2, b2, values_[a], values_[b]);
    if (direct < kInf || e1.dot(e2) >= 0.0) return direct;
    return unfolded_update(face, c, a, b, a2, b2);
  }

  // Obtuse angle at c: walk across the opposite edge until a vertex lands
  // inside the angle at c, then split the update into two acute-ish ones.
  double unfolded_update(int face, int c, int a, int b,
                         const Eigen::Vector2d& a2, const Eigen::Vector2d& b2) {
    int p = a, q = b, across_from = c, current = face;
    Eigen::Vector2d p2 = a2, q2 = b2, opposite2(0.0, 0.0);
    for (int step = 0; step < options_.max_unfold_steps; ++step) {
      const auto& candidates = topo_.faces_of_edge(p, q);
      int next = -1;
      for (int g : candidates) {
        if (g != current) next = g;
      }
      if (next < 0) return kInf;
      const int w = third_vertex(mesh_.faces[next], p, q);
      if (w == c) return kInf;

      const Eigen::Vector2d pq = q2 - p2;
      const double d = pq.norm();
      const double rp = (mesh_.positions[w] - mesh_.positions[p]).norm();
      const double rq = (mesh_.positions[w] - mesh_.positions[q]).norm();
      const double along = (rp * rp - rq * rq + d * d) / (2.0 * d);
      const double h = std::sqrt(std::max(0.0, rp * rp - along * along));
      const Eigen::Vector2d base = p2 + along * pq / d;
      const Eigen::Vector2d perp(-pq.y() / d, pq.x() / d);
      const double side_opposite = cross2(pq, opposite2 - p2);
      const Eigen::Vector2d w2 =
          side_opposite > 0.0 ? Eigen::Vector2d(base - h * perp)
                              : Eigen::Vector2d(base + h * perp);

      const bool past_a = cross2(a2, w2) <= 0.0;
      const bool past_b = cross2(w2, b2) <= 0.0;
      if (!past_a && !past_b) {
        if (!accepted(w)) return kInf;
        const double ta = values_[a], tb = values_[b], tw = values_[w];
        return std::min(wave_update(a2, w2, ta, tw), wave_update(w2, b2, tw, tb));
      }
      if (past_a) {
        // The angle at c passes through edge (w, q).
        opposite2 = p2;
        across_from = p;
        p = w;
        p2 = w2;
      } else {
        opposite2 = q2;
        across_from = q;
        q = w;
        q2 = w2;
      }
      (void)across_from;
      current = next;
    }
    return kInf;
  }

  const SurfaceMesh& mesh_;
  Topology topo_;
  FastMarchOptions options_;
  std::vector<double> values_;
  std::vector<State> state_;
  std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                      std::greater<>>
      heap_;
};

double point_segment_distance(const Vec3& p, const Vec3& a, const Vec3& b) {
  const Vec3 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double s = len2 > 0.0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (p - (a + s * ab)).norm();
}

}  // namespace

Vec3 point_on_face(const SurfaceMesh& mesh, int face, const Vec3& barycentric) {
  const Face& f = mesh.faces.at(face);
  Vec3 p = barycentric[0] * mesh.positions[f[0]];
  p += barycentric[1] * mesh.positions[f[1]];
  p += barycentric[2] * mesh.positions[f[2]];
  return p;
}

double GeodesicPath::length() const {
  double sum = 0.0;
  for (size_t i = 1; i < points.size(); ++i) {
    sum += (points[i].position - points[i - 1].position).norm();
  }
  return sum;
}

DistanceField fast_march(const SurfaceMesh& mesh, std::span<const int> sources,
                         const FastMarchOptions& options) {
  if (sources.empty()) {
    throw Error(ErrorCode::kInvalidInput, "fast_march: empty source set");
  }
  FastMarcher marcher(mesh, options);
  for (int s : sources) marcher.seed(s, 0.0);
  DistanceField field;
  field.values = marcher.run();
  field.sources.assign(sources.begin(), sources.end());
  std::sort(field.sources.begin(), field.sources.end());
  field.sources.erase(std::unique(field.sources.begin(), field.sources.end()),
                      field.sources.end());
  return field;
}

DistanceField fast_march(const RegionMesh& region, std::span<const int> sources,
                         const FastMarchOptions& options) {
  return fast_march(region.surface(), sources, options);
}

DistanceField fast_march(const SurfaceMesh& mesh, const GeodesicPath& sources,
                         const FastMarchOptions& options) {
  if (sources.points.empty()) {
    throw Error(ErrorCode::kInvalidInput, "fast_march: empty source path");
  }
  FastMarcher marcher(mesh, options);
  DistanceField field;
  const auto& pts = sources.points;
  for (size_t i = 0; i < pts.size(); ++i) {
    const PathPoint& pt = pts[i];
    if (pt.face < 0 || pt.face >= mesh.face_count()) {
      throw Error(ErrorCode::kInvalidInput, "fast_march: path point outside mesh");
    }
    const Face& f = mesh.faces[pt.face];
    const Vec3& prev = i > 0 ? pts[i - 1].position : pt.position;
    for (int k = 0; k < 3; ++k) {
      const double d = point_segment_distance(mesh.positions[f[k]], prev, pt.position);
      marcher.seed(f[k], d);
      if (pt.barycentric[k] == 1.0) field.sources.push_back(f[k]);
    }
  }
  field.values = marcher.run();
  std::sort(field.sources.begin(), field.sources.end());
  field.sources.erase(std::unique(field.sources.begin(), field.sources.end()),
                      field.sources.end());
  return field;
}

// ---------------------------------------------------------------------------
// Edge graph

namespace {

std::vector<double> dijkstra(const SurfaceMesh& mesh, const Topology& topo,
                             std::span<const int> sources,
                             std::vector<int>* predecessor) {
  std::vector<double> dist(mesh.vertex_count(), kInf);
  if (predecessor) predecessor->assign(mesh.vertex_count(), -1);
  std::priority_queue<std::pair<double, int>, std::vector<std::pair<double, int>>,
                      std::greater<>>
      heap;
  for (int s : sources) {
    dist.at(s) = 0.0;
    heap.emplace(0.0, s);
  }
  while (!heap.empty()) {
    const auto [d, v] = heap.top();
    heap.pop();
    if (d != dist[v]) continue;
    for (int n : topo.neighbors[v]) {
      const double nd = d + (mesh.positions[n] - mesh.positions[v]).norm();
      if (nd < dist[n]) {
        dist[n] = nd;
        if (predecessor) (*predecessor)[n] = v;
        heap.emplace(nd, n);
      }
    }
  }
  return dist;
}

}  // namespace

std::vector<double> edge_graph_distances(const SurfaceMesh& mesh,
                                         std::span<const int> sources) {
  const Topology topo(mesh);
  return dijkstra(mesh, topo, sources, nullptr);
}

std::vector<int> edge_graph_path(const SurfaceMesh& mesh, int from, int to) {
  const Topology topo(mesh);
  std::vector<int> pred;
  const int src[] = {to};
  const auto dist = dijkstra(mesh, topo, src, &pred);
  if (!std::isfinite(dist.at(from))) {
    throw Error(ErrorCode::kDegenerate, "edge_graph_path: vertices not connected");
  }
  std::vector<int> path = {from};
  while (path.back() != to) path.push_back(pred[path.back()]);
  return path;
}

// ---------------------------------------------------------------------------
// Meridian tracing

namespace {

// Either a vertex (b < 0) or the point (1-t)*a + t*b on edge (a, b), a < b.
struct Location {
  int a = -1;
  int b = -1;
  double t = 0.0;

  bool is_vertex() const { return b < 0; }
  static Location vertex(int v) { return {v, -1, 0.0}; }
  static Location edge(int i, int j, double t, double snap) {
    if (t <= snap) return vertex(i);
    if (t >= 1.0 - snap) return vertex(j);
    if (i < j) return {i, j, t};
    return {j, i, 1.0 - t};
  }
};

class MeridianTracer {
 public:
  MeridianTracer(const SurfaceMesh& mesh, const std::vector<double>& field,
                 int beta, const TraceOptions& options)
      : mesh_(mesh), topo_(mesh), field_(field), beta_(beta), options_(options) {}

  GeodesicPath trace(int alpha) {
    std::vector<Location> locations = {Location::vertex(alpha)};
    std::vector<int> faces = {-1};
    for (int step = 0; step < options_.max_steps; ++step) {
      const Location& here = locations.back();
      if (here.is_vertex() && here.a == beta_) return assemble(locations, faces);
      if (const int f = face_with_beta(here); f >= 0) {
        locations.push_back(Location::vertex(beta_));
        faces.push_back(f);
        return assemble(locations, faces);
      }
      auto [next, face] = here.is_vertex() ? step_from_vertex(here.a)
                                           : step_from_edge(here);
      locations.push_back(next);
      faces.push_back(face);
    }
    const Vec3 last = position(locations.back());
    std::ostringstream msg;
    msg << "trace_meridian: no convergence after " << options_.max_steps
        << " steps, last position (" << last.x() << ", " << last.y() << ", "
        << last.z() << ")";
    throw Error(ErrorCode::kNumerical, msg.str());
  }

 private:
  Vec3 position(const Location& l) const {
    if (l.is_vertex()) return mesh_.positions[l.a];
    return (1.0 - l.t) * mesh_.positions[l.a] + l.t * mesh_.positions[l.b];
  }

  double value(const Location& l) const {
    if (l.is_vertex()) return field_[l.a];
    return (1.0 - l.t) * field_[l.a] + l.t * field_[l.b];
  }

  int face_with_beta(const Location& l) const {
    if (l.is_vertex()) {
      for (int f : topo_.vertex_faces[l.a]) {
        if (face_has(mesh_.faces[f], beta_)) return f;
      }
      return -1;
    }
    for (int f : topo_.faces_of_edge(l.a, l.b)) {
      if (face_has(mesh_.faces[f], beta_)) return f;
    }
    return -1;
  }

  Vec3 gradient(int face) const {
    const Face& f = mesh_.faces[face];
    const Vec3 e1 = mesh_.positions[f[1]] - mesh_.positions[f[0]];
    const Vec3 e2 = mesh_.positions[f[2]] - mesh_.positions[f[0]];
    const Eigen::Vector2d coeff = solve_in_basis(
        e1, e2, field_[f[1]] - field_[f[0]], field_[f[2]] - field_[f[0]]);
    return coeff.x() * e1 + coeff.y() * e2;
  }

  // Coefficients (x, y) of the in-plane vector whose dot products with e1 and
  // e2 are d1 and d2, expressed in the basis (e1, e2).
  static Eigen::Vector2d solve_in_basis(const Vec3& e1, const Vec3& e2,
                                        double d1, double d2) {
    Eigen::Matrix2d g;
    g << e1.dot(e1), e1.dot(e2), e1.dot(e2), e2.dot(e2);
    return g.inverse() * Eigen::Vector2d(d1, d2);
  }

  // Coordinates of d in the basis (e1, e2), assuming d is in their plane.
  static Eigen::Vector2d decompose(const Vec3& d, const Vec3& e1, const Vec3& e2) {
    return solve_in_basis(e1, e2, d.dot(e1), d.dot(e2));
  }

  int face_with_edge(int a, int b) const {
    const auto& fs = topo_.faces_of_edge(a, b);
    return fs.empty() ? -1 : *std::min_element(fs.begin(), fs.end());
  }

  std::pair<Location, int> pick(double face_rate, Location face_target,
                                int face_id, double edge_rate,
                                Location edge_target, int edge_face) const {
    if (edge_rate > 0.0 &&
        edge_rate >= face_rate * (1.0 - options_.edge_preference)) {
      return {edge_target, edge_face};
    }
    if (face_rate > 0.0) return {face_target, face_id};
    return {Location{}, -1};
  }

  std::pair<Location, int> step_from_vertex(int v) {
    const Vec3& pv = mesh_.positions[v];
    double face_rate = 0.0;
    Location face_target;
    int face_id = -1;
    for (int f : topo_.vertex_faces[v]) {
      const Face& tri = mesh_.faces[f];
      const int k = slot_of(tri, v);
      const int j = tri[(k + 1) % 3];
      const int l = tri[(k + 2) % 3];
      const Vec3 grad = gradient(f);
      const double rate = grad.norm();
      if (rate <= face_rate) continue;
      const Eigen::Vector2d c =
          decompose(-grad, mesh_.positions[j] - pv, mesh_.positions[l] - pv);
      const double eps = 1e-12 * (std::abs(c.x()) + std::abs(c.y()));
      if (c.x() > eps && c.y() > eps) {
        face_rate = rate;
        face_target = Location::edge(j, l, c.y() / (c.x() + c.y()), options_.snap);
        face_id = f;
      }
    }
    double edge_rate = 0.0;
    int edge_to = -1;
    for (int n : topo_.neighbors[v]) {
      const double slope =
          (field_[v] - field_[n]) / (mesh_.positions[n] - pv).norm();
      if (slope > edge_rate) {
        edge_rate = slope;
        edge_to = n;
      }
    }
    auto [loc, f] = pick(face_rate, face_target, face_id, edge_rate,
                         Location::vertex(edge_to),
                         edge_to >= 0 ? face_with_edge(v, edge_to) : -1);
    if (f >= 0) return {loc, f};
    return stall(v);
  }

  // No descending direction: move to the lowest neighbor.
  std::pair<Location, int> stall(int v) {
    int best = -1;
    for (int n : topo_.neighbors[v]) {
      if (best < 0 || field_[n] < field_[best]) best = n;
    }
    if (best < 0 || field_[best] >= field_[v]) {
      throw Error(ErrorCode::kNumerical,
                  "trace_meridian: stuck at local minimum vertex " +
                      std::to_string(v));
    }
    return {Location::vertex(best), face_with_edge(v, best)};
  }

  std::pair<Location, int> step_from_edge(const Location& here) {
    const int a = here.a, b = here.b;
    const double t = here.t;
    const Vec3& pa = mesh_.positions[a];
    const Vec3 u = mesh_.positions[b] - pa;
    const double here_value = value(here);

    double face_rate = 0.0;
    Location face_target;
    int face_id = -1;
    for (int f : topo_.faces_of_edge(a, b)) {
      const int c = third_vertex(mesh_.faces[f], a, b);
      const Vec3 w = mesh_.positions[c] - pa;
      const Vec3 grad = gradient(f);
      const double rate = grad.norm();
      if (rate <= face_rate) continue;
      const Eigen::Vector2d xy = decompose(-grad, u, w);
      const double x = xy.x(), y = xy.y();
      if (y <= 1e-12 * (std::abs(x) + std::abs(y))) continue;
      double s = kInf;
      bool to_ac = false;
      if (x < 0.0) {
        s = -t / x;
        to_ac = true;
      }
      if (x + y > 0.0 && (1.0 - t) / (x + y) < s) {
        s = (1.0 - t) / (x + y);
        to_ac = false;
      }
      if (!std::isfinite(s) || s <= 0.0) continue;
      const double beta_coord = s * y;
      face_rate = rate;
      face_target = to_ac ? Location::edge(a, c, beta_coord, options_.snap)
                          : Location::edge(b, c, beta_coord, options_.snap);
      face_id = f;
    }

    const double len = u.norm();
    const double to_a = (here_value - field_[a]) / (t * len);
    const double to_b = (here_value - field_[b]) / ((1.0 - t) * len);
    const int edge_face = face_with_edge(a, b);
    const bool prefer_a = to_a >= to_b;
    auto [loc, f] = pick(face_rate, face_target, face_id,
                         std::max(to_a, to_b),
                         Location::vertex(prefer_a ? a : b), edge_face);
    if (f >= 0) return {loc, f};
    return {Location::vertex(field_[a] <= field_[b] ? a : b), edge_face};
  }

  PathPoint make_point(const Location& l, int face) const {
    PathPoint p;
    p.face = face;
    const Face& tri = mesh_.faces[face];
    if (l.is_vertex()) {
      p.barycentric[slot_of(tri, l.a)] = 1.0;
    } else {
      p.barycentric[slot_of(tri, l.a)] = 1.0 - l.t;
      p.barycentric[slot_of(tri, l.b)] = l.t;
    }
    p.position = point_on_face(mesh_, face, p.barycentric);
    return p;
  }

  GeodesicPath assemble(const std::vector<Location>& locations,
                        std::vector<int> faces) const {
    faces[0] = faces.size() > 1 ? faces[1] : faces[0];
    GeodesicPath path;
    for (size_t i = 0; i < locations.size(); ++i) {
      path.points.push_back(make_point(locations[i], faces[i]));
    }
    return path;
  }

  const SurfaceMesh& mesh_;
  Topology topo_;
  const std::vector<double>& field_;
  int beta_;
  TraceOptions options_;

  friend GeodesicPath ossireg::trace_meridian(const SurfaceMesh&,
                                              const DistanceField&, int,
                                              const TraceOptions&);
};

}  // namespace

GeodesicPath trace_meridian(const SurfaceMesh& mesh,
                            const DistanceField& field_from_beta, int alpha,
                            const TraceOptions& options) {
  if (field_from_beta.sources.size() != 1) {
    throw Error(ErrorCode::kInvalidInput,
                "trace_meridian: field must have exactly one source");
  }
  const int beta = field_from_beta.sources.front();
  if (alpha < 0 || alpha >= mesh.vertex_count()) {
    throw Error(ErrorCode::kInvalidInput, "trace_meridian: alpha not in mesh");
  }
  if (alpha == beta) {
    throw Error(ErrorCode::kInvalidInput, "trace_meridian: alpha equals beta");
  }
  if (static_cast<int>(field_from_beta.values.size()) != mesh.vertex_count()) {
    throw Error(ErrorCode::kInvalidInput, "trace_meridian: field/mesh size mismatch");
  }
  MeridianTracer tracer(mesh, field_from_beta.values, beta, options);
  GeodesicPath path = tracer.trace(alpha);

  // The polyline must not be longer than the best path along edges; when
  // descent wandered, fall back to that edge path.
  const std::vector<int> graph = edge_graph_path(mesh, alpha, beta);
  double graph_length = 0.0;
  for (size_t i = 1; i < graph.size(); ++i) {
    graph_length += (mesh.positions[graph[i]] - mesh.positions[graph[i - 1]]).norm();
  }
  if (path.length() > graph_length) {
    GeodesicPath fallback;
    fallback.edge_fallback = true;
    for (size_t i = 0; i < graph.size(); ++i) {
      const int f = i == 0 ? tracer.face_with_edge(graph[0], graph[1])
                           : tracer.face_with_edge(graph[i - 1], graph[i]);
      fallback.points.push_back(tracer.make_point(Location::vertex(graph[i]), f));
    }
    return fallback;
  }
  return path;
}

// ---------------------------------------------------------------------------
// Cutting

namespace {

// Vertices of one original face after inserting meridian crossings, in
// winding order, with the original edges each one lies on (bit k = edge
// from corner k to corner k+1).
struct FacePolygon {
  std::vector<int> vertices;
  std::vector<unsigned> on_edge;
};

void triangulate_convex(const std::vector<int>& poly,
                        const std::vector<Vec3>& positions, const Vec3& normal,
                        std::vector<Face>& out) {
  std::vector<int> ring = poly;
  while (ring.size() > 3) {
    const int n = static_cast<int>(ring.size());
    int best = -1;
    double best_quality = 0.0;
    for (int i = 0; i < n; ++i) {
      const Vec3& p = positions[ring[(i + n - 1) % n]];
      const Vec3& c = positions[ring[i]];
      const Vec3& q = positions[ring[(i + 1) % n]];
      const double area = (c - p).cross(q - p).dot(normal);
      if (area <= 0.0) continue;
      bool blocked = false;
      for (int j = 0; j < n && !blocked; ++j) {
        if (j == i || j == (i + n - 1) % n || j == (i + 1) % n) continue;
        const Vec3& r = positions[ring[j]];
        const double w0 = (c - p).cross(r - p).dot(normal);
        const double w1 = (q - c).cross(r - c).dot(normal);
        const double w2 = (p - q).cross(r - q).dot(normal);
        blocked = w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0;
      }
      if (blocked) continue;
      const double l2 = std::max({(c - p).squaredNorm(), (q - c).squaredNorm(),
                                  (p - q).squaredNorm()});
      const double quality = area / l2;
      if (quality > best_quality) {
        best_quality = quality;
        best = i;
      }
    }
    if (best < 0) {
      throw Error(ErrorCode::kDegenerate,
                  "cut_along_meridian: cannot triangulate split face");
    }
    const int n2 = static_cast<int>(ring.size());
    out.push_back({ring[(best + n2 - 1) % n2], ring[best], ring[(best + 1) % n2]});
    ring.erase(ring.begin() + best);
  }
  out.push_back({ring[0], ring[1], ring[2]});
}

}  // namespace

CutSurface cut_along_meridian(const SurfaceMesh& mesh, const GeodesicPath& meridian) {
  const auto& pts = meridian.points;
  if (pts.size() < 2) {
    throw Error(ErrorCode::kInvalidInput, "cut_along_meridian: path needs two points");
  }
  CutSurface cut;
  cut.region_vertex_count = mesh.vertex_count();
  std::vector<Vec3> positions = mesh.positions;

  // 1. Meridian samples become vertices.
  std::map<std::pair<uint64_t, double>, int> inserted;
  std::unordered_map<uint64_t, std::vector<std::pair<double, int>>> edge_points;
  std::vector<int> sample(pts.size());
  for (size_t i = 0; i < pts.size(); ++i) {
    const PathPoint& p = pts[i];
    if (p.face < 0 || p.face >= mesh.face_count()) {
      throw Error(ErrorCode::kInvalidInput, "cut_along_meridian: bad face tag");
    }
    const Face& f = mesh.faces[p.face];
    std::vector<int> nonzero;
    for (int k = 0; k < 3; ++k) {
      if (p.barycentric[k] != 0.0) nonzero.push_back(k);
    }
    if (nonzero.size() == 1) {
      sample[i] = f[nonzero[0]];
    } else if (nonzero.size() == 2) {
      int a = f[nonzero[0]], b = f[nonzero[1]];
      double t = p.barycentric[nonzero[1]];
      if (a > b) {
        std::swap(a, b);
        t = 1.0 - t;
      }
      const auto key = std::make_pair(edge_key(a, b), t);
      const auto it = inserted.find(key);
      if (it != inserted.end()) {
        sample[i] = it->second;
      } else {
        positions.push_back(p.position);
        sample[i] = static_cast<int>(positions.size()) - 1;
        inserted.emplace(key, sample[i]);
        edge_points[edge_key(a, b)].emplace_back(t, sample[i]);
      }
    } else {
      throw Error(ErrorCode::kDegenerate,
                  "cut_along_meridian: meridian point strictly inside a face is "
                  "not supported");
    }
  }
  for (size_t i = 1; i < sample.size(); ++i) {
    for (size_t j = 0; j + 1 < i; ++j) {
      if (sample[i] == sample[j]) {
        throw Error(ErrorCode::kDegenerate,
                    "cut_along_meridian: meridian visits a vertex twice");
      }
    }
  }
  if (sample[0] == sample[1] && sample.size() == 2) {
    throw Error(ErrorCode::kDegenerate, "cut_along_meridian: zero-length meridian");
  }

  // 2. Re-triangulate faces touched by the samples so that every meridian
  //    segment is an edge.
  std::unordered_map<int, std::vector<std::pair<int, int>>> chords_by_face;
  for (size_t i = 1; i < pts.size(); ++i) {
    if (sample[i - 1] != sample[i]) {
      chords_by_face[pts[i].face].emplace_back(sample[i - 1], sample[i]);
    }
  }

  std::vector<Face> refined;
  refined.reserve(mesh.faces.size() + 4 * pts.size());
  for (int fi = 0; fi < mesh.face_count(); ++fi) {
    const Face& f = mesh.faces[fi];
    FacePolygon poly;
    bool touched = false;
    for (int k = 0; k < 3; ++k) {
      const int a = f[k], b = f[(k + 1) % 3];
      poly.vertices.push_back(a);
      poly.on_edge.push_back((1u << k) | (1u << ((k + 2) % 3)));
      const auto it = edge_points.find(edge_key(a, b));
      if (it == edge_points.end()) continue;
      std::vector<std::pair<double, int>> along = it->second;
      if (a > b) {
        for (auto& [t, v] : along) t = 1.0 - t;
      }
      std::sort(along.begin(), along.end());
      for (const auto& [t, v] : along) {
        poly.vertices.push_back(v);
        poly.on_edge.push_back(1u << k);
        touched = true;
      }
    }
    const auto chord_it = chords_by_face.find(fi);
    if (!touched && chord_it == chords_by_face.end()) {
      refined.push_back(f);
      continue;
    }

    std::vector<std::vector<int>> pieces = {poly.vertices};
    if (chord_it != chords_by_face.end()) {
      const auto index_of = [&](int v) {
        const auto pos = std::find(poly.vertices.begin(), poly.vertices.end(), v);
        if (pos == poly.vertices.end()) {
          throw Error(ErrorCode::kInvalidInput,
                      "cut_along_meridian: segment endpoint not on its face");
        }
        return static_cast<int>(pos - poly.vertices.begin());
      };
      for (const auto& [u, v] : chord_it->second) {
        const int iu = index_of(u), iv = index_of(v);
        if (poly.on_edge[iu] & poly.on_edge[iv]) continue;  // runs along an edge
        for (size_t pi = 0; pi < pieces.size(); ++pi) {
          auto& piece = pieces[pi];
          const auto pu = std::find(piece.begin(), piece.end(), u);
          const auto pv = std::find(piece.begin(), piece.end(), v);
          if (pu == piece.end() || pv == piece.end()) continue;
          const int n = static_cast<int>(piece.size());
          int s = static_cast<int>(pu - piece.begin());
          int e = static_cast<int>(pv - piece.begin());
          if ((s + 1) % n == e || (e + 1) % n == s) break;
          std::vector<int> first, second;
          for (int k = s;; k = (k + 1) % n) {
            first.push_back(piece[k]);
            if (k == e) break;
          }
          for (int k = e;; k = (k + 1) % n) {
            second.push_back(piece[k]);
            if (k == s) break;
          }
          piece = std::move(first);
          pieces.push_back(std::move(second));
          break;
        }
      }
    }
    const Vec3 normal =
        (mesh.positions[f[1]] - mesh.positions[f[0]])
            .cross(mesh.positions[f[2]] - mesh.positions[f[0]]);
    for (const auto& piece : pieces) {
      triangulate_convex(piece, positions, normal, refined);
    }
  }
  cut.refined_vertex_count = static_cast<int>(positions.size());

  SurfaceMesh refined_mesh{positions, refined};
  check_orientation(refined_mesh);
  const Topology topo(refined_mesh);

  // 3. Split the fan around every interior sample into left and right faces.
  const size_t last = sample.size() - 1;
  std::vector<std::pair<int, std::vector<int>>> right_faces;  // (sample, faces)
  for (size_t i = 1; i < last; ++i) {
    const int s = sample[i], prev = sample[i - 1], next = sample[i + 1];
    int seed = -1;
    for (int f : topo.faces_of_edge(s, next)) {
      const Face& tri = refined[f];
      const int k = slot_of(tri, next);
      if (tri[(k + 1) % 3] == s) seed = f;
    }
    if (seed < 0) {
      throw Error(ErrorCode::kDegenerate,
                  "cut_along_meridian: meridian runs along the region boundary at "
                  "sample " + std::to_string(i) + "; the cut would disconnect the region");
    }
    std::set<int> left = {seed};
    std::vector<int> stack = {seed};
    while (!stack.empty()) {
      const int f = stack.back();
      stack.pop_back();
      for (int x : refined[f]) {
        if (x == s || x == prev || x == next) continue;
        for (int g : topo.faces_of_edge(s, x)) {
          if (left.insert(g).second) stack.push_back(g);
        }
      }
    }
    std::vector<int> right;
    for (int f : topo.vertex_faces[s]) {
      if (!left.count(f)) right.push_back(f);
    }
    right_faces.emplace_back(s, std::move(right));
  }

  cut.left_vertex = sample;
  cut.right_vertex = sample;
  cut.left_sources = {sample.front(), sample.back()};
  cut.right_sources = {sample.front(), sample.back()};
  for (size_t i = 1; i < last; ++i) {
    const auto& [s, faces] = right_faces[i - 1];
    positions.push_back(positions[s]);
    const int copy = static_cast<int>(positions.size()) - 1;
    cut.copy_of.push_back(s);
    cut.right_vertex[i] = copy;
    cut.left_sources.push_back(s);
    cut.right_sources.push_back(copy);
    for (int f : faces) {
      refined[f][slot_of(refined[f], s)] = copy;
    }
  }
  cut.mesh = SurfaceMesh{std::move(positions), std::move(refined)};
  if (const int n = count_components(cut.mesh); n != 1) {
    throw Error(ErrorCode::kDegenerate,
                "cut_along_meridian: meridian touches the region boundary and the "
                "cut splits the region into " + std::to_string(n) + " pieces");
  }
  return cut;
}

}  // namespace ossireg
