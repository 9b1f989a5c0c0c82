#include "ossireg/mesh.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <iomanip>
#include <map>
#include <numeric>
#include <sstream>

#include "ossireg/error.hpp"
#include "ossireg/file_io.hpp"

namespace ossireg {
namespace {

void validate_faces(const std::vector<Face>& faces, int vertex_count,
                    const std::vector<std::string>* context) {
  for (size_t f = 0; f < faces.size(); ++f) {
    const auto where = [&] {
      return context ? (*context)[f] : "face " + std::to_string(f);
    };
    for (int idx : faces[f]) {
      if (idx < 0 || idx >= vertex_count) {
        throw Error(ErrorCode::kInvalidInput,
                    where() + ": vertex index " + std::to_string(idx) +
                        " out of range (vertex count " +
                        std::to_string(vertex_count) + ")");
      }
    }
    const Face& t = faces[f];
    if (t[0] == t[1] || t[1] == t[2] || t[0] == t[2]) {
      throw Error(ErrorCode::kInvalidInput,
                  where() + ": face references the same vertex twice");
    }
  }
}

struct DisjointSets {
  explicit DisjointSets(int n) : parent(n) {
    std::iota(parent.begin(), parent.end(), 0);
  }
  int find(int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(int a, int b) { parent[find(a)] = find(b); }
  std::vector<int> parent;
};

}  // namespace

TriangleMesh::TriangleMesh(std::vector<Vec3> vertices, std::vector<Face> faces,
                           std::vector<int> labels)
    : vertices_(std::move(vertices)),
      faces_(std::move(faces)),
      labels_(std::move(labels)) {
  validate_faces(faces_, vertex_count(), nullptr);
  if (!labels_.empty() && labels_.size() != vertices_.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "label count does not match vertex count");
  }
}

TriangleMesh TriangleMesh::with_positions(std::vector<Vec3> positions) const {
  if (positions.size() != vertices_.size()) {
    throw Error(ErrorCode::kInvalidInput,
                "morph must preserve the vertex count");
  }
  return TriangleMesh(std::move(positions), faces_, labels_);
}

// ---------------------------------------------------------------------------
// OBJ

TriangleMesh parse_obj(const std::string& text) {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::string> context;

  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    const std::string where = "line " + std::to_string(line_no);
    if (tag == "v") {
      Vec3 p;
      if (!(ls >> p.x() >> p.y() >> p.z())) {
        throw Error(ErrorCode::kParse, where + ": malformed vertex record");
      }
      vertices.push_back(p);
    } else if (tag == "f") {
      std::vector<int> idx;
      std::string tok;
      while (ls >> tok) {
        const std::string head = tok.substr(0, tok.find('/'));
        int value = 0;
        const auto [ptr, ec] =
            std::from_chars(head.data(), head.data() + head.size(), value);
        if (ec != std::errc() || ptr != head.data() + head.size() ||
            value == 0) {
          throw Error(ErrorCode::kParse,
                      where + ": malformed face index '" + tok + "'");
        }
        // Negative indices are relative to the vertices read so far.
        idx.push_back(value > 0 ? value - 1
                                : static_cast<int>(vertices.size()) + value);
      }
      if (idx.size() != 3) {
        throw Error(ErrorCode::kParse,
                    where + ": only triangle faces are supported (got " +
                        std::to_string(idx.size()) + " vertices)");
      }
      faces.push_back({idx[0], idx[1], idx[2]});
      context.push_back(where);
    }
  }
  validate_faces(faces, static_cast<int>(vertices.size()), &context);
  return TriangleMesh(std::move(vertices), std::move(faces));
}

std::string format_obj(const TriangleMesh& mesh) {
  std::ostringstream out;
  out << std::setprecision(17);
  for (const Vec3& v : mesh.vertices()) {
    out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  }
  for (const Face& f : mesh.faces()) {
    out << "f " << f[0] + 1 << ' ' << f[1] + 1 << ' ' << f[2] + 1 << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// PLY

namespace {

enum class PlyType { kInt8, kUInt8, kInt16, kUInt16, kInt32, kUInt32, kFloat32, kFloat64 };

PlyType parse_ply_type(const std::string& name, const std::string& where) {
  static const std::map<std::string, PlyType> kTypes = {
      {"char", PlyType::kInt8},     {"int8", PlyType::kInt8},
      {"uchar", PlyType::kUInt8},   {"uint8", PlyType::kUInt8},
      {"short", PlyType::kInt16},   {"int16", PlyType::kInt16},
      {"ushort", PlyType::kUInt16}, {"uint16", PlyType::kUInt16},
      {"int", PlyType::kInt32},     {"int32", PlyType::kInt32},
      {"uint", PlyType::kUInt32},   {"uint32", PlyType::kUInt32},
      {"float", PlyType::kFloat32}, {"float32", PlyType::kFloat32},
      {"double", PlyType::kFloat64}, {"float64", PlyType::kFloat64}};
  const auto it = kTypes.find(name);
  if (it == kTypes.end()) {
    throw Error(ErrorCode::kParse, where + ": unknown PLY type '" + name + "'");
  }
  return it->second;
}

size_t ply_type_size(PlyType t) {
  switch (t) {
    case PlyType::kInt8:
    case PlyType::kUInt8: return 1;
    case PlyType::kInt16:
    case PlyType::kUInt16: return 2;
    case PlyType::kInt32:
    case PlyType::kUInt32:
    case PlyType::kFloat32: return 4;
    case PlyType::kFloat64: return 8;
  }
  return 0;
}

struct PlyProperty {
  std::string name;
  PlyType type = PlyType::kFloat32;
  bool is_list = false;
  PlyType count_type = PlyType::kUInt8;
};

struct PlyElement {
  std::string name;
  size_t count = 0;
  std::vector<PlyProperty> properties;
};

class PlyReader {
 public:
  PlyReader(const std::string& bytes, size_t offset, bool binary)
      : bytes_(bytes), pos_(offset), binary_(binary) {
    if (!binary_) {
      text_.str(bytes_.substr(offset));
    }
  }

  double read(PlyType type, const std::string& where) {
    if (!binary_) {
      double v;
      if (!(text_ >> v)) {
        throw Error(ErrorCode::kParse, where + ": truncated ascii PLY body");
      }
      return v;
    }
    const size_t n = ply_type_size(type);
    if (pos_ + n > bytes_.size()) {
      throw Error(ErrorCode::kParse, where + ": truncated binary PLY body");
    }
    const char* p = bytes_.data() + pos_;
    pos_ += n;
    switch (type) {
      case PlyType::kInt8: return static_cast<double>(static_cast<int8_t>(*p));
      case PlyType::kUInt8: return static_cast<double>(static_cast<uint8_t>(*p));
      case PlyType::kInt16: return decode<int16_t>(p);
      case PlyType::kUInt16: return decode<uint16_t>(p);
      case PlyType::kInt32: return decode<int32_t>(p);
      case PlyType::kUInt32: return decode<uint32_t>(p);
      case PlyType::kFloat32: return decode<float>(p);
      case PlyType::kFloat64: return decode<double>(p);
    }
    return 0.0;
  }

 private:
  // Host is assumed little-endian, which is what the binary PLY variant we
  // accept stores.
  template <typename T>
  static double decode(const char* p) {
    T v;
    std::memcpy(&v, p, sizeof(T));
    return static_cast<double>(v);
  }

  const std::string& bytes_;
  size_t pos_;
  bool binary_;
  std::istringstream text_;
};

}  // namespace

TriangleMesh parse_ply(const std::string& bytes) {
  const size_t header_end = bytes.find("end_header");
  if (bytes.rfind("ply", 0) != 0 || header_end == std::string::npos) {
    throw Error(ErrorCode::kParse, "not a PLY file (missing magic or end_header)");
  }
  size_t body = bytes.find('\n', header_end);
  if (body == std::string::npos) {
    throw Error(ErrorCode::kParse, "PLY header not terminated by newline");
  }
  ++body;

  std::istringstream header(bytes.substr(0, header_end));
  std::vector<PlyElement> elements;
  bool binary = false;
  std::string line;
  int line_no = 0;
  while (std::getline(header, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string where = "header line " + std::to_string(line_no);
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag)) continue;
    if (tag == "format") {
      std::string fmt;
      ls >> fmt;
      if (fmt == "ascii") {
        binary = false;
      } else if (fmt == "binary_little_endian") {
        binary = true;
      } else {
        throw Error(ErrorCode::kParse, where + ": unsupported PLY format '" + fmt + "'");
      }
    } else if (tag == "element") {
      PlyElement e;
      if (!(ls >> e.name >> e.count)) {
        throw Error(ErrorCode::kParse, where + ": malformed element record");
      }
      elements.push_back(std::move(e));
    } else if (tag == "property") {
      if (elements.empty()) {
        throw Error(ErrorCode::kParse, where + ": property before any element");
      }
      PlyProperty p;
      std::string type;
      ls >> type;
      if (type == "list") {
        std::string count_type, item_type;
        ls >> count_type >> item_type >> p.name;
        p.is_list = true;
        p.count_type = parse_ply_type(count_type, where);
        p.type = parse_ply_type(item_type, where);
      } else {
        p.type = parse_ply_type(type, where);
        ls >> p.name;
      }
      elements.back().properties.push_back(std::move(p));
    }
  }

  PlyReader reader(bytes, body, binary);
  std::vector<Vec3> vertices;
  std::vector<Face> faces;
  std::vector<std::string> context;
  for (const PlyElement& e : elements) {
    for (size_t r = 0; r < e.count; ++r) {
      const std::string where = e.name + " record " + std::to_string(r);
      Vec3 p = Vec3::Zero();
      int seen_xyz = 0;
      for (const PlyProperty& prop : e.properties) {
        if (prop.is_list) {
          const double n = reader.read(prop.count_type, where);
          if (n < 0 || n > 1e6) {
            throw Error(ErrorCode::kParse, where + ": bad list length");
          }
          std::vector<int> idx(static_cast<size_t>(n));
          for (int& i : idx) i = static_cast<int>(reader.read(prop.type, where));
          if (e.name == "face" &&
              (prop.name == "vertex_indices" || prop.name == "vertex_index")) {
            if (idx.size() != 3) {
              throw Error(ErrorCode::kParse,
                          where + ": only triangle faces are supported (got " +
                              std::to_string(idx.size()) + " vertices)");
            }
            faces.push_back({idx[0], idx[1], idx[2]});
            context.push_back(where);
          }
        } else {
          const double v = reader.read(prop.type, where);
          if (e.name == "vertex") {
            if (prop.name == "x") { p.x() = v; ++seen_xyz; }
            if (prop.name == "y") { p.y() = v; ++seen_xyz; }
            if (prop.name == "z") { p.z() = v; ++seen_xyz; }
          }
        }
      }
      if (e.name == "vertex") {
        if (seen_xyz != 3) {
          throw Error(ErrorCode::kParse, where + ": vertex lacks x/y/z properties");
        }
        vertices.push_back(p);
      }
    }
  }
  validate_faces(faces, static_cast<int>(vertices.size()), &context);
  return TriangleMesh(std::move(vertices), std::move(faces));
}

std::string format_ply(const TriangleMesh& mesh, PlyEncoding encoding) {
  const bool binary = encoding == PlyEncoding::kBinaryLittleEndian;
  std::ostringstream out;
  out << "ply\n"
      << "format " << (binary ? "binary_little_endian" : "ascii") << " 1.0\n"
      << "element vertex " << mesh.vertex_count() << '\n'
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.face_count() << '\n'
      << "property list uchar int vertex_indices\n"
      << "end_header\n";
  if (binary) {
    for (const Vec3& v : mesh.vertices()) {
      const double xyz[3] = {v.x(), v.y(), v.z()};
      out.write(reinterpret_cast<const char*>(xyz), sizeof(xyz));
    }
    for (const Face& f : mesh.faces()) {
      const uint8_t n = 3;
      const int32_t idx[3] = {f[0], f[1], f[2]};
      out.write(reinterpret_cast<const char*>(&n), 1);
      out.write(reinterpret_cast<const char*>(idx), sizeof(idx));
    }
  } else {
    out << std::setprecision(17);
    for (const Vec3& v : mesh.vertices()) {
      out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
    }
    for (const Face& f : mesh.faces()) {
      out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
    }
  }
  return out.str();
}

TriangleMesh load_mesh(const std::filesystem::path& path, MeshFormat format) {
  const std::string bytes = read_file(path);
  try {
    return format == MeshFormat::kObj ? parse_obj(bytes) : parse_ply(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

TriangleMesh load_mesh(const std::filesystem::path& path) {
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), ::tolower);
  if (ext == ".obj") return load_mesh(path, MeshFormat::kObj);
  if (ext == ".ply") return load_mesh(path, MeshFormat::kPly);
  throw Error(ErrorCode::kInvalidInput,
              "unknown mesh extension '" + ext + "' for " + path.string());
}

void write_mesh(const std::filesystem::path& path, const TriangleMesh& mesh,
                MeshFormat format, PlyEncoding encoding) {
  write_file(path, format == MeshFormat::kObj ? format_obj(mesh)
                                             : format_ply(mesh, encoding));
}

// ---------------------------------------------------------------------------
// Regions

int count_components(const SurfaceMesh& mesh) {
  DisjointSets sets(mesh.vertex_count());
  for (const Face& f : mesh.faces) {
    sets.unite(f[0], f[1]);
    sets.unite(f[1], f[2]);
  }
  int roots = 0;
  for (int v = 0; v < mesh.vertex_count(); ++v) {
    if (sets.find(v) == v) ++roots;
  }
  return roots;
}

void check_orientation(const SurfaceMesh& mesh) {
  std::map<std::pair<int, int>, int> directed;
  for (int f = 0; f < mesh.face_count(); ++f) {
    const Face& t = mesh.faces[f];
    for (int k = 0; k < 3; ++k) {
      const auto key = std::make_pair(t[k], t[(k + 1) % 3]);
      if (const auto [it, inserted] = directed.emplace(key, f); !inserted) {
        throw Error(ErrorCode::kInvalidInput,
                    "inconsistent orientation or non-manifold edge (" +
                        std::to_string(key.first) + "," +
                        std::to_string(key.second) + ") in faces " +
                        std::to_string(it->second) + " and " +
                        std::to_string(f));
      }
    }
  }
}

int RegionMesh::local_index(int parent_vertex) const {
  if (parent_vertex < 0 ||
      parent_vertex >= static_cast<int>(parent_to_local_.size())) {
    return -1;
  }
  return parent_to_local_[parent_vertex];
}

RegionMesh extract_region(std::shared_ptr<const TriangleMesh> mesh,
                          std::span<const int> vertex_ids) {
  if (!mesh) {
    throw Error(ErrorCode::kInvalidInput, "extract_region: null mesh");
  }
  RegionMesh region;
  region.parent_ = mesh;
  region.vertex_ids_.assign(vertex_ids.begin(), vertex_ids.end());
  std::sort(region.vertex_ids_.begin(), region.vertex_ids_.end());
  region.vertex_ids_.erase(
      std::unique(region.vertex_ids_.begin(), region.vertex_ids_.end()),
      region.vertex_ids_.end());

  region.parent_to_local_.assign(mesh->vertex_count(), -1);
  for (size_t i = 0; i < region.vertex_ids_.size(); ++i) {
    const int id = region.vertex_ids_[i];
    if (id < 0 || id >= mesh->vertex_count()) {
      throw Error(ErrorCode::kInvalidInput,
                  "region vertex id " + std::to_string(id) + " out of range");
    }
    region.parent_to_local_[id] = static_cast<int>(i);
    region.surface_.positions.push_back(mesh->vertices()[id]);
  }
  for (int f = 0; f < mesh->face_count(); ++f) {
    const Face& t = mesh->faces()[f];
    const Face local = {region.parent_to_local_[t[0]],
                        region.parent_to_local_[t[1]],
                        region.parent_to_local_[t[2]]};
    if (local[0] >= 0 && local[1] >= 0 && local[2] >= 0) {
      region.surface_.faces.push_back(local);
      region.parent_faces_.push_back(f);
    }
  }
  if (region.surface_.faces.empty()) {
    throw Error(ErrorCode::kDegenerate, "region selection induces no faces");
  }
  if (const int n = count_components(region.surface_); n != 1) {
    throw Error(ErrorCode::kDegenerate,
                "region is not edge-connected (" + std::to_string(n) +
                    " components)");
  }
  check_orientation(region.surface_);
  return region;
}

RegionMesh extract_full_region(std::shared_ptr<const TriangleMesh> mesh) {
  std::vector<int> all(mesh->vertex_count());
  std::iota(all.begin(), all.end(), 0);
  return extract_region(std::move(mesh), all);
}

std::vector<int> parse_region_selection(const std::string& text) {
  std::vector<int> ids;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = line.substr(0, line.find('#'));
    std::istringstream ls(line);
    long long id;
    if (!(ls >> id)) {
      std::string rest;
      if (std::istringstream(line) >> rest) {
        throw Error(ErrorCode::kParse,
                    "region line " + std::to_string(line_no) + ": expected a vertex index");
      }
      continue;
    }
    std::string trailing;
    if (id < 0 || (ls >> trailing)) {
      throw Error(ErrorCode::kParse,
                  "region line " + std::to_string(line_no) + ": malformed vertex index");
    }
    ids.push_back(static_cast<int>(id));
  }
  return ids;
}

std::vector<int> load_region_selection(const std::filesystem::path& path) {
  try {
    return parse_region_selection(read_file(path));
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

double mean_edge_length(const SurfaceMesh& mesh) {
  double sum = 0.0;
  size_t n = 0;
  for (const Face& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      sum += (mesh.positions[f[k]] - mesh.positions[f[(k + 1) % 3]]).norm();
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

Vec3 face_normal(const SurfaceMesh& mesh, int face) {
  const Face& f = mesh.faces[face];
  const Vec3& a = mesh.positions[f[0]];
  return (mesh.positions[f[1]] - a).cross(mesh.positions[f[2]] - a).normalized();
}

}  // namespace ossireg
