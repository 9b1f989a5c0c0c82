#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "ossireg/geodesic.hpp"
#include "ossireg/mesh.hpp"

namespace ossireg {

struct ParameterizeOptions {
  FastMarchOptions fast_march;
  TraceOptions trace;
};

/// Latitude/longitude coordinates over a region.
///
/// mu = d_alpha / (d_alpha + d_beta) from the geodesic distances to the two
/// poles; nu = d_left / (d_left + d_right) from the distances to the two sides
/// of the prime meridian, measured on the region cut open along it.
struct SurfaceParameterization {
  std::shared_ptr<const RegionMesh> region;
  int alpha = -1;  ///< local index in region
  int beta = -1;
  std::vector<double> mu;  ///< per region vertex
  std::vector<double> nu;
  GeodesicPath meridian;
  std::vector<double> meridian_mu;  ///< mu at each meridian point
  ParameterizeOptions options;

  /// Region cut along the meridian, carrying (mu, nu) on every vertex. This is
  /// what gets rasterized: faces never straddle the nu = 0 / nu = 1 seam.
  CutSurface cut;
  std::vector<double> cut_mu;
  std::vector<double> cut_nu;

  int alpha_parent() const { return region->parent_index(alpha); }
  int beta_parent() const { return region->parent_index(beta); }
};

/// Latitude from pole distances; throws when both are zero.
double latitude(double d_alpha, double d_beta);
/// Longitude from meridian-side distances; 0 when both are zero (on the cut).
double longitude(double d_left, double d_right);

/// alpha/beta are parent vertex indices that must lie in the region.
SurfaceParameterization parameterize(std::shared_ptr<const RegionMesh> region,
                                     int alpha_parent, int beta_parent,
                                     const ParameterizeOptions& options = {});

/// Copies (mu, nu) by vertex index onto a point-corresponded mesh. The meridian
/// keeps its faces and barycentric coordinates and is re-evaluated on the new
/// positions.
SurfaceParameterization transfer_parameterization(
    const SurfaceParameterization& source,
    std::shared_ptr<const TriangleMesh> target_mesh);

/// Versioned text table. See README for the layout.
std::string format_parameterization(const SurfaceParameterization& param);
SurfaceParameterization parse_parameterization(
    const std::string& text, std::shared_ptr<const TriangleMesh> mesh);
void write_parameterization(const std::filesystem::path& path,
                            const SurfaceParameterization& param);
SurfaceParameterization load_parameterization(
    const std::filesystem::path& path, std::shared_ptr<const TriangleMesh> mesh);

}  // namespace ossireg
