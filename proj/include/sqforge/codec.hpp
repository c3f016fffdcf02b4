#pragma once

#include "sqforge/geometry.hpp"

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace sqforge {

/// Fixed orthonormal per-patch transform between occupancy grids and latent grids.
///
/// Each P³ patch is projected onto the C lowest-frequency separable DCT-II basis
/// functions. Frequencies are ordered by (max component, component sum, kz, ky, kx),
/// so the DC term comes first and C = 8 selects the {0,1}³ block.
class CodecSpec {
 public:
  static constexpr double kThreshold = 0.5;

  CodecSpec() : CodecSpec(32, 4, 8) {}
  CodecSpec(int resolution, int patch, int channels);

  int resolution() const { return res_; }
  int patch() const { return patch_; }
  int coarse() const { return coarse_; }
  int channels() const { return channels_; }
  int patch_cells() const { return patch_ * patch_ * patch_; }
  /// G³·C, the flattened latent width.
  int latent_size() const { return coarse_ * coarse_ * coarse_ * channels_; }

  /// Basis as a P³ × C matrix; column c is basis vector c over patch cells (z, y, x) row-major.
  const Matrix& basis() const { return basis_; }
  const std::vector<std::array<int, 3>>& frequencies() const { return freqs_; }

  bool operator==(const CodecSpec& o) const {
    return res_ == o.res_ && patch_ == o.patch_ && channels_ == o.channels_;
  }

 private:
  int res_, patch_, coarse_, channels_;
  Matrix basis_;
  std::vector<std::array<int, 3>> freqs_;
};

/// G³ × C latent values, flattened as ((pz*G + py)*G + px)*C + c.
struct LatentGrid {
  int coarse = 0;
  int channels = 0;
  Vector values;

  LatentGrid() = default;
  LatentGrid(int g, int c) : coarse(g), channels(c), values(Vector::Zero(static_cast<Eigen::Index>(g) * g * g * c)) {}
  LatentGrid(int g, int c, Vector v);

  double& at(int px, int py, int pz, int ch) {
    return values[((static_cast<Eigen::Index>(pz) * coarse + py) * coarse + px) * channels + ch];
  }
  double at(int px, int py, int pz, int ch) const {
    return values[((static_cast<Eigen::Index>(pz) * coarse + py) * coarse + px) * channels + ch];
  }
};

/// Real-valued encode over a dense R³ field (same layout as OccupancyGrid).
LatentGrid encode_field(const Vector& field, const CodecSpec& spec);
/// Real-valued reconstruction before thresholding.
Vector decode_field(const LatentGrid& z, const CodecSpec& spec);

LatentGrid encode(const OccupancyGrid& x, const CodecSpec& spec);
/// Reconstruct and threshold at 0.5; ties decode to occupied.
OccupancyGrid decode(const LatentGrid& z, const CodecSpec& spec);

OccupancyGrid roundtrip(const OccupancyGrid& x, const CodecSpec& spec);

/// Latent dump: "SCLAT1", u32 R, P, G, C, then G³·C little-endian f32.
std::string latent_to_bytes(const LatentGrid& z, const CodecSpec& spec);
LatentGrid latent_from_bytes(const std::string& bytes, CodecSpec* spec_out = nullptr);

/// Grid dump: "SCGRD1", u32 R, then R³ bits packed LSB-first in cell order.
std::string grid_to_bytes(const OccupancyGrid& x);
OccupancyGrid grid_from_bytes(const std::string& bytes);

}  // namespace sqforge
