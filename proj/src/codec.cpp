#include "sqforge/codec.hpp"

#include "sqforge/binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace sqforge {

namespace {

double dct_1d(int k, int n, int len) {
  const double alpha = k == 0 ? std::sqrt(1.0 / len) : std::sqrt(2.0 / len);
  return alpha * std::cos(std::numbers::pi * (2 * n + 1) * k / (2.0 * len));
}

}  // namespace

CodecSpec::CodecSpec(int resolution, int patch, int channels)
    : res_(resolution), patch_(patch), coarse_(patch > 0 ? resolution / patch : 0), channels_(channels) {
  require(resolution > 0 && patch > 0 && resolution % patch == 0,
          "codec: resolution must be a positive multiple of the patch edge");
  require(channels >= 1 && channels <= patch * patch * patch,
          "codec: channel count must be in [1, P^3]");

  std::vector<std::array<int, 3>> all;  // (kx, ky, kz)
  for (int kz = 0; kz < patch; ++kz)
    for (int ky = 0; ky < patch; ++ky)
      for (int kx = 0; kx < patch; ++kx) all.push_back({kx, ky, kz});
  std::stable_sort(all.begin(), all.end(), [](const auto& a, const auto& b) {
    const int ma = std::max({a[0], a[1], a[2]}), mb = std::max({b[0], b[1], b[2]});
    if (ma != mb) return ma < mb;
    const int sa = a[0] + a[1] + a[2], sb = b[0] + b[1] + b[2];
    if (sa != sb) return sa < sb;
    if (a[2] != b[2]) return a[2] < b[2];
    if (a[1] != b[1]) return a[1] < b[1];
    return a[0] < b[0];
  });
  freqs_.assign(all.begin(), all.begin() + channels);

  basis_.resize(patch_cells(), channels);
  for (int c = 0; c < channels; ++c) {
    const auto& f = freqs_[static_cast<std::size_t>(c)];
    for (int z = 0; z < patch; ++z)
      for (int y = 0; y < patch; ++y)
        for (int x = 0; x < patch; ++x)
          basis_((z * patch + y) * patch + x, c) =
              dct_1d(f[0], x, patch) * dct_1d(f[1], y, patch) * dct_1d(f[2], z, patch);
  }
}

LatentGrid::LatentGrid(int g, int c, Vector v) : coarse(g), channels(c), values(std::move(v)) {
  require(values.size() == static_cast<Eigen::Index>(g) * g * g * c, "latent size mismatch");
}

LatentGrid encode_field(const Vector& field, const CodecSpec& spec) {
  const int r = spec.resolution(), p = spec.patch(), g = spec.coarse(), ch = spec.channels();
  require(field.size() == static_cast<Eigen::Index>(r) * r * r, "encode: field resolution mismatch");
  LatentGrid z(g, ch);
  Vector patch(spec.patch_cells());
  for (int pz = 0; pz < g; ++pz)
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px) {
        for (int z = 0; z < p; ++z)
          for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x) {
              const std::size_t cell =
                  (static_cast<std::size_t>(pz * p + z) * r + (py * p + y)) * r + (px * p + x);
              patch[(z * p + y) * p + x] = field[static_cast<Eigen::Index>(cell)];
            }
        const Vector coeff = spec.basis().transpose() * patch;
        for (int c = 0; c < ch; ++c) z.at(px, py, pz, c) = coeff[c];
      }
  return z;
}

Vector decode_field(const LatentGrid& z, const CodecSpec& spec) {
  const int r = spec.resolution(), p = spec.patch(), g = spec.coarse(), ch = spec.channels();
  require(z.coarse == g && z.channels == ch, "decode: latent dimensions do not match codec");
  require(z.values.allFinite(), "decode: latent contains non-finite values");
  Vector field(static_cast<Eigen::Index>(r) * r * r);
  Vector coeff(ch);
  for (int pz = 0; pz < g; ++pz)
    for (int py = 0; py < g; ++py)
      for (int px = 0; px < g; ++px) {
        for (int c = 0; c < ch; ++c) coeff[c] = z.at(px, py, pz, c);
        const Vector patch = spec.basis() * coeff;
        for (int zz = 0; zz < p; ++zz)
          for (int y = 0; y < p; ++y)
            for (int x = 0; x < p; ++x) {
              const std::size_t cell =
                  (static_cast<std::size_t>(pz * p + zz) * r + (py * p + y)) * r + (px * p + x);
              field[static_cast<Eigen::Index>(cell)] = patch[(zz * p + y) * p + x];
            }
      }
  return field;
}

LatentGrid encode(const OccupancyGrid& x, const CodecSpec& spec) {
  require(x.resolution() == spec.resolution(), "encode: grid resolution does not match codec");
  Vector field(static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) field[static_cast<Eigen::Index>(i)] = x[i] ? 1.0 : 0.0;
  return encode_field(field, spec);
}

OccupancyGrid decode(const LatentGrid& z, const CodecSpec& spec) {
  const Vector field = decode_field(z, spec);
  OccupancyGrid x(spec.resolution());
  for (Eigen::Index i = 0; i < field.size(); ++i)
    x.set(static_cast<std::size_t>(i), field[i] >= CodecSpec::kThreshold);
  return x;
}

OccupancyGrid roundtrip(const OccupancyGrid& x, const CodecSpec& spec) {
  return decode(encode(x, spec), spec);
}

std::string latent_to_bytes(const LatentGrid& z, const CodecSpec& spec) {
  require(z.coarse == spec.coarse() && z.channels == spec.channels(), "latent/codec mismatch");
  io::Writer w;
  w.bytes("SCLAT1");
  w.u32(static_cast<std::uint32_t>(spec.resolution()));
  w.u32(static_cast<std::uint32_t>(spec.patch()));
  w.u32(static_cast<std::uint32_t>(spec.coarse()));
  w.u32(static_cast<std::uint32_t>(spec.channels()));
  for (Eigen::Index i = 0; i < z.values.size(); ++i) w.f32(static_cast<float>(z.values[i]));
  return w.take();
}

LatentGrid latent_from_bytes(const std::string& bytes, CodecSpec* spec_out) {
  io::Reader r(bytes);
  require(r.bytes(6) == "SCLAT1", "not a latent dump (bad magic)");
  const int res = static_cast<int>(r.u32());
  const int p = static_cast<int>(r.u32());
  const int g = static_cast<int>(r.u32());
  const int c = static_cast<int>(r.u32());
  CodecSpec spec(res, p, c);
  require(spec.coarse() == g, "latent dump header is inconsistent (G*P != R)");
  LatentGrid z(g, c);
  for (Eigen::Index i = 0; i < z.values.size(); ++i) z.values[i] = r.f32();
  require(r.done(), "trailing bytes after latent dump");
  if (spec_out) *spec_out = spec;
  return z;
}

std::string grid_to_bytes(const OccupancyGrid& x) {
  io::Writer w;
  w.bytes("SCGRD1");
  w.u32(static_cast<std::uint32_t>(x.resolution()));
  std::uint8_t acc = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i]) acc |= static_cast<std::uint8_t>(1u << (i % 8));
    if (i % 8 == 7) {
      w.u8(acc);
      acc = 0;
    }
  }
  if (x.size() % 8 != 0) w.u8(acc);
  return w.take();
}

OccupancyGrid grid_from_bytes(const std::string& bytes) {
  io::Reader r(bytes);
  require(r.bytes(6) == "SCGRD1", "not a grid dump (bad magic)");
  const int res = static_cast<int>(r.u32());
  require(res > 0 && res <= 1024, "grid dump resolution out of range");
  OccupancyGrid x(res);
  const auto packed = r.bytes((x.size() + 7) / 8);
  for (std::size_t i = 0; i < x.size(); ++i)
    x.set(i, (static_cast<std::uint8_t>(packed[i / 8]) >> (i % 8)) & 1u);
  require(r.done(), "trailing bytes after grid dump");
  return x;
}

}  // namespace sqforge
