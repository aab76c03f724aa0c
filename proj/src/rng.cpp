#include "otapg/rng.hpp"

#include <array>
#include <cmath>
#include <numbers>

namespace otapg {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

using Block = std::array<std::uint32_t, 4>;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
  const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(p >> 32);
  lo = static_cast<std::uint32_t>(p);
}

Block philox4x32_10(Block ctr, std::uint32_t k0, std::uint32_t k1) {
  for (int round = 0; round < 10; ++round) {
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kPhiloxM0, ctr[0], hi0, lo0);
    mulhilo(kPhiloxM1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ k0, lo1, hi0 ^ ctr[3] ^ k1, lo0};
    k0 += kPhiloxW0;
    k1 += kPhiloxW1;
  }
  return ctr;
}

}  // namespace

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) {
  return mix64(h ^ mix64(v + 0x632BE59BD9B4E019ULL));
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t block = counter_ >> 1;
  const Block ctr{static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
                  static_cast<std::uint32_t>(stream_id_),
                  static_cast<std::uint32_t>(stream_id_ >> 32)};
  const Block out =
      philox4x32_10(ctr, static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32));
  const bool high = (counter_ & 1u) != 0;
  ++counter_;
  return high ? (static_cast<std::uint64_t>(out[3]) << 32) | out[2]
              : (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

double RngStream::uniform() {
  return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53;
}

RngStream RngStream::fork(std::uint64_t tag) const {
  return RngStream(seed_, hash_combine(stream_id_, tag));
}

RngStream RngStream::fork(std::initializer_list<std::uint64_t> tags) const {
  std::uint64_t id = stream_id_;
  for (auto t : tags) id = hash_combine(id, t);
  return RngStream(seed_, id);
}

double draw_standard_normal(RngStream& stream) {
  const double u1 = stream.uniform();
  const double u2 = stream.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Vec draw_gaussian_vector(RngStream& stream, std::size_t dim, double variance) {
  if (!(variance >= 0.0)) throw ParameterError("draw_gaussian_vector: variance must be >= 0");
  Vec out(dim, 0.0);
  if (variance == 0.0) {
    stream.skip(2 * dim);
    return out;
  }
  const double sd = std::sqrt(variance);
  for (auto& x : out) x = sd * draw_standard_normal(stream);
  return out;
}

double draw_gamma(RngStream& stream, double shape, double scale) {
  if (!(shape > 0.0) || !(scale > 0.0)) throw ParameterError("draw_gamma: shape and scale must be > 0");
  if (shape < 1.0) {
    const double g = draw_gamma(stream, shape + 1.0, 1.0);
    return scale * g * std::pow(stream.uniform(), 1.0 / shape);
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = draw_standard_normal(stream);
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = stream.uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return scale * d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return scale * d * v;
  }
}

}  // namespace otapg
