#pragma once

#include <cstdint>
#include <initializer_list>

#include "otapg/vec.hpp"

namespace otapg {

// Counter-based random stream (Philox4x32-10). The 64-bit seed is the
// cipher key, the (stream_id, block index) pair is the counter, so any
// substream is addressable from (seed, stream_id) alone and two owners of
// the same pair see the same sequence regardless of scheduling.
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id) : seed_(seed), stream_id_(stream_id) {}

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  // Number of 64-bit words drawn so far.
  std::uint64_t counter() const { return counter_; }

  std::uint64_t next_u64();
  // Uniform on the open interval (0, 1), 53-bit resolution.
  double uniform();
  void skip(std::uint64_t words) { counter_ += words; }

  // Child stream whose id mixes this stream's id with `tag`. Does not touch
  // this stream's counter.
  RngStream fork(std::uint64_t tag) const;
  RngStream fork(std::initializer_list<std::uint64_t> tags) const;

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t counter_ = 0;
};

// 64-bit finaliser used to combine identifiers into stream ids and seeds.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v);

// Fixed tags naming the independent randomness consumers.
namespace stream_tag {
inline constexpr std::uint64_t kAgent = 0x6167656e74ULL;      // trajectory sampling
inline constexpr std::uint64_t kChannel = 0x6368616e6eULL;    // fading gains
inline constexpr std::uint64_t kNoise = 0x6e6f697365ULL;      // receiver noise
inline constexpr std::uint64_t kEval = 0x6576616cULL;         // evaluation rollouts
inline constexpr std::uint64_t kInit = 0x696e6974ULL;         // parameter init
inline constexpr std::uint64_t kReplicate = 0x7265706cULL;    // replicate seeds
}  // namespace stream_tag

// Standard normal via Box-Muller; consumes exactly two words.
double draw_standard_normal(RngStream& stream);

// i.i.d. N(0, variance) entries. Always advances the stream by 2*dim words,
// also for variance == 0 (which returns exact zeros).
Vec draw_gaussian_vector(RngStream& stream, std::size_t dim, double variance);

// Gamma(shape, scale) by Marsaglia-Tsang, with the U^(1/shape) boost for shape < 1.
double draw_gamma(RngStream& stream, double shape, double scale);

}  // namespace otapg
