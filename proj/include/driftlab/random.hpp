#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace driftlab {

// splitmix64 finalizer; used to derive independent stream seeds.
std::uint64_t mix64(std::uint64_t x);

// A reproducible random stream identified by (master_seed, stream_id).
//
// The engine seed is derived by hashing both identifiers, so distinct
// stream ids give statistically independent streams and any stream can be
// reconstructed without replaying the others. Draw helpers avoid the
// standard distributions, whose output is implementation-defined, so that
// results are bit-identical across standard libraries.
class RngStream {
 public:
  RngStream(std::uint64_t master_seed, std::uint64_t stream_id);

  std::uint64_t master_seed() const { return master_seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  // A child stream keyed on this stream's identity and `child_id`.
  RngStream derive(std::uint64_t child_id) const;

  std::uint64_t next_u64() { return engine_(); }
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform();
  // Uniform integer on [0, n).
  std::uint64_t below(std::uint64_t n);
  bool bernoulli(double p) { return uniform() < p; }
  // Index drawn from an unnormalized nonnegative weight vector.
  std::size_t categorical(std::span<const double> weights);

 private:
  std::uint64_t master_seed_;
  std::uint64_t stream_id_;
  std::mt19937_64 engine_;
};

}  // namespace driftlab
