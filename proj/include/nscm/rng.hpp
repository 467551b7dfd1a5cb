#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "nscm/common.hpp"

namespace nscm {

// Derives an independent stream seed from one master seed and a stream name
// (plus an optional index, e.g. a Monte-Carlo run number). Same inputs always
// give the same stream, so every pipeline stage can be replayed in isolation.
uint64_t substream_seed(uint64_t master, std::string_view name, uint64_t index = 0);

std::mt19937_64 substream(uint64_t master, std::string_view name, uint64_t index = 0);

// Streaming standard-normal generator; keeps the distribution state with the
// engine so interleaved consumers cannot desynchronize each other.
class GaussianStream {
 public:
  explicit GaussianStream(std::mt19937_64 engine) : engine_(std::move(engine)) {}
  GaussianStream(uint64_t master, std::string_view name, uint64_t index = 0)
      : engine_(substream(master, name, index)) {}

  double next() { return normal_(engine_); }

  Vector vector(int n) {
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = normal_(engine_);
    return v;
  }

  double uniform(double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
  }

  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

}  // namespace nscm
