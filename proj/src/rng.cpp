#include "nscm/rng.hpp"

namespace nscm {
namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

uint64_t substream_seed(uint64_t master, std::string_view name, uint64_t index) {
  // FNV-1a over the stream name, then two splitmix rounds to mix in the
  // master seed and index.
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : name) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return splitmix64(splitmix64(master ^ h) + index);
}

std::mt19937_64 substream(uint64_t master, std::string_view name, uint64_t index) {
  return std::mt19937_64(substream_seed(master, name, index));
}

}  // namespace nscm
