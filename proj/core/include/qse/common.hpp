#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qse {

// Base class for all library errors. Subclasses name the contract that was
// violated so callers can map them to exit codes.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BadDimension : Error {
  using Error::Error;
};
struct NonStochasticRow : Error {
  using Error::Error;
};
struct RewardOutOfRange : Error {
  using Error::Error;
};
struct InfeasibleConstraint : Error {
  using Error::Error;
};
struct ResponseMismatch : Error {
  using Error::Error;
};
struct DimensionMismatch : Error {
  using Error::Error;
};
struct SupportMismatch : Error {
  using Error::Error;
};
struct EmptyData : Error {
  using Error::Error;
};
struct EmptyGrid : Error {
  using Error::Error;
};
struct EmptyThetaSample : Error {
  using Error::Error;
};
struct NotMyopic : Error {
  using Error::Error;
};
struct TooLarge : Error {
  using Error::Error;
};
struct EmptyConfidenceSet : Error {
  using Error::Error;
};
struct EmptyModelSet : Error {
  using Error::Error;
};
struct MissingAggregate : Error {
  using Error::Error;
};
struct ConfigError : Error {
  using Error::Error;
};
struct NumericError : Error {
  using Error::Error;
};

// FNV-1a, used for content hashes in run manifests. Stable across platforms,
// unlike std::hash.
inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t seed = 0xcbf29ce484222325ull) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

}  // namespace qse
