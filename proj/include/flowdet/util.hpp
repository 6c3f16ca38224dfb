#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace flowdet::util {

std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
std::string lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);
bool icontains(std::string_view haystack, std::string_view needle);

/// FNV-1a 64-bit. std::hash is not stable across builds; this is.
std::uint64_t fnv1a64(std::string_view s);
std::string hex64(std::uint64_t v);
/// splitmix64 finalizer, for deriving decorrelated seeds.
std::uint64_t mix64(std::uint64_t x);

/// Shortest decimal that round-trips a double (printf %.17g trimmed).
std::string format_double(double v);

// Deterministic RNG helpers. mt19937_64 output is specified bit-for-bit
// by the standard; the std distributions are not, so we map raw draws
// ourselves and stay reproducible across compilers.
std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound);
double uniform_unit(std::mt19937_64& rng);  // [0, 1)
double uniform_in(std::mt19937_64& rng, double lo, double hi);
double gaussian(std::mt19937_64& rng);  // Box-Muller, mean 0 std 1

template <class T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace flowdet::util
