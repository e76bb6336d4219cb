#include "bxent/error.hpp"
#include "bxent/hash.hpp"
#include "bxent/rng.hpp"

#include <cmath>
#include <limits>

#include <fmt/format.h>

namespace bxent {

namespace {

std::string with_location(const std::string& message, const std::string& file, std::size_t line) {
  if (file.empty()) return message;
  if (line == 0) return fmt::format("{}: {}", file, message);
  return fmt::format("{}:{}: {}", file, line, message);
}

}  // namespace

InputError::InputError(const std::string& message, std::string file, std::size_t line)
    : Error(with_location(message, file, line)), file_(std::move(file)), line_(line) {}

StableHasher& StableHasher::add(std::uint64_t value) {
  char bytes[8];
  for (int i = 0; i < 8; ++i) bytes[i] = static_cast<char>((value >> (8 * i)) & 0xff);
  return add(std::string_view(bytes, 8));
}

std::string StableHasher::hex() const { return to_hex64(state_); }

std::string to_hex64(std::uint64_t value) { return fmt::format("{:016x}", value); }

std::uint64_t from_hex64(std::string_view text) {
  if (text.empty() || text.size() > 16) throw Error("bad 64-bit hex value: " + std::string(text));
  std::uint64_t value = 0;
  for (char c : text) {
    value <<= 4;
    if (c >= '0' && c <= '9') value |= static_cast<std::uint64_t>(c - '0');
    else if (c >= 'a' && c <= 'f') value |= static_cast<std::uint64_t>(c - 'a' + 10);
    else if (c >= 'A' && c <= 'F') value |= static_cast<std::uint64_t>(c - 'A' + 10);
    else throw Error("bad 64-bit hex value: " + std::string(text));
  }
  return value;
}

std::size_t Rng::index(std::size_t n) {
  const std::uint64_t range = n;
  unsigned __int128 m = static_cast<unsigned __int128>(engine_()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(engine_()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::size_t>(m >> 64);
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  // Marsaglia polar method.
  double u = 0.0, v = 0.0, s = 0.0;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double factor = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * factor;
  has_spare_normal_ = true;
  return u * factor;
}

double Rng::gamma(double shape) { return std::exp(log_gamma_variate(shape)); }

double Rng::log_gamma_variate(double shape) {
  // Marsaglia-Tsang for shape >= 1; for shape < 1 boost via
  // G(a) = G(a + 1) * U^(1/a), kept in log space.
  double boost = 0.0;
  if (shape < 1.0) {
    double u = uniform();
    while (u == 0.0) u = uniform();
    boost = std::log(u) / shape;
    shape += 1.0;
  }
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x = 0.0, v = 0.0;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return std::log(d * v) + boost;
    if (u > 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return std::log(d * v) + boost;
  }
}

std::uint64_t Rng::derive(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace bxent
