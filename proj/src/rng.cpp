#include "cfsim/rng.hpp"

#include <cmath>
#include <cstdio>

namespace cfsim {

namespace {
LogSink g_sink = nullptr;
void* g_sink_user = nullptr;
}  // namespace

void set_log_sink(LogSink sink, void* user) {
  g_sink = sink;
  g_sink_user = user;
}

void log_warn(const std::string& msg) {
  if (g_sink != nullptr) {
    g_sink(msg.c_str(), g_sink_user);
  } else {
    std::fprintf(stderr, "[cfsim warn] %s\n", msg.c_str());
  }
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Rng Rng::substream(std::uint64_t seed, Stream purpose, std::uint64_t i0,
                   std::uint64_t i1, std::uint64_t i2) {
  std::uint64_t s = mix64(seed);
  s = mix64(s ^ static_cast<std::uint64_t>(purpose));
  s = mix64(s ^ i0);
  s = mix64(s ^ i1);
  s = mix64(s ^ i2);
  return Rng(s);
}

double Rng::uniform() {
  // 53-bit mantissa, shifted into (0, 1) so log() below is always finite.
  return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
}

double Rng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

cplx Rng::cnormal(double var) {
  const double s = std::sqrt(var / 2.0);
  return {s * normal(), s * normal()};
}

std::uint64_t Rng::below(std::uint64_t n) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x = eng_();
  while (x >= limit) x = eng_();
  return x % n;
}

}  // namespace cfsim
