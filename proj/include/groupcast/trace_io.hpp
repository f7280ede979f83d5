#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "model.hpp"

namespace groupcast {

enum class TraceUnit { Mbps, BytesPerSecond };

class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line) : Error(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Portable SplitMix64 generator. Same seed, same stream on every platform.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 bits of precision.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t below(std::uint64_t bound) {
    // Rejection keeps the draw unbiased.
    const std::uint64_t limit = max() - max() % bound;
    std::uint64_t x;
    do {
      x = (*this)();
    } while (x >= limit);
    return x % bound;
  }

 private:
  std::uint64_t state_;
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace detail

/// Parses one sample per line. Blank lines are ignored; anything else that
/// is not a number fails with its line number.
inline BandwidthTrace parse_trace(std::istream& in, TraceUnit unit) {
  BandwidthTrace trace;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    auto text = detail::trim(line);
    if (text.empty()) continue;
    double value = 0.0;
    auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc{} || end != text.data() + text.size() || !std::isfinite(value)) {
      throw ParseError("line " + std::to_string(number) + ": not a number: '" + std::string(text) + "'", number);
    }
    if (value < 0.0) {
      throw ParseError("line " + std::to_string(number) + ": negative bandwidth sample", number);
    }
    trace.samples.push_back(unit == TraceUnit::Mbps ? value : value * 8.0 / 1e6);
  }
  if (trace.samples.empty()) throw ParseError("no samples", number);
  return trace;
}

inline BandwidthTrace parse_trace_file(const std::string& path, TraceUnit unit) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open trace file " + path);
  try {
    return parse_trace(in, unit);
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what(), e.line());
  }
}

/// Fixed decimal with six fractional digits, one sample per line, Mbps.
inline std::string format_trace(const BandwidthTrace& trace) {
  std::string out;
  char buf[64];
  for (double v : trace.samples) {
    std::snprintf(buf, sizeof buf, "%.6f\n", v);
    out += buf;
  }
  return out;
}

inline void write_trace_file(const std::string& path, const BandwidthTrace& trace) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write trace file " + path);
  out << format_trace(trace);
}

struct TraceSet {
  std::vector<BandwidthTrace> profiles;
  std::string source;
  std::vector<int> offsets;  // first second of each profile within the source
  int profile_length = 0;
};

/// Cuts a long trace into consecutive windows; the trailing remainder is dropped.
inline TraceSet partition_profiles(const BandwidthTrace& trace, int profile_seconds, std::string source = {}) {
  if (profile_seconds < 1) throw Error("profile length must be at least one second");
  TraceSet set;
  set.source = std::move(source);
  set.profile_length = profile_seconds;
  for (int start = 0; start + profile_seconds <= trace.length(); start += profile_seconds) {
    BandwidthTrace p;
    p.samples.assign(trace.samples.begin() + start, trace.samples.begin() + start + profile_seconds);
    set.profiles.push_back(std::move(p));
    set.offsets.push_back(start + 1);
  }
  return set;
}

/// Shuffles profile indices with SplitMix64 and deals them out in equal
/// shares; leftovers beyond an equal share are not assigned.
inline std::vector<std::vector<std::size_t>> assign_profile_indices(std::size_t profile_count, std::size_t user_count,
                                                                     std::uint64_t seed) {
  if (user_count == 0) throw Error("assign_profiles needs at least one user");
  if (profile_count < user_count) {
    throw Error("need at least " + std::to_string(user_count) + " profiles, have " + std::to_string(profile_count));
  }
  std::vector<std::size_t> order(profile_count);
  std::iota(order.begin(), order.end(), std::size_t{0});
  SplitMix64 rng(seed);
  for (std::size_t i = profile_count; i > 1; --i) {
    std::swap(order[i - 1], order[rng.below(i)]);
  }
  const std::size_t share = profile_count / user_count;
  std::vector<std::vector<std::size_t>> out(user_count);
  for (std::size_t u = 0; u < user_count; ++u) {
    out[u].assign(order.begin() + static_cast<std::ptrdiff_t>(u * share),
                  order.begin() + static_cast<std::ptrdiff_t>((u + 1) * share));
  }
  return out;
}

inline std::vector<std::vector<BandwidthTrace>> assign_profiles(const TraceSet& set, std::size_t user_count,
                                                                std::uint64_t seed) {
  auto indices = assign_profile_indices(set.profiles.size(), user_count, seed);
  std::vector<std::vector<BandwidthTrace>> out(user_count);
  for (std::size_t u = 0; u < user_count; ++u) {
    for (auto idx : indices[u]) out[u].push_back(set.profiles[idx]);
  }
  return out;
}

/// Seeded synthetic throughput: a mean-reverting log-normal walk around
/// `mean_mbps`, roughly the shape of cellular one-second measurements.
inline BandwidthTrace synthetic_trace(std::uint64_t seed, int seconds, double mean_mbps, double spread = 0.6,
                                      double persistence = 0.8) {
  SplitMix64 rng(seed);
  auto normal = [&rng] {
    double u1 = rng.uniform();
    double u2 = rng.uniform();
    if (u1 < 1e-300) u1 = 1e-300;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };
  BandwidthTrace trace;
  trace.samples.reserve(static_cast<std::size_t>(std::max(seconds, 0)));
  const double sigma = spread;
  const double mu = std::log(mean_mbps) - 0.5 * sigma * sigma;
  double state = 0.0;
  const double innovation = std::sqrt(1.0 - persistence * persistence);
  for (int j = 0; j < seconds; ++j) {
    state = persistence * state + innovation * normal();
    const double v = std::exp(mu + sigma * state);
    // Round to the six-decimal text encoding so written traces reload exactly.
    trace.samples.push_back(std::round(v * 1e6) / 1e6);
  }
  return trace;
}

}  // namespace groupcast
