#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "relay/core/model.hpp"
#include "relay/core/seed.hpp"

namespace relay {

struct ServiceReplica {
  std::string replica_id;
  std::string endpoint;
  NodeLabel node_label = NodeLabel::opportunistic;
  std::uint32_t capacity = 1;  // max concurrent requests in service
  bool alive = true;

  bool operator==(const ServiceReplica&) const = default;
};

struct TokenDistribution {
  enum class Kind { constant, lognormal, uniform };
  Kind kind = Kind::lognormal;
  double constant = 100;  // Kind::constant
  double mu = 4.6;        // Kind::lognormal, over token counts
  double sigma = 1.0;
  double low = 1;  // Kind::uniform, inclusive
  double high = 100;
  std::uint64_t min_tokens = 1;
  std::uint64_t max_tokens = 8192;

  bool operator==(const TokenDistribution&) const = default;
};

/// Simulated generation cost: duration = base + tokens * seconds_per_token.
struct LatencyModel {
  double base_seconds = 0.05;
  double seconds_per_token = 0.01;
  TokenDistribution tokens;
  std::uint32_t bytes_per_token = 4;

  bool operator==(const LatencyModel&) const = default;

  /// Output tokens for a request seed, clamped to [min_tokens, max_tokens]
  /// and to the request's own ceiling when non-zero.
  std::uint64_t sample_tokens(std::uint64_t seed, std::uint64_t request_max = 0) const {
    double raw = 0;
    switch (tokens.kind) {
      case TokenDistribution::Kind::constant:
        raw = tokens.constant;
        break;
      case TokenDistribution::Kind::lognormal: {
        std::mt19937_64 gen(seed);
        std::normal_distribution<double> normal(tokens.mu, tokens.sigma);
        raw = std::exp(normal(gen));
        break;
      }
      case TokenDistribution::Kind::uniform:
        raw = tokens.low + std::floor(unit_interval(splitmix64(seed)) * (tokens.high - tokens.low + 1));
        break;
    }
    double upper = static_cast<double>(tokens.max_tokens);
    if (request_max > 0) upper = std::min(upper, static_cast<double>(request_max));
    double lower = std::min(static_cast<double>(std::max<std::uint64_t>(tokens.min_tokens, 1)), upper);
    return static_cast<std::uint64_t>(std::clamp(std::round(raw), lower, upper));
  }

  double duration(std::uint64_t tokens_out) const {
    return base_seconds + static_cast<double>(tokens_out) * seconds_per_token;
  }
};

struct GenerationRequest {
  Bytes prompt;
  std::uint64_t max_tokens = 0;  // 0: backend default
  double temperature = 0.7;
  std::uint64_t seed = 0;
};

struct GenerationResponse {
  Bytes content;
  std::uint64_t output_token_count = 0;
  std::string replica_id;
  double latency_seconds = 0;
  bool simulated = false;
};

using GenerateCallback = std::function<void(Result<GenerationResponse>)>;

/// Deterministic filler text of exactly `length` bytes (lowercase words).
inline Bytes pseudo_content(std::uint64_t seed, std::size_t length) {
  static constexpr char kAlphabet[] = "abcdefghijklmnopqrstuvwxyz      ";  // 32 symbols
  Bytes out(length, ' ');
  std::uint64_t state = seed;
  for (std::size_t i = 0; i < length; i += 12) {
    std::uint64_t draw = splitmix64(state++);
    for (std::size_t j = 0; j < 12 && i + j < length; ++j) {
      out[i + j] = kAlphabet[draw & 31];
      draw >>= 5;
    }
  }
  return out;
}

}  // namespace relay
