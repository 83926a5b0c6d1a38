// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab
{

/// Invalid or inconsistent configuration (empty tool list, bad weights, ...).
class ConfigError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A remote endpoint (policy, judge, labeler, MCP server) could not be reached
/// or answered with a transport-level failure.
class TransportError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A judge answered, but its output could not be parsed even after a re-prompt.
class JudgeParseError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// A ratio estimator whose denominator is empty.
class UndefinedMetric: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

/// Malformed file or document (NIfTI, npy, trace JSON, ...).
class FormatError: public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Hashing and seeded randomness. Everything random in the library is derived
// from explicit seeds through these helpers; there is no global RNG.

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept
{
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) noexcept
{
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c: s)
    {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

constexpr std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) noexcept
{
    return splitmix64(a ^ splitmix64(b + 0x632BE59BD9B4E019ULL));
}

inline std::uint64_t mix_seed(std::uint64_t a, std::string_view tag) noexcept
{
    return mix_seed(a, fnv1a64(tag));
}

using Rng = std::mt19937_64;

/// Uniform integer in [0, n) by rejection; portable across standard libraries
/// (unlike std::uniform_int_distribution).
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n)
{
    if (n == 0)
        throw std::invalid_argument("uniform_index: n must be positive");
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t x = 0;
    do
        x = rng();
    while (x >= limit);
    return x % n;
}

/// Uniform real in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline bool bernoulli(Rng& rng, double p)
{
    return uniform01(rng) < p;
}

/// Standard normal via Box-Muller (portable, unlike std::normal_distribution).
double standard_normal(Rng& rng);

// ---------------------------------------------------------------------------
// Small string helpers shared by the text-processing modules.

std::string to_lower(std::string_view s);
std::string trim(std::string_view s);
bool starts_with_ci(std::string_view s, std::string_view prefix);
std::string replace_all(std::string s, std::string_view from, std::string_view to);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// Splits text into sentences on . ! ? ; and newlines. A '.' between two
/// digits (decimal point) does not split. Returned sentences are trimmed and
/// keep their terminating punctuation.
std::vector<std::string> split_sentences(std::string_view text);

/// True if `phrase` occurs in `text` starting at a word boundary. Both are
/// expected to be lower case. The end of the match is not required to be a
/// boundary, so "nodule" matches "nodules".
bool contains_word_prefix(std::string_view text, std::string_view phrase);

/// Like contains_word_prefix but the match must also end at a word boundary.
bool contains_word(std::string_view text, std::string_view phrase);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view bytes);

/// Reads a whole file; throws FormatError when unreadable.
std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

} // namespace tracelab
