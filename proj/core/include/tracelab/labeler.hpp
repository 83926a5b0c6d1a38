// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "tracelab/vocabulary.hpp"

#include <chrono>
#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace tracelab
{

/// Binary pathology labels indexed by vocabulary position.
struct LabelVector
{
    std::vector<std::uint8_t> values;

    LabelVector() = default;
    explicit LabelVector(size_t n): values(n, 0) {}
    explicit LabelVector(std::vector<std::uint8_t> v): values(std::move(v)) {}

    [[nodiscard]] size_t size() const noexcept { return values.size(); }
    [[nodiscard]] bool operator[](size_t i) const { return values.at(i) != 0; }
    void set(size_t i, bool v = true) { values.at(i) = v ? 1 : 0; }
    [[nodiscard]] size_t positives() const noexcept;

    friend bool operator==(const LabelVector&, const LabelVector&) = default;
};

/// Extracts pathology labels from report text.
class Labeler
{
  public:
    virtual ~Labeler() = default;
    [[nodiscard]] virtual LabelVector extract(std::string_view report) const = 0;
    [[nodiscard]] virtual size_t vocabulary_size() const = 0;
};

/// Keyword rules with sentence-scoped negation. Exact on the synthetic
/// report grammar; not intended as a clinical-grade labeler.
class RuleBasedLabeler final: public Labeler
{
  public:
    explicit RuleBasedLabeler(const Vocabulary& vocab): _vocab(vocab) {}

    [[nodiscard]] LabelVector extract(std::string_view report) const override;
    [[nodiscard]] size_t vocabulary_size() const override { return _vocab.size(); }

    /// Labels asserted by a single sentence (all zero when negated).
    [[nodiscard]] std::set<size_t> positive_in_sentence(std::string_view sentence) const;

  private:
    const Vocabulary& _vocab;
};

/// HTTP classification endpoint. POST {"text": report} to the URL; the reply is
/// either {"labels": [0/1, ...]} or {"probabilities": {name: p}} thresholded at
/// `threshold`. Unavailability raises TransportError; there is no fallback.
class RemoteLabeler final: public Labeler
{
  public:
    RemoteLabeler(const Vocabulary& vocab, std::string url, std::chrono::milliseconds timeout = std::chrono::seconds(30),
                  double threshold = 0.5);

    [[nodiscard]] LabelVector extract(std::string_view report) const override;
    [[nodiscard]] size_t vocabulary_size() const override { return _vocab.size(); }

  private:
    const Vocabulary& _vocab;
    std::string _url;
    std::chrono::milliseconds _timeout;
    double _threshold;
};

} // namespace tracelab
