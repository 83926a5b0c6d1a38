// SPDX-License-Identifier: Apache-2.0
#include "tracelab/labeler.hpp"

#include "tracelab/common.hpp"
#include "tracelab/http.hpp"

#include <algorithm>

namespace tracelab
{

size_t LabelVector::positives() const noexcept
{
    return static_cast<size_t>(std::count_if(values.begin(), values.end(), [](auto v) { return v != 0; }));
}

std::set<size_t> RuleBasedLabeler::positive_in_sentence(std::string_view sentence) const
{
    const auto lower = to_lower(sentence);
    if (_vocab.is_negated(lower))
        return {};
    return _vocab.mentioned_pathologies(lower);
}

LabelVector RuleBasedLabeler::extract(std::string_view report) const
{
    LabelVector out(_vocab.size());
    for (const auto& sentence: split_sentences(report))
        for (auto i: positive_in_sentence(sentence))
            out.set(i);
    return out;
}

RemoteLabeler::RemoteLabeler(const Vocabulary& vocab, std::string url, std::chrono::milliseconds timeout, double threshold):
    _vocab(vocab), _url(std::move(url)), _timeout(timeout), _threshold(threshold)
{
}

LabelVector RemoteLabeler::extract(std::string_view report) const
{
    const nlohmann::json request = {{"text", std::string(report)}};
    const auto res = http::post(_url, request.dump(), "application/json", _timeout);
    if (res.status != 200)
        throw TransportError("labeler endpoint returned HTTP " + std::to_string(res.status));
    LabelVector out(_vocab.size());
    try
    {
        const auto body = nlohmann::json::parse(res.body);
        if (body.contains("labels"))
        {
            const auto& labels = body.at("labels");
            if (labels.size() != _vocab.size())
                throw FormatError("labeler returned " + std::to_string(labels.size()) + " labels, expected " + std::to_string(_vocab.size()));
            for (size_t i = 0; i < labels.size(); ++i)
                out.set(i, labels[i].get<double>() >= 0.5);
        }
        else
        {
            for (const auto& [name, p]: body.at("probabilities").items())
                if (auto idx = _vocab.index_of(name))
                    out.set(*idx, p.get<double>() >= _threshold);
        }
    }
    catch (const nlohmann::json::exception& e)
    {
        throw FormatError(std::string("malformed labeler response: ") + e.what());
    }
    return out;
}

} // namespace tracelab
