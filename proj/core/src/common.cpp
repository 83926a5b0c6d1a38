// SPDX-License-Identifier: Apache-2.0
#include "tracelab/common.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

namespace tracelab
{

double standard_normal(Rng& rng)
{
    double u1 = uniform01(rng);
    while (u1 <= 0.0)
        u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

std::string trim(std::string_view s)
{
    auto const isSpace = [](unsigned char c) { return std::isspace(c) != 0; };
    while (!s.empty() && isSpace(s.front()))
        s.remove_prefix(1);
    while (!s.empty() && isSpace(s.back()))
        s.remove_suffix(1);
    return std::string(s);
}

bool starts_with_ci(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size())
        return false;
    for (size_t i = 0; i < prefix.size(); ++i)
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i])))
            return false;
    return true;
}

std::string replace_all(std::string s, std::string_view from, std::string_view to)
{
    if (from.empty())
        return s;
    size_t pos = 0;
    while ((pos = s.find(from, pos)) != std::string::npos)
    {
        s.replace(pos, from.size(), to);
        pos += to.size();
    }
    return s;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (size_t i = 0; i < parts.size(); ++i)
    {
        if (i > 0)
            out += sep;
        out += parts[i];
    }
    return out;
}

std::vector<std::string> split_sentences(std::string_view text)
{
    std::vector<std::string> out;
    std::string current;
    auto const flush = [&] {
        auto t = trim(current);
        if (!t.empty())
            out.push_back(std::move(t));
        current.clear();
    };
    for (size_t i = 0; i < text.size(); ++i)
    {
        const char c = text[i];
        if (c == '\n' || c == '\r')
        {
            flush();
            continue;
        }
        current.push_back(c);
        if (c == '.')
        {
            const bool decimal = i > 0 && i + 1 < text.size() && std::isdigit(static_cast<unsigned char>(text[i - 1]))
                                 && std::isdigit(static_cast<unsigned char>(text[i + 1]));
            if (!decimal)
                flush();
        }
        else if (c == '!' || c == '?' || c == ';')
            flush();
    }
    flush();
    return out;
}

namespace
{
    bool is_word_char(char c)
    {
        return std::isalnum(static_cast<unsigned char>(c)) != 0;
    }
} // namespace

bool contains_word_prefix(std::string_view text, std::string_view phrase)
{
    if (phrase.empty())
        return false;
    for (size_t pos = text.find(phrase); pos != std::string_view::npos; pos = text.find(phrase, pos + 1))
        if (pos == 0 || !is_word_char(text[pos - 1]))
            return true;
    return false;
}

bool contains_word(std::string_view text, std::string_view phrase)
{
    if (phrase.empty())
        return false;
    for (size_t pos = text.find(phrase); pos != std::string_view::npos; pos = text.find(phrase, pos + 1))
    {
        const size_t end = pos + phrase.size();
        if ((pos == 0 || !is_word_char(text[pos - 1])) && (end == text.size() || !is_word_char(text[end])))
            return true;
    }
    return false;
}

std::string sha256_hex(std::string_view bytes)
{
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw std::runtime_error("sha256 failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i)
    {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

std::string read_file(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw FormatError("cannot read file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::string& path, std::string_view content)
{
    auto const parent = std::filesystem::path(path).parent_path();
    if (!parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw FormatError("cannot write file: " + path);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
}

} // namespace tracelab
