#pragma once

// Reference implementations used only by tests. They are written
// independently of the library: plain loops, full tables, long double where
// it helps, no shared helpers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace oracle {

// Minimal UTF-8 decoder; assumes well-formed input.
inline std::u32string decode(std::string_view s) {
    std::u32string out;
    for (std::size_t i = 0; i < s.size();) {
        const auto b = static_cast<unsigned char>(s[i]);
        char32_t cp = 0;
        int extra = 0;
        if (b < 0x80) {
            cp = b;
        } else if ((b >> 5) == 0x6) {
            cp = b & 0x1F;
            extra = 1;
        } else if ((b >> 4) == 0xE) {
            cp = b & 0x0F;
            extra = 2;
        } else {
            cp = b & 0x07;
            extra = 3;
        }
        for (int k = 1; k <= extra; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
        out.push_back(cp);
        i += 1 + extra;
    }
    return out;
}

inline std::string encode(const std::u32string& s) {
    std::string out;
    for (const char32_t cp : s) {
        if (cp < 0x80) {
            out += static_cast<char>(cp);
        } else if (cp < 0x800) {
            out += static_cast<char>(0xC0 | (cp >> 6));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else if (cp < 0x10000) {
            out += static_cast<char>(0xE0 | (cp >> 12));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        } else {
            out += static_cast<char>(0xF0 | (cp >> 18));
            out += static_cast<char>(0x80 | ((cp >> 12) & 0x3F));
            out += static_cast<char>(0x80 | ((cp >> 6) & 0x3F));
            out += static_cast<char>(0x80 | (cp & 0x3F));
        }
    }
    return out;
}

// Textbook Wagner-Fischer with the whole (n+1) x (m+1) table.
inline std::size_t levenshtein(const std::u32string& a, const std::u32string& b) {
    const std::size_t n = a.size(), m = b.size();
    std::vector<std::vector<std::size_t>> d(n + 1, std::vector<std::size_t>(m + 1));
    for (std::size_t i = 0; i <= n; ++i) d[i][0] = i;
    for (std::size_t j = 0; j <= m; ++j) d[0][j] = j;
    for (std::size_t i = 1; i <= n; ++i) {
        for (std::size_t j = 1; j <= m; ++j) {
            const std::size_t cost = a[i - 1] == b[j - 1] ? 0 : 1;
            d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + cost});
        }
    }
    return d[n][m];
}

// A reward in [0, 1] written as an exact fraction num/den.
struct Fraction {
    std::int64_t num = 0;
    std::int64_t den = 1;
    // IEEE division of two exactly representable integers is the correctly
    // rounded value of the fraction.
    double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

// 1 - |(Nts - Nts^) + (Nobj - Nobj^)| / (Nts + Nobj), floored at 0; an
// all-zero reference only rewards an all-zero prediction.
inline Fraction count_reward(std::int64_t ref_ts, std::int64_t ref_obj, std::int64_t pred_ts,
                             std::int64_t pred_obj) {
    const std::int64_t den = ref_ts + ref_obj;
    if (den == 0) return {pred_ts == 0 && pred_obj == 0 ? 1 : 0, 1};
    std::int64_t err = (ref_ts - pred_ts) + (ref_obj - pred_obj);
    if (err < 0) err = -err;
    return {std::max<std::int64_t>(den - err, 0), den};
}

inline Fraction answer_reward(const std::u32string& ref, const std::u32string& pred) {
    const auto longest = static_cast<std::int64_t>(std::max(ref.size(), pred.size()));
    if (longest == 0) return {1, 1};
    return {longest - static_cast<std::int64_t>(levenshtein(ref, pred)), longest};
}

// (r - mean) / (popstd + eps) in long double.
inline std::vector<long double> advantages(const std::vector<double>& r, long double eps) {
    long double mean = 0;
    for (double v : r) mean += v;
    mean /= static_cast<long double>(r.size());
    long double var = 0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<long double>(r.size());
    std::vector<long double> out;
    const long double sd = std::sqrt(var);
    for (double v : r) out.push_back(sd == 0 ? 0.0L : (v - mean) / (sd + eps));
    return out;
}

}  // namespace oracle
