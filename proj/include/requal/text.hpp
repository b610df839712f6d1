#pragma once

#include <cctype>
#include <string_view>

namespace requal::detail {

inline std::string_view trim(std::string_view s) {
    const auto ws = " \t\r\n";
    const auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

inline bool is_word_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) != 0 || c == '_';
}

/// Position of `needle` in `hay` as a whole word, or npos.
inline std::size_t find_word(std::string_view hay, std::string_view needle) {
    if (needle.empty()) return std::string_view::npos;
    std::size_t pos = hay.find(needle);
    while (pos != std::string_view::npos) {
        const bool left_ok = pos == 0 || !is_word_char(hay[pos - 1]);
        const std::size_t end = pos + needle.size();
        const bool right_ok = end >= hay.size() || !is_word_char(hay[end]);
        if (left_ok && right_ok) return pos;
        pos = hay.find(needle, pos + 1);
    }
    return std::string_view::npos;
}

}  // namespace requal::detail
