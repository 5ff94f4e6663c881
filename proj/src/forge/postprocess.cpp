#include "medvqa/forge/postprocess.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <vector>

namespace medvqa::forge {

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string strip_fences(std::string_view in) {
    std::string out;
    std::size_t i = 0;
    while (i < in.size()) {
        if (in.compare(i, 3, "```") == 0) {
            i += 3;
            // language tag of an opening fence: identifier directly followed by newline
            std::size_t j = i;
            while (j < in.size() && (std::isalnum(static_cast<unsigned char>(in[j])) || in[j] == '-' || in[j] == '_'))
                ++j;
            if (j > i && j < in.size() && (in[j] == '\n' || in[j] == '\r')) i = j;
            out += ' ';
            continue;
        }
        out += in[i++];
    }
    return out;
}

std::string collapse_whitespace(std::string_view in) {
    std::string out;
    bool pending = false;
    for (char c : in) {
        if (is_space(c)) {
            pending = !out.empty();
            continue;
        }
        if (pending) out += ' ';
        pending = false;
        out += c;
    }
    return out;
}

std::string strip_role_labels(std::string s) {
    static constexpr std::array<std::string_view, 8> kLabels{
        "assistant", "model", "ai", "gemma", "explanation", "output", "response", "answer"};
    for (bool changed = true; changed;) {
        changed = false;
        for (auto label : kLabels) {
            if (s.size() <= label.size()) continue;
            bool match = true;
            for (std::size_t i = 0; i < label.size(); ++i)
                if (std::tolower(static_cast<unsigned char>(s[i])) != label[i]) match = false;
            if (!match) continue;
            std::size_t j = label.size();
            while (j < s.size() && s[j] == ' ') ++j;
            if (j < s.size() && s[j] == ':') {
                s.erase(0, j + 1);
                while (!s.empty() && s.front() == ' ') s.erase(0, 1);
                changed = true;
            }
        }
    }
    return s;
}

std::vector<std::string> split_sentences(const std::string& s) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if ((c == '.' || c == '!' || c == '?') && (i + 1 == s.size() || s[i + 1] == ' ')) {
            out.push_back(s.substr(start, i + 1 - start));
            start = i + 2;
        }
    }
    if (start < s.size()) out.push_back(s.substr(start));
    return out;
}

}  // namespace

std::string postprocess_explanation(std::string_view text) {
    std::string s = collapse_whitespace(strip_fences(text));
    s = strip_role_labels(std::move(s));
    if (s.empty()) return s;

    std::string out;
    std::string prev;
    for (auto& sentence : split_sentences(s)) {
        if (sentence == prev) continue;
        if (!out.empty()) out += ' ';
        out += sentence;
        prev = std::move(sentence);
    }
    const char last = out.back();
    if (last != '.' && last != '!' && last != '?') out += '.';
    return out;
}

}  // namespace medvqa::forge
