#include "lkd/parsing.hpp"

#include "lkd/errors.hpp"
#include "lkd/util.hpp"

#include <cstddef>

namespace lkd {

namespace {

// Splits on commas that are not nested inside (), [], {}, or double quotes.
std::vector<std::string> split_top_level(const std::string& s) {
    std::vector<std::string> out;
    int depth = 0;
    bool quoted = false;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= s.size(); ++i) {
        if (i == s.size() || (s[i] == ',' && depth == 0 && !quoted)) {
            out.push_back(s.substr(start, i - start));
            start = i + 1;
            continue;
        }
        const char c = s[i];
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == '(' || c == '[' || c == '{') ++depth;
        if (c == ')' || c == ']' || c == '}') { if (depth > 0) --depth; }
    }
    return out;
}

// Finds the delimiter that closes text[open], honoring nesting of all three
// bracket kinds and double quotes. Returns npos when unbalanced.
std::size_t find_matching(const std::string& text, std::size_t open, char open_ch, char close_ch) {
    int depth = 0;
    bool quoted = false;
    for (std::size_t i = open; i < text.size(); ++i) {
        const char c = text[i];
        if (c == '"') quoted = !quoted;
        if (quoted) continue;
        if (c == open_ch) ++depth;
        else if (c == close_ch) {
            --depth;
            if (depth == 0) return i;
        }
    }
    return std::string::npos;
}

} // namespace

std::vector<std::string> parse_string_list(const std::string& text) {
    const std::size_t open = text.find('[');
    if (open == std::string::npos) throw ParseError("no bracketed list found");
    const std::size_t close = find_matching(text, open, '[', ']');
    if (close == std::string::npos) throw ParseError("unterminated bracketed list");

    const std::string body = text.substr(open + 1, close - open - 1);
    std::vector<std::string> items;
    for (const auto& raw : split_top_level(body)) {
        std::string item = strip_quotes(raw);
        if (!item.empty()) items.push_back(std::move(item));
    }
    return items;
}

std::vector<std::array<std::string, 3>> parse_triples(const std::string& text,
                                                      std::size_t* malformed) {
    std::vector<std::array<std::string, 3>> out;
    std::size_t bad = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        const std::size_t open = text.find('(', pos);
        if (open == std::string::npos) break;
        const std::size_t close = text.find(')', open + 1);
        if (close == std::string::npos) break;
        const std::string body = text.substr(open + 1, close - open - 1);
        auto fields = split_top_level(body);
        if (fields.size() == 3) {
            std::array<std::string, 3> tuple;
            bool ok = true;
            for (std::size_t i = 0; i < 3; ++i) {
                tuple[i] = strip_quotes(fields[i]);
                if (tuple[i].empty()) ok = false;
            }
            if (ok) out.push_back(std::move(tuple));
            else ++bad;
        } else {
            ++bad;
        }
        pos = close + 1;
    }
    if (malformed) *malformed = bad;
    if (out.empty()) throw ParseError("no well-formed (subject, predicate, object) tuple found");
    return out;
}

namespace {

// True when the text beginning at `i` looks like the start of the next
// "key:" entry, which disambiguates commas inside unquoted scalar values.
bool looks_like_key_ahead(const std::string& body, std::size_t i) {
    while (i < body.size() &&
           std::isspace(static_cast<unsigned char>(body[i]))) ++i;
    const std::size_t limit = std::min(body.size(), i + 80);
    for (std::size_t j = i; j < limit; ++j) {
        const char c = body[j];
        if (c == ':') return j > i;  // nonempty key
        if (c == ',' || c == '[' || c == ']' || c == '{' || c == '}') return false;
    }
    return false;
}

} // namespace

std::vector<NameMapEntry> parse_name_map(const std::string& text) {
    const std::size_t open = text.find('{');
    if (open == std::string::npos) throw ParseError("no brace-delimited mapping found");
    const std::size_t close = find_matching(text, open, '{', '}');
    if (close == std::string::npos) throw ParseError("unterminated mapping");

    const std::string body = text.substr(open + 1, close - open - 1);
    std::vector<NameMapEntry> entries;

    std::size_t i = 0;
    const std::size_t n = body.size();
    while (i < n) {
        while (i < n && (std::isspace(static_cast<unsigned char>(body[i])) || body[i] == ',')) ++i;
        if (i >= n) break;

        // key runs to the first unquoted ':'
        const std::size_t key_start = i;
        bool quoted = false;
        std::size_t colon = std::string::npos;
        for (std::size_t j = i; j < n; ++j) {
            if (body[j] == '"') quoted = !quoted;
            else if (body[j] == ':' && !quoted) { colon = j; break; }
        }
        if (colon == std::string::npos) break;  // trailing text without a key:value shape

        NameMapEntry entry;
        entry.key = strip_quotes(body.substr(key_start, colon - key_start));
        i = colon + 1;
        while (i < n && std::isspace(static_cast<unsigned char>(body[i]))) ++i;

        if (i < n && body[i] == '[') {
            const std::size_t end = find_matching(body, i, '[', ']');
            const std::size_t list_end = (end == std::string::npos) ? n : end;
            entry.is_list = true;
            for (const auto& raw : split_top_level(body.substr(i + 1, list_end - i - 1))) {
                std::string item = strip_quotes(raw);
                if (!item.empty()) entry.items.push_back(std::move(item));
            }
            i = (end == std::string::npos) ? n : end + 1;
        } else if (i < n && body[i] == '"') {
            const std::size_t end = body.find('"', i + 1);
            const std::size_t str_end = (end == std::string::npos) ? n : end;
            entry.scalar = trim(body.substr(i + 1, str_end - i - 1));
            i = (end == std::string::npos) ? n : end + 1;
        } else {
            // unquoted scalar: ends at a comma that is followed by the next key
            std::size_t end = i;
            int depth = 0;
            while (end < n) {
                const char c = body[end];
                if (c == '[' || c == '{' || c == '(') ++depth;
                else if (c == ']' || c == '}' || c == ')') { if (depth > 0) --depth; }
                else if (c == ',' && depth == 0 && looks_like_key_ahead(body, end + 1)) break;
                ++end;
            }
            entry.scalar = trim(body.substr(i, end - i));
            i = end;
        }

        if (!entry.key.empty()) entries.push_back(std::move(entry));
        // skip to the comma that separates entries
        while (i < n && body[i] != ',') ++i;
    }
    return entries;
}

} // namespace lkd
