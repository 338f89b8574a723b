#pragma once

#include <array>
#include <string>
#include <vector>

namespace lkd {

/// Extracts the first bracketed list from free-form model output. Items are split
/// on top-level commas, trimmed, and stripped of surrounding quotes; empty items
/// are dropped. Throws ParseError when no bracketed list is present.
std::vector<std::string> parse_string_list(const std::string& text);

/// Extracts all parenthesized 3-tuples. Tuples with a different field count (or
/// empty fields) are skipped and counted in *malformed. Throws ParseError when no
/// well-formed tuple is found.
std::vector<std::array<std::string, 3>> parse_triples(const std::string& text,
                                                      std::size_t* malformed = nullptr);

struct NameMapEntry {
    std::string key;
    bool is_list = false;
    std::string scalar;               // set when !is_list
    std::vector<std::string> items;   // set when is_list
};

/// Parses the first brace-delimited mapping, tolerating unquoted keys and values.
/// Values are either bracketed lists or scalars; a scalar may contain commas as
/// long as the text after a comma does not look like the next "key:" entry.
std::vector<NameMapEntry> parse_name_map(const std::string& text);

} // namespace lkd
