#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

namespace lkd {

std::string trim(std::string_view s);
std::string to_lower(std::string_view s);

/// Strips one layer of matching single or double quotes, then trims again.
std::string strip_quotes(std::string_view s);

/// Case-insensitive ASCII comparison.
bool iequals(std::string_view a, std::string_view b);

/// Splits on a separator character, no trimming.
std::vector<std::string> split(std::string_view s, char sep);

/// Whitespace-delimited lowercase tokens (non-alphanumeric treated as space).
std::vector<std::string> fold_tokens(std::string_view s);

/// FNV-1a 64-bit hash.
std::uint64_t fnv1a64(std::string_view data);

/// FNV-1a 64-bit as fixed-width hex, used as artifact digest.
std::string digest_hex(std::string_view data);

/// Structural UTF-8 validation (no overlong forms, surrogates, or values past U+10FFFF).
bool is_valid_utf8(std::string_view bytes);

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

/// Replaces every "{key}" occurrence in a template body.
std::string substitute(std::string_view tmpl,
                       const std::vector<std::pair<std::string, std::string>>& values);

/// Runs fn over [0, n) on up to `parallelism` threads. `commit(i)` is invoked on the
/// calling thread in strict index order, each commit only after fn(i) finished. If an
/// fn call throws, all indices before the first failing one are still committed, then
/// the exception is rethrown.
void parallel_for_ordered(std::size_t n, int parallelism,
                          const std::function<void(std::size_t)>& fn,
                          const std::function<void(std::size_t)>& commit);

} // namespace lkd
