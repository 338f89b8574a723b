#pragma once

#include <map>
#include <string>
#include <vector>

namespace lkd {

/// Named prompt templates with {placeholder} substitution. Built-in defaults can
/// be overridden per template by files named "<name>.txt" in a templates
/// directory.
class PromptLibrary {
public:
    PromptLibrary();

    /// Overlays templates from a directory; unknown file names are rejected.
    void load_overrides(const std::string& templates_dir);

    /// Writes every default template into a directory.
    static void write_defaults(const std::string& templates_dir);

    std::string render(const std::string& name,
                       const std::vector<std::pair<std::string, std::string>>& values) const;

    const std::string& raw(const std::string& name) const;

    static const std::map<std::string, std::string>& defaults();

private:
    std::map<std::string, std::string> templates_;
};

/// System prompt shared by all pipeline calls.
extern const char* const kSystemPrompt;

} // namespace lkd
