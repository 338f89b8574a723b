#pragma once

#include <string>
#include <vector>

namespace lkd {

/// Materializes the deterministic demo fixture into out_dir:
///   corpus/      six short monitoring-system documents in a three-directory tree
///   script.json  scripted-backend rules covering every pipeline prompt
///   golden/      artifacts of a full build + eval run over that corpus
/// Running build + eval against corpus/ with script.json reproduces golden/
/// byte for byte.
void generate_fixture(const std::string& out_dir);

/// The artifact files mirrored into golden/.
const std::vector<std::string>& fixture_golden_files();

} // namespace lkd
