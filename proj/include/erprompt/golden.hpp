#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "erprompt/model.hpp"
#include "erprompt/ingest.hpp"

namespace erprompt {

/// The fixed fixture pair used for golden prompt files: the Amazon/Google
/// "Apple final cut studio 2" product listing.
CandidatePair golden_fixture_pair();

/// Three committed demonstration pairs (dup, dup, non-dup) so the few-shot
/// golden render is self-contained.
DemonstrationSet golden_fixture_demonstrations();

/// (file name, exact content) for every golden fixture: the persona plus
/// one rendered user message per pattern.
std::vector<std::pair<std::string, std::string>> golden_fixture_files();

/// Writes missing fixtures and verifies existing ones; with `update` set it
/// rewrites everything. Returns 0 when all fixtures match, 1 on drift
/// (a diff goes to `diagnostics`).
int freeze_prompts(const std::filesystem::path& dir, bool update,
                   std::ostream& diagnostics);

} // namespace erprompt
