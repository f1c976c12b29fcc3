#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <tuple>
#include <vector>

#include "erprompt/model.hpp"

namespace erprompt {

/// The evaluation set: pre-paired candidates with ground-truth labels
/// (perfect blocking is assumed upstream, so every pair is labeled).
struct LabeledPairSet {
    std::string name;
    std::vector<CandidatePair> pairs;
    std::size_t positives = 0;
    std::size_t negatives = 0;
};

/// Exactly three labeled demonstration pairs for few-shot prompts,
/// in fixed order: duplicate, duplicate, non-duplicate.
struct DemonstrationSet {
    std::vector<CandidatePair> demos;
    std::uint64_t seed = 0;
};

// File names expected inside the Amazon-Google benchmark directory.
inline constexpr const char* kAmazonRecordsFile = "Amazon.csv";
inline constexpr const char* kGoogleRecordsFile = "GoogleProducts.csv";
inline constexpr const char* kPerfectMappingFile = "perfectMapping.csv";
inline constexpr const char* kLabeledPairsFile = "labeled_pairs.csv";

/// Loads the Amazon-Google benchmark from `dir`. Expects the four files
/// named above: two record files (header id,title,description,manufacturer,
/// price), the perfect mapping (header idAmazon,idGoogle) and the labeled
/// evaluation subset (header idAmazon,idGoogle,label). Empty CSV fields load
/// as missing values; prices stay strings. Profiles come back canonicalized.
std::tuple<EntityCollection, EntityCollection, LabeledPairSet>
load_amazon_google(const std::filesystem::path& dir);

/// Loads a WDC-style pair file: one JSON object per line with keys
/// "left", "right" (attribute maps, null = missing) and "label" (0/1).
/// Profile ids are synthesized from line numbers; attribute order follows
/// each object's key order. Profiles come back canonicalized.
LabeledPairSet load_wdc(const std::filesystem::path& file);

/// Writes a LabeledPairSet in the WDC line format read by load_wdc.
void write_wdc(const LabeledPairSet& set, const std::filesystem::path& file);

/// Writes a collection as an Amazon-Google style record CSV.
void write_collection_csv(const EntityCollection& collection,
                          const std::filesystem::path& file);

/// Draws 2 duplicate + 1 non-duplicate demonstrations from `train`,
/// deterministically for a given seed, in (dup, dup, non-dup) order.
DemonstrationSet sample_demonstrations(const LabeledPairSet& train,
                                       std::uint64_t seed);

} // namespace erprompt
