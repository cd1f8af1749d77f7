#pragma once

#include <array>
#include <filesystem>
#include <string>

#include "riskpipe/domain.hpp"

namespace riskpipe {

// Line-delimited manifest format: one JSON object per line, discriminated
// by "record_type" in {"subject", "recording", "transcript"}. Unknown
// record types and unknown fields are rejected with the line number.
DatasetManifest parse_manifest(const std::filesystem::path& path);
DatasetManifest parse_manifest_text(const std::string& text);

std::string serialize_manifest(const DatasetManifest& manifest);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Checks every cross-record invariant; violations are data, not failures.
ValidationReport validate_manifest(const DatasetManifest& manifest);

// Assigns train/dev/test splits stratified by label. If the manifest
// already carries split assignments it is returned unchanged; the official
// corpus ships with a fixed split and must never be re-split.
DatasetManifest split_dataset(const DatasetManifest& manifest,
                              const std::array<int, 3>& ratios,
                              std::uint64_t seed);

}  // namespace riskpipe
