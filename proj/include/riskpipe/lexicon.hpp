#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace riskpipe {

// One risk marker with its surface form per language. The en form stands
// in for the marker after bilingual extraction; lookups must be
// count-preserving, which the loader validates.
struct MarkerEntry {
    std::string zh;
    std::string en;
};

// Drives the deterministic mocks end to end: the mock extractor filters
// sentences on zh marker surfaces, the bag-of-markers text encoder counts
// the surfaces of its configured language, the bag-of-tokens speech
// encoder counts the acoustic vocabulary, and the synthetic corpus
// generator plants markers with class-conditional probabilities.
struct MarkerLexicon {
    std::vector<MarkerEntry> text_markers;
    std::vector<std::string> text_fillers;
    std::vector<std::string> acoustic_markers;
    std::vector<std::string> acoustic_fillers;

    static MarkerLexicon load(const std::filesystem::path& path);
    static MarkerLexicon builtin_default();

    std::vector<std::string> marker_surfaces(const std::string& language) const;
    std::vector<std::string> acoustic_vocabulary() const;  // markers then fillers

    void validate() const;
};

}  // namespace riskpipe
