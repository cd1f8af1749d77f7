#pragma once

#include <cstdint>
#include <filesystem>

#include "riskpipe/domain.hpp"
#include "riskpipe/lexicon.hpp"

namespace riskpipe {

// Desk-scale stand-in for the restricted corpus. Each subject gets ER/ED
// transcripts whose sentences carry a marker with a class-conditional
// probability, an identical fixed PR passage, and surrogate acoustic
// token files with the same class separation for the speech branch.
struct SyntheticSpec {
    int n_subjects = 120;
    double label_balance = 0.5;  // fraction of at-risk subjects
    MarkerLexicon lexicon = MarkerLexicon::builtin_default();
    double p_marker_at_risk = 0.9;   // per-sentence marker probability
    double p_marker_non_risk = 0.1;
    int sentences_per_transcript = 10;
    int tokens_per_recording = 40;
    std::uint64_t seed = 0;

    void validate() const;
};

// Writes <out_dir>/manifest.jsonl plus audio/<subject>__<task>.tok token
// files and sibling .txt transcripts for the "file" ASR provider, and
// returns the manifest. Deterministic: same spec, same bytes.
DatasetManifest generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir);

}  // namespace riskpipe
