#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "poisonlab/classifier.hpp"
#include "poisonlab/dataset.hpp"
#include "poisonlab/guide.hpp"

namespace poisonlab {

struct EntropyRecord {
    int sample_index = 0;
    double s_clip = 0.0;   // guide entropy against the observed label
    double s_model = 0.0;  // victim entropy at the intermediate epoch
    double rank_clip = 0.0;
    double rank_model = 0.0;
};

struct SplitConfig {
    double sigma1 = 0.2;
    double sigma2 = 0.1;
    int intermediate_epoch = 5;

    void validate() const;
};

struct SplitResult {
    std::vector<int> clean_indices;      // D_c
    std::vector<int> triggered_indices;  // D_p
    std::vector<int> mixed_indices;
    double sigma1 = 0.0;
    double sigma2 = 0.0;
};

/// S = -log softmax(logits)[label], via a stable log-sum-exp.
double entropy_score(std::span<const double> logits, int label);

/// Ascending 1-based positions divided by N; ties get the average of their
/// positions. Values lie in (0, 1].
std::vector<double> percentile_ranks(std::span<const double> scores);

/// Per-sample entropy pairs from the guide and the victim snapshot, with
/// percentile ranks per column. guide_trigger_present (optional, indexed by
/// sample) marks samples carrying the guide's own trigger.
std::vector<EntropyRecord> build_entropy_map(const Dataset& data, const GuideModel& guide,
                                             const Classifier& victim_snapshot,
                                             const std::vector<bool>& guide_trigger_present = {});

// D_c = { rank_clip <= 1 - sigma1 and rank_model >= sigma1 }
// D_p = { rank_clip >  1 - sigma2 or  rank_model <  sigma2 }
// The remainder is the mixed subset. Disjointness of D_c and D_p follows
// from sigma2 <= sigma1, which is enforced.
SplitResult split(std::span<const EntropyRecord> records, const SplitConfig& cfg);

struct OversampleResult {
    std::vector<int> indices;          // multiset: the original D_c first, duplicates after
    std::vector<int> missing_classes;  // classes absent from D_c, skipped with a warning
};

/// Duplicates D_c samples per class (with replacement) until each present
/// class's share matches its share among observed labels in the full dataset,
/// within one sample.
OversampleResult oversample_clean(std::span<const int> clean_indices, const Dataset& data,
                                  Rng& rng);

void export_entropy_map(std::span<const EntropyRecord> records, const Dataset& data,
                        const SplitResult& split, const std::filesystem::path& path);

struct SplitSummary {
    // per-tag counts in each subset, indexed [tag][subset] with
    // subsets 0=clean, 1=triggered, 2=mixed
    long long confusion[4][3] = {};
};

SplitSummary summarize_split(std::span<const EntropyRecord> records, const Dataset& data,
                             const SplitResult& split);

void save_split_summary(const SplitResult& split, const SplitSummary& summary,
                        const std::filesystem::path& path);

}  // namespace poisonlab
