#include "poisonlab/split.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

namespace poisonlab {

void SplitConfig::validate() const {
    if (!(sigma1 > 0.0 && sigma1 < 1.0)) throw std::invalid_argument("split: sigma1 must be in (0,1)");
    if (!(sigma2 > 0.0 && sigma2 < 1.0)) throw std::invalid_argument("split: sigma2 must be in (0,1)");
    if (sigma2 > sigma1) throw std::invalid_argument("split: sigma2 must be <= sigma1");
    if (intermediate_epoch < 0) throw std::invalid_argument("split: intermediate epoch must be >= 0");
}

double entropy_score(std::span<const double> logits, int label) {
    if (label < 0 || static_cast<std::size_t>(label) >= logits.size())
        throw std::invalid_argument("entropy_score: label out of range");
    double m = logits[0];
    for (double z : logits) {
        if (!std::isfinite(z)) throw std::invalid_argument("entropy_score: non-finite logit");
        m = std::max(m, z);
    }
    // Sum in ascending order so permutations of the same logit multiset give
    // bit-identical scores. Ranks downstream rely on exact ties; index-order
    // summation would order tied samples by rounding noise.
    std::vector<double> terms(logits.size());
    for (std::size_t i = 0; i < logits.size(); ++i) terms[i] = std::exp(logits[i] - m);
    std::sort(terms.begin(), terms.end());
    double lse = 0.0;
    for (double t : terms) lse += t;
    return std::log(lse) - (logits[static_cast<std::size_t>(label)] - m);
}

std::vector<double> percentile_ranks(std::span<const double> scores) {
    if (scores.empty()) throw std::invalid_argument("percentile_ranks: empty input");
    const std::size_t n = scores.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (double s : scores) {
        if (std::isnan(s)) throw std::invalid_argument("percentile_ranks: NaN score");
    }
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
        // positions i+1 .. j+1 share the value; average them
        const double avg = static_cast<double>(i + j + 2) / 2.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg / static_cast<double>(n);
        i = j + 1;
    }
    return ranks;
}

std::vector<EntropyRecord> build_entropy_map(const Dataset& data, const GuideModel& guide,
                                             const Classifier& victim_snapshot,
                                             const std::vector<bool>& guide_trigger_present) {
    data.validate();
    if (!guide_trigger_present.empty() && guide_trigger_present.size() != data.samples.size())
        throw std::invalid_argument("build_entropy_map: flag vector length mismatch");
    if (victim_snapshot.input_dim() != data.feature_dim ||
        victim_snapshot.num_classes() != data.num_classes)
        throw std::invalid_argument("build_entropy_map: victim dims do not match dataset");

    const std::size_t n = data.samples.size();
    std::vector<EntropyRecord> records(n);
    std::vector<double> col_clip(n), col_model(n);
    for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = data.samples[i];
        const bool flag = guide_trigger_present.empty() ? false : guide_trigger_present[i];
        const std::vector<double> gz = guide_logits(guide, s, static_cast<int>(i), flag);
        const std::vector<double> vz = forward(victim_snapshot, s.features);
        records[i].sample_index = static_cast<int>(i);
        records[i].s_clip = entropy_score(gz, s.observed_label);
        records[i].s_model = entropy_score(vz, s.observed_label);
        col_clip[i] = records[i].s_clip;
        col_model[i] = records[i].s_model;
    }
    const std::vector<double> rank_clip = percentile_ranks(col_clip);
    const std::vector<double> rank_model = percentile_ranks(col_model);
    for (std::size_t i = 0; i < n; ++i) {
        records[i].rank_clip = rank_clip[i];
        records[i].rank_model = rank_model[i];
    }
    return records;
}

SplitResult split(std::span<const EntropyRecord> records, const SplitConfig& cfg) {
    cfg.validate();
    SplitResult result;
    result.sigma1 = cfg.sigma1;
    result.sigma2 = cfg.sigma2;
    for (const EntropyRecord& r : records) {
        if (r.rank_clip > 1.0 - cfg.sigma2 || r.rank_model < cfg.sigma2) {
            result.triggered_indices.push_back(r.sample_index);
        } else if (r.rank_clip <= 1.0 - cfg.sigma1 && r.rank_model >= cfg.sigma1) {
            result.clean_indices.push_back(r.sample_index);
        } else {
            result.mixed_indices.push_back(r.sample_index);
        }
    }
    return result;
}

OversampleResult oversample_clean(std::span<const int> clean_indices, const Dataset& data,
                                  Rng& rng) {
    if (clean_indices.empty()) throw std::invalid_argument("oversample_clean: empty D_c");
    const int num_classes = data.num_classes;

    std::vector<long long> full_count(static_cast<std::size_t>(num_classes), 0);
    for (const Sample& s : data.samples) full_count[static_cast<std::size_t>(s.observed_label)]++;

    std::vector<std::vector<int>> by_class(static_cast<std::size_t>(num_classes));
    for (int idx : clean_indices) {
        by_class[static_cast<std::size_t>(data.samples.at(static_cast<std::size_t>(idx)).observed_label)]
            .push_back(idx);
    }

    OversampleResult result;
    // shares are taken over the classes present in D_c; absent classes are
    // skipped (they cannot be oversampled from nothing)
    double present_share = 0.0;
    double max_ratio = 0.0;
    const double total = static_cast<double>(data.samples.size());
    for (int c = 0; c < num_classes; ++c) {
        const double share = static_cast<double>(full_count[static_cast<std::size_t>(c)]) / total;
        if (by_class[static_cast<std::size_t>(c)].empty()) {
            if (full_count[static_cast<std::size_t>(c)] > 0) result.missing_classes.push_back(c);
            continue;
        }
        present_share += share;
        max_ratio = std::max(max_ratio,
                             static_cast<double>(by_class[static_cast<std::size_t>(c)].size()) / share);
    }

    // Hamilton apportionment of ceil(max_ratio * present_share) slots across
    // the present classes: every target lands within one sample of its ideal
    // share and never below the existing count.
    const long long m_total = static_cast<long long>(std::ceil(max_ratio * present_share - 1e-9));
    std::vector<long long> target(static_cast<std::size_t>(num_classes), 0);
    std::vector<std::pair<double, int>> remainders;
    long long assigned = 0;
    for (int c = 0; c < num_classes; ++c) {
        if (by_class[static_cast<std::size_t>(c)].empty()) continue;
        const double share = static_cast<double>(full_count[static_cast<std::size_t>(c)]) / total;
        const double ideal = static_cast<double>(m_total) * share / present_share;
        target[static_cast<std::size_t>(c)] = static_cast<long long>(std::floor(ideal + 1e-9));
        assigned += target[static_cast<std::size_t>(c)];
        remainders.push_back({ideal - std::floor(ideal + 1e-9), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (long long r = 0; r < m_total - assigned && r < static_cast<long long>(remainders.size()); ++r) {
        target[static_cast<std::size_t>(remainders[static_cast<std::size_t>(r)].second)]++;
    }

    result.indices.assign(clean_indices.begin(), clean_indices.end());
    for (int c = 0; c < num_classes; ++c) {
        const auto& pool = by_class[static_cast<std::size_t>(c)];
        if (pool.empty()) continue;
        long long need = target[static_cast<std::size_t>(c)] - static_cast<long long>(pool.size());
        for (long long k = 0; k < need; ++k) {
            result.indices.push_back(pool[rng.uniform_int(pool.size())]);
        }
    }
    return result;
}

namespace {

const char* subset_name(int which) {
    switch (which) {
        case 0: return "clean";
        case 1: return "triggered";
        default: return "mixed";
    }
}

std::vector<int> subset_of_each(std::size_t n, const SplitResult& split) {
    std::vector<int> subset(n, 2);
    for (int idx : split.clean_indices) subset.at(static_cast<std::size_t>(idx)) = 0;
    for (int idx : split.triggered_indices) subset.at(static_cast<std::size_t>(idx)) = 1;
    return subset;
}

}  // namespace

void export_entropy_map(std::span<const EntropyRecord> records, const Dataset& data,
                        const SplitResult& split, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    const std::vector<int> subset = subset_of_each(data.samples.size(), split);
    out << "index,label,ground_truth,poison_tag,s_clip,s_model,rank_clip,rank_model,subset\n";
    char buf[512];
    for (const EntropyRecord& r : records) {
        const Sample& s = data.samples.at(static_cast<std::size_t>(r.sample_index));
        std::snprintf(buf, sizeof(buf), "%d,%d,%d,%s,%.17g,%.17g,%.17g,%.17g,%s\n",
                      r.sample_index, s.observed_label, s.ground_truth,
                      to_string(s.poison_tag).c_str(), r.s_clip, r.s_model, r.rank_clip,
                      r.rank_model, subset_name(subset.at(static_cast<std::size_t>(r.sample_index))));
        out << buf;
    }
    if (!out) throw std::runtime_error("write failed for " + path.string());
}

SplitSummary summarize_split(std::span<const EntropyRecord> records, const Dataset& data,
                             const SplitResult& split) {
    SplitSummary summary;
    const std::vector<int> subset = subset_of_each(data.samples.size(), split);
    for (const EntropyRecord& r : records) {
        const Sample& s = data.samples.at(static_cast<std::size_t>(r.sample_index));
        summary.confusion[static_cast<int>(s.poison_tag)]
                         [subset.at(static_cast<std::size_t>(r.sample_index))]++;
    }
    return summary;
}

void save_split_summary(const SplitResult& split, const SplitSummary& summary,
                        const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["sigma1"] = split.sigma1;
    j["sigma2"] = split.sigma2;
    j["n_clean"] = split.clean_indices.size();
    j["n_triggered"] = split.triggered_indices.size();
    j["n_mixed"] = split.mixed_indices.size();
    nlohmann::ordered_json confusion;
    const PoisonTag tags[] = {PoisonTag::Clean, PoisonTag::LabelPoison,
                              PoisonTag::CleanLabelPoison, PoisonTag::CleanImagePoison};
    for (PoisonTag tag : tags) {
        nlohmann::ordered_json row;
        row["clean"] = summary.confusion[static_cast<int>(tag)][0];
        row["triggered"] = summary.confusion[static_cast<int>(tag)][1];
        row["mixed"] = summary.confusion[static_cast<int>(tag)][2];
        confusion[to_string(tag)] = std::move(row);
    }
    j["confusion"] = std::move(confusion);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

}  // namespace poisonlab
