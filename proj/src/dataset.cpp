#include "poisonlab/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

#include <json.hpp>

#include "poisonlab/kernels.hpp"

namespace poisonlab {

std::string to_string(PoisonTag tag) {
    switch (tag) {
        case PoisonTag::Clean: return "clean";
        case PoisonTag::LabelPoison: return "label_poison";
        case PoisonTag::CleanLabelPoison: return "clean_label_poison";
        case PoisonTag::CleanImagePoison: return "clean_image_poison";
    }
    throw std::logic_error("bad PoisonTag");
}

PoisonTag poison_tag_from_string(const std::string& s) {
    if (s == "clean") return PoisonTag::Clean;
    if (s == "label_poison") return PoisonTag::LabelPoison;
    if (s == "clean_label_poison") return PoisonTag::CleanLabelPoison;
    if (s == "clean_image_poison") return PoisonTag::CleanImagePoison;
    throw std::invalid_argument("unknown poison tag: " + s);
}

std::string to_string(TriggerKind kind) {
    switch (kind) {
        case TriggerKind::Patch: return "patch";
        case TriggerKind::Blend: return "blend";
        case TriggerKind::Sinusoid: return "sinusoid";
    }
    throw std::logic_error("bad TriggerKind");
}

TriggerKind trigger_kind_from_string(const std::string& s) {
    if (s == "patch") return TriggerKind::Patch;
    if (s == "blend") return TriggerKind::Blend;
    if (s == "sinusoid") return TriggerKind::Sinusoid;
    throw std::invalid_argument("unknown trigger kind: " + s);
}

std::string to_string(AttackFamily family) {
    switch (family) {
        case AttackFamily::LabelPoison: return "label_poison";
        case AttackFamily::CleanLabel: return "clean_label";
        case AttackFamily::CleanImage: return "clean_image";
    }
    throw std::logic_error("bad AttackFamily");
}

AttackFamily attack_family_from_string(const std::string& s) {
    if (s == "label_poison") return AttackFamily::LabelPoison;
    if (s == "clean_label") return AttackFamily::CleanLabel;
    if (s == "clean_image") return AttackFamily::CleanImage;
    throw std::invalid_argument("unknown attack family: " + s);
}

void Dataset::validate() const {
    if (samples.empty()) throw std::invalid_argument("dataset: empty");
    if (num_classes < 2) throw std::invalid_argument("dataset: need at least 2 classes");
    if (feature_dim < 1) throw std::invalid_argument("dataset: feature_dim must be positive");
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (const Sample& s : samples) {
        if (s.features.size() != static_cast<std::size_t>(feature_dim))
            throw std::invalid_argument("dataset: inconsistent feature_dim");
        if (s.observed_label < 0 || s.observed_label >= num_classes ||
            s.ground_truth < 0 || s.ground_truth >= num_classes)
            throw std::invalid_argument("dataset: label out of range");
        seen[static_cast<std::size_t>(s.ground_truth)] = true;
    }
    for (int c = 0; c < num_classes; ++c) {
        if (!seen[static_cast<std::size_t>(c)])
            throw std::invalid_argument("dataset: class " + std::to_string(c) + " missing");
    }
}

void TriggerSpec::validate(int feature_dim) const {
    if (opacity <= 0.0 || opacity > 1.0) throw std::invalid_argument("trigger: opacity must be in (0,1]");
    if (rand_patch_mask && (*rand_patch_mask < 0.0 || *rand_patch_mask >= 1.0))
        throw std::invalid_argument("trigger: rand_patch_mask must be in [0,1)");
    switch (kind) {
        case TriggerKind::Patch:
            if (patch_coords.size() != patch_values.size())
                throw std::invalid_argument("trigger: patch_coords/patch_values size mismatch");
            if (patch_coords.empty()) throw std::invalid_argument("trigger: empty patch");
            for (int c : patch_coords) {
                if (c < 0 || c >= feature_dim)
                    throw std::invalid_argument("trigger: patch coordinate out of range");
            }
            break;
        case TriggerKind::Blend:
            if (pattern.size() != static_cast<std::size_t>(feature_dim))
                throw std::invalid_argument("trigger: pattern length must equal feature_dim");
            if (alpha < 0.0 || alpha > 1.0) throw std::invalid_argument("trigger: alpha must be in [0,1]");
            break;
        case TriggerKind::Sinusoid:
            if (!std::isfinite(amplitude)) throw std::invalid_argument("trigger: amplitude not finite");
            break;
    }
}

void AttackConfig::validate(int num_classes, int feature_dim) const {
    if (target_class < 0 || target_class >= num_classes)
        throw std::invalid_argument("attack: target_class out of range");
    if (!(poison_rate > 0.0 && poison_rate < 1.0))
        throw std::invalid_argument("attack: poison_rate must be in (0,1)");
    if (family == AttackFamily::CleanImage) {
        if (!(flip_quantile > 0.0 && flip_quantile < 1.0))
            throw std::invalid_argument("attack: flip_quantile must be in (0,1)");
        if (!flip_direction.empty() && flip_direction.size() != static_cast<std::size_t>(feature_dim))
            throw std::invalid_argument("attack: flip_direction length must equal feature_dim");
    } else {
        trigger.validate(feature_dim);
    }
}

namespace {

// Class directions are random unit vectors, orthonormalized while C <= d so
// every pair of cluster centers sits at the same distance. Without this the
// closest random pair dictates the Bayes error and accuracy swings by seed.
std::vector<std::vector<double>> class_directions(int num_classes, int feature_dim,
                                                  std::uint64_t seed) {
    std::vector<std::vector<double>> dirs;
    for (int c = 0; c < num_classes; ++c) {
        Rng rng(mix_seed(seed, 1000 + static_cast<std::uint64_t>(c)));
        std::vector<double> mu(static_cast<std::size_t>(feature_dim));
        double norm = 0.0;
        do {
            for (double& x : mu) x = rng.gaussian();
            if (c < feature_dim) {
                for (const auto& prev : dirs) {
                    const double proj = kernels::dot(mu.data(), prev.data(), mu.size());
                    kernels::axpy(-proj, prev.data(), mu.data(), mu.size());
                }
            }
            norm = std::sqrt(kernels::dot(mu.data(), mu.data(), mu.size()));
        } while (norm < 1e-12);
        kernels::scale(mu.data(), 1.0 / norm, mu.size());
        dirs.push_back(std::move(mu));
    }
    return dirs;
}

// Seed-derived direction for the CleanImage flip rule when the config leaves
// flip_direction empty.
std::vector<double> default_flip_direction(int feature_dim, std::uint64_t seed) {
    Rng rng(mix_seed(seed, 0x666c6970 /* "flip" */));
    std::vector<double> dir(static_cast<std::size_t>(feature_dim));
    double norm = 0.0;
    do {
        for (double& x : dir) x = rng.gaussian();
        norm = std::sqrt(kernels::dot(dir.data(), dir.data(), dir.size()));
    } while (norm < 1e-12);
    kernels::scale(dir.data(), 1.0 / norm, dir.size());
    return dir;
}

std::vector<double> resolve_flip_direction(const Dataset& data, const AttackConfig& cfg) {
    if (!cfg.flip_direction.empty()) return cfg.flip_direction;
    return default_flip_direction(data.feature_dim, cfg.seed);
}

// Eligible sample indices (ground_truth != target) with their projections,
// plus the realized flip threshold (the flip_quantile-quantile of projections).
struct FlipRule {
    std::vector<int> eligible;
    std::vector<double> projections;  // parallel to eligible
    double threshold;
};

FlipRule compute_flip_rule(const Dataset& data, const AttackConfig& cfg) {
    const std::vector<double> dir = resolve_flip_direction(data, cfg);
    FlipRule rule;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const Sample& s = data.samples[i];
        if (s.ground_truth == cfg.target_class) continue;
        rule.eligible.push_back(static_cast<int>(i));
        rule.projections.push_back(kernels::dot(s.features.data(), dir.data(), dir.size()));
    }
    if (rule.eligible.empty()) throw std::runtime_error("attack: no eligible samples for clean-image flip");
    std::vector<double> sorted = rule.projections;
    std::sort(sorted.begin(), sorted.end());
    // lower empirical quantile: smallest value with at least q mass at or below it
    const std::size_t n = sorted.size();
    std::size_t pos = static_cast<std::size_t>(std::ceil(cfg.flip_quantile * static_cast<double>(n)));
    if (pos == 0) pos = 1;
    if (pos > n) pos = n;
    rule.threshold = sorted[pos - 1];
    return rule;
}

}  // namespace

Dataset generate_synthetic(int num_classes, int feature_dim, int n_per_class,
                           double cluster_sep, std::uint64_t seed) {
    return generate_synthetic_split(num_classes, feature_dim, n_per_class, cluster_sep,
                                    seed, seed);
}

Dataset generate_synthetic_split(int num_classes, int feature_dim, int n_per_class,
                                 double cluster_sep, std::uint64_t class_seed,
                                 std::uint64_t noise_seed) {
    if (num_classes < 2) throw std::invalid_argument("generate_synthetic: need at least 2 classes");
    if (feature_dim < 4) throw std::invalid_argument("generate_synthetic: feature_dim must be >= 4");
    if (n_per_class < 10) throw std::invalid_argument("generate_synthetic: n_per_class must be >= 10");
    if (!(cluster_sep > 0.0)) throw std::invalid_argument("generate_synthetic: cluster_sep must be positive");

    Dataset data;
    data.num_classes = num_classes;
    data.feature_dim = feature_dim;
    data.samples.reserve(static_cast<std::size_t>(num_classes) * n_per_class);
    const std::vector<std::vector<double>> dirs =
        class_directions(num_classes, feature_dim, class_seed);
    for (int c = 0; c < num_classes; ++c) {
        const std::vector<double>& mu = dirs[static_cast<std::size_t>(c)];
        Rng rng(mix_seed(noise_seed, 2000 + static_cast<std::uint64_t>(c)));
        for (int k = 0; k < n_per_class; ++k) {
            Sample s;
            s.features.resize(static_cast<std::size_t>(feature_dim));
            for (int j = 0; j < feature_dim; ++j) {
                s.features[static_cast<std::size_t>(j)] =
                    cluster_sep * mu[static_cast<std::size_t>(j)] + rng.gaussian();
            }
            s.observed_label = c;
            s.ground_truth = c;
            s.poison_tag = PoisonTag::Clean;
            data.samples.push_back(std::move(s));
        }
    }
    return data;
}

std::vector<double> plant_trigger(std::span<const double> features,
                                  const TriggerSpec& spec, Rng& rng) {
    const std::size_t d = features.size();
    spec.validate(static_cast<int>(d));

    // Full-strength trigger image first; block masking and opacity are
    // uniform modifiers applied on top for every kind.
    std::vector<double> full(features.begin(), features.end());
    switch (spec.kind) {
        case TriggerKind::Patch:
            for (std::size_t k = 0; k < spec.patch_coords.size(); ++k) {
                full[static_cast<std::size_t>(spec.patch_coords[k])] = spec.patch_values[k];
            }
            break;
        case TriggerKind::Blend:
            for (std::size_t j = 0; j < d; ++j) {
                full[j] = (1.0 - spec.alpha) * features[j] + spec.alpha * spec.pattern[j];
            }
            break;
        case TriggerKind::Sinusoid:
            for (std::size_t j = 0; j < d; ++j) {
                full[j] = features[j] + spec.amplitude *
                          std::sin(2.0 * std::numbers::pi * spec.frequency *
                                   static_cast<double>(j) / static_cast<double>(d));
            }
            break;
    }

    // 16 equal contiguous blocks over [0, d), last block padded.
    constexpr std::size_t kNumBlocks = 16;
    bool masked[kNumBlocks] = {};
    if (spec.rand_patch_mask) {
        for (std::size_t b = 0; b < kNumBlocks; ++b) {
            masked[b] = rng.uniform() < *spec.rand_patch_mask;
        }
    }
    const std::size_t block_len = (d + kNumBlocks - 1) / kNumBlocks;

    std::vector<double> out(d);
    for (std::size_t j = 0; j < d; ++j) {
        if (masked[j / block_len]) {
            out[j] = features[j];
        } else {
            out[j] = (1.0 - spec.opacity) * features[j] + spec.opacity * full[j];
        }
    }
    return out;
}

double clean_image_flip_threshold(const Dataset& data, const AttackConfig& cfg) {
    return compute_flip_rule(data, cfg).threshold;
}

std::vector<double> clean_image_direction(const AttackConfig& cfg, int feature_dim) {
    if (!cfg.flip_direction.empty()) return cfg.flip_direction;
    return default_flip_direction(feature_dim, cfg.seed);
}

Dataset apply_attack(const Dataset& clean, const AttackConfig& cfg) {
    clean.validate();
    cfg.validate(clean.num_classes, clean.feature_dim);

    Dataset out = clean;
    const std::size_t n = out.samples.size();
    Rng select_rng(mix_seed(cfg.seed, 0x5e1ec7));

    switch (cfg.family) {
        case AttackFamily::LabelPoison: {
            const std::size_t count = static_cast<std::size_t>(cfg.poison_rate * static_cast<double>(n));
            if (count == 0) throw std::runtime_error("attack: poison count is zero");
            std::vector<int> eligible;
            for (std::size_t i = 0; i < n; ++i) {
                if (out.samples[i].ground_truth != cfg.target_class) eligible.push_back(static_cast<int>(i));
            }
            if (eligible.size() < count)
                throw std::runtime_error("attack: only " + std::to_string(eligible.size()) +
                                         " eligible samples for " + std::to_string(count) + " poisons");
            select_rng.shuffle(eligible);
            eligible.resize(count);
            std::sort(eligible.begin(), eligible.end());
            for (int idx : eligible) {
                Sample& s = out.samples[static_cast<std::size_t>(idx)];
                Rng trig_rng(mix_seed(cfg.seed, 0x747200 + static_cast<std::uint64_t>(idx)));
                s.features = plant_trigger(s.features, cfg.trigger, trig_rng);
                s.observed_label = cfg.target_class;
                s.poison_tag = PoisonTag::LabelPoison;
            }
            break;
        }
        case AttackFamily::CleanLabel: {
            std::vector<int> eligible;
            for (std::size_t i = 0; i < n; ++i) {
                if (out.samples[i].ground_truth == cfg.target_class) eligible.push_back(static_cast<int>(i));
            }
            const std::size_t count =
                static_cast<std::size_t>(cfg.poison_rate * static_cast<double>(eligible.size()));
            if (count == 0) throw std::runtime_error("attack: poison count is zero");
            if (eligible.size() < count)
                throw std::runtime_error("attack: insufficient eligible samples");
            select_rng.shuffle(eligible);
            eligible.resize(count);
            std::sort(eligible.begin(), eligible.end());
            for (int idx : eligible) {
                Sample& s = out.samples[static_cast<std::size_t>(idx)];
                Rng trig_rng(mix_seed(cfg.seed, 0x747200 + static_cast<std::uint64_t>(idx)));
                s.features = plant_trigger(s.features, cfg.trigger, trig_rng);
                s.poison_tag = PoisonTag::CleanLabelPoison;
            }
            break;
        }
        case AttackFamily::CleanImage: {
            const std::size_t cap = static_cast<std::size_t>(cfg.poison_rate * static_cast<double>(n));
            if (cap == 0) throw std::runtime_error("attack: poison count is zero");
            const FlipRule rule = compute_flip_rule(out, cfg);
            std::vector<int> selected;
            for (std::size_t k = 0; k < rule.eligible.size(); ++k) {
                if (rule.projections[k] > rule.threshold) selected.push_back(static_cast<int>(k));
            }
            if (selected.size() > cap) {
                // keep the strongest projections; ties resolved toward lower index
                std::stable_sort(selected.begin(), selected.end(), [&](int a, int b) {
                    return rule.projections[static_cast<std::size_t>(a)] >
                           rule.projections[static_cast<std::size_t>(b)];
                });
                selected.resize(cap);
            }
            if (selected.empty()) throw std::runtime_error("attack: clean-image flip selected no samples");
            for (int k : selected) {
                Sample& s = out.samples[static_cast<std::size_t>(rule.eligible[static_cast<std::size_t>(k)])];
                s.observed_label = cfg.target_class;
                s.poison_tag = PoisonTag::CleanImagePoison;
            }
            break;
        }
    }
    return out;
}

void save_dataset(const Dataset& data, const std::filesystem::path& path) {
    nlohmann::ordered_json j;
    j["C"] = data.num_classes;
    j["d"] = data.feature_dim;
    j["N"] = data.samples.size();
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const Sample& s : data.samples) {
        nlohmann::ordered_json r;
        r["features"] = s.features;
        r["observed_label"] = s.observed_label;
        r["ground_truth"] = s.ground_truth;
        r["poison_tag"] = to_string(s.poison_tag);
        rows.push_back(std::move(r));
    }
    j["samples"] = std::move(rows);
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << '\n';
}

Dataset load_dataset(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    nlohmann::json j = nlohmann::json::parse(in);
    Dataset data;
    data.num_classes = j.at("C").get<int>();
    data.feature_dim = j.at("d").get<int>();
    for (const auto& r : j.at("samples")) {
        Sample s;
        s.features = r.at("features").get<std::vector<double>>();
        s.observed_label = r.at("observed_label").get<int>();
        s.ground_truth = r.at("ground_truth").get<int>();
        s.poison_tag = poison_tag_from_string(r.at("poison_tag").get<std::string>());
        data.samples.push_back(std::move(s));
    }
    data.validate();
    if (data.samples.size() != j.at("N").get<std::size_t>())
        throw std::runtime_error("dataset header N mismatch");
    return data;
}

}  // namespace poisonlab
