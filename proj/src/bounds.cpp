#include "poisonlab/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "poisonlab/rng.hpp"

namespace poisonlab {

double delta_term(double eta, long long n, double c) {
    if (!(eta > 0.0 && eta <= 1.0)) throw std::invalid_argument("delta_term: eta must be in (0,1]");
    if (n < 1) throw std::invalid_argument("delta_term: N must be >= 1");
    if (!(c > 0.0)) throw std::invalid_argument("delta_term: c must be positive");
    return c * std::sqrt(std::log(1.0 / eta) / static_cast<double>(n));
}

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

double chernoff_failure(double pr, long long n, double gamma, double miss) {
    // vacuous when the slack does not exceed the miss rate
    if (!(gamma > miss)) return 1.0;
    const double mean = pr * static_cast<double>(n);
    const double diff = gamma - miss;
    return clamp01(std::exp(-mean * diff * diff / (2.0 * (1.0 - miss))));
}

}  // namespace

double label_poison_bound(const BoundParams& p) {
    if (!(p.pr > 0.0 && p.pr < 1.0)) throw std::invalid_argument("bound: pr must be in (0,1)");
    if (p.alpha_p < 0.0 || p.alpha_p >= 1.0) throw std::invalid_argument("bound: alpha_p must be in [0,1)");
    return chernoff_failure(p.pr, p.n, p.gamma, p.alpha_p);
}

double label_poison_bound_calibrated(const BoundParams& p) {
    if (!(p.pr > 0.0 && p.pr < 1.0)) throw std::invalid_argument("bound: pr must be in (0,1)");
    const double miss = p.epsilon_cal + delta_term(p.eta, p.n, p.delta_c);
    if (!(p.gamma > miss) || p.epsilon_cal >= 1.0) return 1.0;
    const double mean = p.pr * static_cast<double>(p.n);
    const double diff = p.gamma - miss;
    return clamp01(std::exp(-mean * diff * diff / (2.0 * (1.0 - p.epsilon_cal))));
}

double clean_label_bound(const BoundParams& p) {
    if (!(p.pr > 0.0 && p.pr < 1.0)) throw std::invalid_argument("bound: pr must be in (0,1)");
    if (!(p.p_t > 0.0 && p.p_t <= 1.0)) throw std::invalid_argument("bound: p_t must be in (0,1]");
    // beta_p <= 1 - p_t; the denominator 2*p_t comes from substituting it
    if (!(p.gamma > 1.0 - p.p_t)) return 1.0;
    const double mean = p.pr * static_cast<double>(p.n);
    const double diff = p.gamma - (1.0 - p.p_t);
    return clamp01(std::exp(-mean * diff * diff / (2.0 * p.p_t)));
}

double threshold_identity_pc(double pr, double p_p) {
    if (!(pr > 0.0 && pr < 1.0)) throw std::invalid_argument("threshold_identity_pc: pr must be in (0,1)");
    return clamp01(pr * (1.0 - p_p) / (1.0 - pr));
}

McEstimate mc_tail_estimate(double pr, long long n, double p_p, double gamma,
                            long long trials, std::uint64_t seed) {
    if (trials < 1) throw std::invalid_argument("mc_tail_estimate: trials must be >= 1");
    if (!(pr > 0.0 && pr < 1.0)) throw std::invalid_argument("mc_tail_estimate: pr must be in (0,1)");
    if (p_p < 0.0 || p_p > 1.0) throw std::invalid_argument("mc_tail_estimate: p_p must be in [0,1]");

    const long long k = static_cast<long long>(pr * static_cast<double>(n));
    const double threshold = (1.0 - gamma) * pr * static_cast<double>(n);

    Rng rng(mix_seed(seed, 7000));
    // Bernoulli draws compared in integer space; p >= 1 always succeeds.
    const bool always = p_p >= 1.0;
    const std::uint64_t cut =
        always ? 0 : static_cast<std::uint64_t>(p_p * 18446744073709551616.0 /* 2^64 */);

    long long hits = 0;
    for (long long t = 0; t < trials; ++t) {
        long long successes = 0;
        for (long long i = 0; i < k; ++i) {
            if (always || rng.next_u64() < cut) ++successes;
        }
        if (static_cast<double>(successes) <= threshold) ++hits;
    }
    McEstimate est;
    est.estimate = static_cast<double>(hits) / static_cast<double>(trials);
    est.std_error = std::sqrt(est.estimate * (1.0 - est.estimate) / static_cast<double>(trials));
    return est;
}

double empirical_detection_rate(std::span<const EntropyRecord> records,
                                std::span<const PoisonTag> tags, double pr,
                                DetectionAxis axis) {
    if (records.size() != tags.size())
        throw std::invalid_argument("empirical_detection_rate: records/tags size mismatch");
    const PoisonTag wanted =
        axis == DetectionAxis::GuideTop ? PoisonTag::LabelPoison : PoisonTag::CleanLabelPoison;
    const bool any = std::any_of(tags.begin(), tags.end(),
                                 [&](PoisonTag t) { return t == wanted; });
    if (!any) throw std::runtime_error("empirical_detection_rate: no poisoned samples present");

    const std::size_t k =
        static_cast<std::size_t>(pr * static_cast<double>(records.size()));
    if (k == 0) throw std::invalid_argument("empirical_detection_rate: flagged set is empty");

    std::vector<std::size_t> order(records.size());
    std::iota(order.begin(), order.end(), 0);
    if (axis == DetectionAxis::GuideTop) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return records[a].s_clip > records[b].s_clip;
        });
    } else {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return records[a].s_model < records[b].s_model;
        });
    }
    std::size_t found = 0;
    for (std::size_t i = 0; i < k; ++i) {
        if (tags[static_cast<std::size_t>(records[order[i]].sample_index)] == wanted) ++found;
    }
    return static_cast<double>(found) / static_cast<double>(k);
}

}  // namespace poisonlab
