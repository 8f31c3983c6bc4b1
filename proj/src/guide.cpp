#include "poisonlab/guide.hpp"

#include <cmath>
#include <stdexcept>

#include "poisonlab/classifier.hpp"

namespace poisonlab {

void GuideModel::validate() const {
    if (num_classes < 2) throw std::invalid_argument("guide: need at least 2 classes");
    if (!(confidence_margin >= 0.0)) throw std::invalid_argument("guide: confidence_margin must be >= 0");
    if (gumbel_scale < 0.0) throw std::invalid_argument("guide: gumbel_scale must be >= 0");
    if (backdoor && (backdoor->target < 0 || backdoor->target >= num_classes))
        throw std::invalid_argument("guide: backdoor target out of range");
}

double sample_gumbel(Rng& rng, double scale) {
    if (scale < 0.0) throw std::invalid_argument("sample_gumbel: scale must be >= 0");
    if (scale == 0.0) return 0.0;
    const double u = rng.uniform_open();
    return -scale * std::log(-std::log(u));
}

std::vector<double> guide_logits(const GuideModel& guide, const Sample& sample,
                                 int sample_index, bool trigger_present) {
    guide.validate();
    if (sample.ground_truth < 0 || sample.ground_truth >= guide.num_classes)
        throw std::invalid_argument("guide_logits: ground truth out of range");

    std::vector<double> logits(static_cast<std::size_t>(guide.num_classes), 0.0);
    if (guide.backdoor && trigger_present) {
        logits[static_cast<std::size_t>(guide.backdoor->target)] = guide.backdoor->margin;
    } else {
        logits[static_cast<std::size_t>(sample.ground_truth)] = guide.confidence_margin;
    }
    if (guide.gumbel_scale > 0.0) {
        Rng rng(mix_seed(guide.seed, 5000 + static_cast<std::uint64_t>(sample_index)));
        for (double& z : logits) z += sample_gumbel(rng, guide.gumbel_scale);
    }
    return logits;
}

double measure_guide_accuracy(const GuideModel& guide, const Dataset& data) {
    if (data.samples.empty()) throw std::invalid_argument("measure_guide_accuracy: empty dataset");
    std::size_t hits = 0;
    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const std::vector<double> z = guide_logits(guide, data.samples[i], static_cast<int>(i), false);
        int best = 0;
        for (std::size_t j = 1; j < z.size(); ++j) {
            if (z[j] > z[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
        }
        if (best == data.samples[i].ground_truth) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(data.samples.size());
}

double measure_ece(const GuideModel& guide, const Dataset& data, int num_bins) {
    if (num_bins < 1) throw std::invalid_argument("measure_ece: num_bins must be >= 1");
    if (data.samples.empty()) throw std::invalid_argument("measure_ece: empty dataset");

    std::vector<double> bin_conf(static_cast<std::size_t>(num_bins), 0.0);
    std::vector<double> bin_acc(static_cast<std::size_t>(num_bins), 0.0);
    std::vector<std::size_t> bin_count(static_cast<std::size_t>(num_bins), 0);

    for (std::size_t i = 0; i < data.samples.size(); ++i) {
        const std::vector<double> z = guide_logits(guide, data.samples[i], static_cast<int>(i), false);
        const std::vector<double> p = softmax(z);
        int best = 0;
        for (std::size_t j = 1; j < p.size(); ++j) {
            if (p[j] > p[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
        }
        const double conf = p[static_cast<std::size_t>(best)];
        std::size_t bin = static_cast<std::size_t>(conf * num_bins);
        if (bin >= static_cast<std::size_t>(num_bins)) bin = static_cast<std::size_t>(num_bins) - 1;
        bin_conf[bin] += conf;
        bin_acc[bin] += (best == data.samples[i].ground_truth) ? 1.0 : 0.0;
        bin_count[bin] += 1;
    }

    const double n = static_cast<double>(data.samples.size());
    double ece = 0.0;
    for (int b = 0; b < num_bins; ++b) {
        const std::size_t c = bin_count[static_cast<std::size_t>(b)];
        if (c == 0) continue;
        const double acc = bin_acc[static_cast<std::size_t>(b)] / static_cast<double>(c);
        const double conf = bin_conf[static_cast<std::size_t>(b)] / static_cast<double>(c);
        ece += (static_cast<double>(c) / n) * std::abs(acc - conf);
    }
    return ece;
}

}  // namespace poisonlab
