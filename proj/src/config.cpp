#include "poisonlab/config.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace poisonlab {

using nlohmann::json;

namespace {

template <typename T>
void read_if(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

TriggerSpec parse_trigger(const json& j) {
    TriggerSpec t;
    if (j.contains("kind")) t.kind = trigger_kind_from_string(j.at("kind").get<std::string>());
    read_if(j, "patch_coords", t.patch_coords);
    read_if(j, "patch_values", t.patch_values);
    read_if(j, "pattern", t.pattern);
    read_if(j, "alpha", t.alpha);
    read_if(j, "amplitude", t.amplitude);
    read_if(j, "frequency", t.frequency);
    if (j.contains("rand_patch_mask") && !j.at("rand_patch_mask").is_null())
        t.rand_patch_mask = j.at("rand_patch_mask").get<double>();
    read_if(j, "opacity", t.opacity);
    return t;
}

}  // namespace

ExperimentConfig default_config() {
    ExperimentConfig cfg;
    cfg.attack.family = AttackFamily::LabelPoison;
    cfg.attack.target_class = 0;
    cfg.attack.poison_rate = 0.05;
    cfg.attack.trigger.kind = TriggerKind::Patch;
    cfg.attack.trigger.patch_coords = {0, 1, 2, 3};
    cfg.attack.trigger.patch_values = {4.0, 4.0, 4.0, 4.0};
    cfg.attack.seed = 2;
    cfg.guide.num_classes = cfg.dataset.num_classes;
    cfg.guide.confidence_margin = 2.0;
    cfg.guide.gumbel_scale = 0.0;
    cfg.guide.seed = 4;
    cfg.unlearn.seed = 5;
    return cfg;
}

void ExperimentConfig::validate() const {
    if (dataset.num_classes < 2) throw std::invalid_argument("config: num_classes must be >= 2");
    if (dataset.feature_dim < 4) throw std::invalid_argument("config: feature_dim must be >= 4");
    if (dataset.n_per_class < 10) throw std::invalid_argument("config: n_per_class must be >= 10");
    if (!(dataset.cluster_sep > 0.0)) throw std::invalid_argument("config: cluster_sep must be positive");
    attack.validate(dataset.num_classes, dataset.feature_dim);
    victim.train.validate();
    if (victim.snapshot_epoch < 0 || victim.snapshot_epoch > victim.train.epochs)
        throw std::invalid_argument("config: snapshot_epoch must be within the training run");
    for (int h : victim.hidden_dims) {
        if (h < 1) throw std::invalid_argument("config: hidden dims must be positive");
    }
    if (guide.num_classes != dataset.num_classes)
        throw std::invalid_argument("config: guide num_classes must match dataset");
    guide.validate();
    if (guide.backdoor) guide.backdoor->trigger.validate(dataset.feature_dim);
    split.validate();
    unlearn.validate();
    if (eval.test_size < dataset.num_classes * 10)
        throw std::invalid_argument("config: test_size too small");
}

ExperimentConfig parse_config(const std::string& json_text) {
    json j = json::parse(json_text);
    ExperimentConfig cfg = default_config();

    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        read_if(d, "num_classes", cfg.dataset.num_classes);
        read_if(d, "feature_dim", cfg.dataset.feature_dim);
        read_if(d, "n_per_class", cfg.dataset.n_per_class);
        read_if(d, "cluster_sep", cfg.dataset.cluster_sep);
        read_if(d, "seed", cfg.dataset.seed);
    }
    if (j.contains("attack")) {
        const json& a = j.at("attack");
        if (a.contains("family"))
            cfg.attack.family = attack_family_from_string(a.at("family").get<std::string>());
        read_if(a, "target_class", cfg.attack.target_class);
        read_if(a, "poison_rate", cfg.attack.poison_rate);
        if (a.contains("trigger")) cfg.attack.trigger = parse_trigger(a.at("trigger"));
        read_if(a, "flip_direction", cfg.attack.flip_direction);
        read_if(a, "flip_quantile", cfg.attack.flip_quantile);
        read_if(a, "seed", cfg.attack.seed);
    }
    if (j.contains("victim")) {
        const json& v = j.at("victim");
        read_if(v, "hidden_dims", cfg.victim.hidden_dims);
        read_if(v, "snapshot_epoch", cfg.victim.snapshot_epoch);
        if (v.contains("train")) {
            const json& t = v.at("train");
            read_if(t, "learning_rate", cfg.victim.train.learning_rate);
            read_if(t, "weight_decay", cfg.victim.train.weight_decay);
            read_if(t, "batch_size", cfg.victim.train.batch_size);
            read_if(t, "epochs", cfg.victim.train.epochs);
            read_if(t, "seed", cfg.victim.train.seed);
        }
    }
    if (j.contains("guide")) {
        const json& g = j.at("guide");
        read_if(g, "confidence_margin", cfg.guide.confidence_margin);
        read_if(g, "gumbel_scale", cfg.guide.gumbel_scale);
        read_if(g, "seed", cfg.guide.seed);
        if (g.contains("backdoor") && !g.at("backdoor").is_null()) {
            const json& b = g.at("backdoor");
            GuideBackdoor bd;
            bd.trigger = parse_trigger(b.at("trigger"));
            bd.target = b.at("target").get<int>();
            read_if(b, "margin", bd.margin);
            cfg.guide.backdoor = std::move(bd);
        }
    }
    cfg.guide.num_classes = cfg.dataset.num_classes;
    if (j.contains("split")) {
        const json& s = j.at("split");
        read_if(s, "sigma1", cfg.split.sigma1);
        read_if(s, "sigma2", cfg.split.sigma2);
    }
    cfg.split.intermediate_epoch = cfg.victim.snapshot_epoch;
    if (j.contains("unlearn")) {
        const json& u = j.at("unlearn");
        read_if(u, "lambda_un", cfg.unlearn.lambda_un);
        read_if(u, "lambda_distill", cfg.unlearn.lambda_distill);
        read_if(u, "epsilon", cfg.unlearn.epsilon);
        read_if(u, "max_epochs", cfg.unlearn.max_epochs);
        if (u.contains("ca_floor") && !u.at("ca_floor").is_null())
            cfg.unlearn.ca_floor = u.at("ca_floor").get<double>();
        read_if(u, "learning_rate", cfg.unlearn.learning_rate);
        read_if(u, "weight_decay", cfg.unlearn.weight_decay);
        read_if(u, "batch_size", cfg.unlearn.batch_size);
        read_if(u, "seed", cfg.unlearn.seed);
    }
    if (j.contains("eval")) {
        const json& e = j.at("eval");
        read_if(e, "test_size", cfg.eval.test_size);
        read_if(e, "seed", cfg.eval.seed);
    }
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    read_if(j, "export_guide_logits", cfg.export_guide_logits);

    cfg.validate();
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read config " + path.string());
    std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return parse_config(text);
}

std::string apply_override(std::string json_text, const std::string& assignment) {
    const std::size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw std::invalid_argument("override must look like key.path=value: " + assignment);
    std::string key = assignment.substr(0, eq);
    const std::string value = assignment.substr(eq + 1);

    std::string pointer = "/";
    for (char ch : key) pointer += (ch == '.') ? '/' : ch;

    json j = json::parse(json_text);
    json parsed;
    try {
        parsed = json::parse(value);
    } catch (const json::parse_error&) {
        parsed = value;  // bare strings stay strings
    }
    j[json::json_pointer(pointer)] = parsed;
    return j.dump();
}

void reseed(ExperimentConfig& cfg, std::uint64_t master_seed) {
    cfg.dataset.seed = master_seed;
    cfg.attack.seed = master_seed + 1;
    cfg.victim.train.seed = master_seed + 2;
    cfg.guide.seed = master_seed + 3;
    cfg.unlearn.seed = master_seed + 4;
    cfg.eval.seed = master_seed + 5;
}

}  // namespace poisonlab
