#include "gda/pipeline/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>

using nlohmann::json;

namespace gda::pipe {

namespace {

json family_json(const ganzoo::GeneratorFamily& f) {
    return json{{"id", f.family_id},
                {"arch", ganzoo::to_string(f.arch)},
                {"loss", ganzoo::to_string(f.loss)},
                {"epochs", f.train.epochs},
                {"batch", f.train.batch},
                {"zdim", f.train.zdim},
                {"lr_g", f.train.lr_g},
                {"lr_d", f.train.lr_d},
                {"beta1", f.train.beta1},
                {"n_critic", f.train.n_critic},
                {"clip", f.train.clip},
                {"collapse_std", f.train.collapse_std}};
}

ganzoo::GeneratorFamily family_from(const json& j) {
    ganzoo::GeneratorFamily f;
    f.family_id = j.at("id").get<std::string>();
    f.arch = ganzoo::arch_from_string(j.at("arch").get<std::string>());
    f.loss = ganzoo::loss_from_string(j.at("loss").get<std::string>());
    f.train.epochs = j.at("epochs").get<int>();
    f.train.batch = j.at("batch").get<int>();
    f.train.zdim = j.at("zdim").get<int>();
    f.train.lr_g = j.at("lr_g").get<float>();
    f.train.lr_d = j.at("lr_d").get<float>();
    f.train.beta1 = j.at("beta1").get<float>();
    f.train.n_critic = j.at("n_critic").get<int>();
    f.train.clip = j.at("clip").get<float>();
    f.train.collapse_std = j.value("collapse_std", 0.01f);
    return f;
}

} // namespace

void ExperimentConfig::validate() const {
    try {
        check(!families.empty(), "config: no generator families");
        ganzoo::check_pairwise_distinct(families);
        check(!train_seeds.empty(), "config: no train seeds");
        for (int s : train_seeds)
            check(s != crossseed_seed, "config: crossseed seed " + std::to_string(crossseed_seed) +
                                           " is also a train seed");
        {
            std::set<int> uniq(train_seeds.begin(), train_seeds.end());
            check(uniq.size() == train_seeds.size(), "config: duplicate train seed");
        }
        for (const auto& fam : finetune_families) {
            bool found = false;
            for (const auto& f : families) found = found || f.family_id == fam;
            check(found, "config: finetune family '" + fam + "' is not a configured family");
        }
        check(finetune_families.empty() || finetune_extra_epochs > 0,
              "config: finetune_extra_epochs must be positive");
        check(data.per_seed_images > 0 && data.crossseed_images > 0,
              "config: image counts must be positive");
        check(data.closed_test_fraction > 0.0 && data.closed_test_fraction < 1.0,
              "config: closed_test_fraction must be in (0,1)");
        check(fen.tau > 0.0f, "config: tau must be positive");
        check(height > 0 && width > 0 && channels == 3, "config: expect HxWx3 images");
    } catch (const Error& e) {
        throw ConfigError(e.what());
    }
}

std::string ExperimentConfig::to_json() const {
    json j;
    j["schema_version"] = kSchemaVersion;
    j["name"] = name;
    j["determinism_seed"] = determinism_seed;
    j["threads"] = threads;
    j["image"] = {{"h", height}, {"w", width}, {"c", channels}};
    j["data"] = {{"real_dir", data.real_dir},
                 {"synth_count", data.synth_count},
                 {"per_seed_images", data.per_seed_images},
                 {"crossseed_images", data.crossseed_images},
                 {"finetune_images", data.finetune_images},
                 {"real_train", data.real_train},
                 {"real_closed", data.real_closed},
                 {"real_crossseed", data.real_crossseed},
                 {"real_finetune", data.real_finetune},
                 {"closed_test_fraction", data.closed_test_fraction}};
    json fams = json::array();
    for (const auto& f : families) fams.push_back(family_json(f));
    j["families"] = std::move(fams);
    j["seeds"] = {{"train", train_seeds},
                  {"crossseed", crossseed_seed},
                  {"finetune_families", finetune_families},
                  {"finetune_extra_epochs", finetune_extra_epochs}};
    j["dae"] = {{"epochs", dae.epochs},
                {"batch", dae.batch},
                {"lr", dae.lr},
                {"noise_sigma", dae.noise_sigma},
                {"target_mae", dae.target_mae},
                {"plateau_patience", dae.plateau_patience}};
    j["fen"] = {{"variant", fen::to_string(fen_variant)},
                {"epochs", fen.epochs},
                {"batch_sources", fen.batch_sources},
                {"lr", fen.lr},
                {"momentum", fen.momentum},
                {"cosine_decay", fen.cosine_decay},
                {"tau", fen.tau},
                {"crop_pad", fen.crop_pad},
                {"flip", fen.flip}};
    j["classifier"] = {{"epochs", clf.epochs}, {"batch", clf.batch}, {"lr", clf.lr}};
    j["cnn"] = {{"epochs", cnn.epochs}, {"batch", cnn.batch}, {"lr", cnn.lr}};
    j["eval"] = {{"run_ablation", run_ablation}, {"tsne_export", tsne_export}};
    return j.dump(2);
}

ExperimentConfig ExperimentConfig::from_json(const std::string& text) {
    ExperimentConfig cfg;
    try {
        json j = json::parse(text);
        check(j.at("schema_version").get<int>() == kSchemaVersion,
              "config: unsupported schema version");
        cfg.name = j.value("name", "experiment");
        cfg.determinism_seed = j.at("determinism_seed").get<uint64_t>();
        cfg.threads = j.value("threads", 0);
        cfg.height = j.at("image").at("h").get<int>();
        cfg.width = j.at("image").at("w").get<int>();
        cfg.channels = j.at("image").at("c").get<int>();
        const json& d = j.at("data");
        cfg.data.real_dir = d.value("real_dir", "");
        cfg.data.synth_count = d.value("synth_count", cfg.data.synth_count);
        cfg.data.per_seed_images = d.at("per_seed_images").get<int>();
        cfg.data.crossseed_images = d.at("crossseed_images").get<int>();
        cfg.data.finetune_images = d.value("finetune_images", 0);
        cfg.data.real_train = d.at("real_train").get<int>();
        cfg.data.real_closed = d.at("real_closed").get<int>();
        cfg.data.real_crossseed = d.at("real_crossseed").get<int>();
        cfg.data.real_finetune = d.value("real_finetune", 0);
        cfg.data.closed_test_fraction = d.at("closed_test_fraction").get<double>();
        cfg.families.clear();
        for (const auto& fj : j.at("families")) cfg.families.push_back(family_from(fj));
        cfg.train_seeds = j.at("seeds").at("train").get<std::vector<int>>();
        cfg.crossseed_seed = j.at("seeds").at("crossseed").get<int>();
        cfg.finetune_families =
            j.at("seeds").value("finetune_families", std::vector<std::string>{});
        cfg.finetune_extra_epochs = j.at("seeds").value("finetune_extra_epochs", 10);
        const json& dj = j.at("dae");
        cfg.dae.epochs = dj.at("epochs").get<int>();
        cfg.dae.batch = dj.at("batch").get<int>();
        cfg.dae.lr = dj.at("lr").get<float>();
        cfg.dae.noise_sigma = dj.at("noise_sigma").get<float>();
        cfg.dae.target_mae = dj.at("target_mae").get<float>();
        cfg.dae.plateau_patience = dj.at("plateau_patience").get<int>();
        const json& fj = j.at("fen");
        cfg.fen_variant = fen::variant_from_string(fj.at("variant").get<std::string>());
        cfg.fen.epochs = fj.at("epochs").get<int>();
        cfg.fen.batch_sources = fj.at("batch_sources").get<int>();
        cfg.fen.lr = fj.at("lr").get<float>();
        cfg.fen.momentum = fj.at("momentum").get<float>();
        cfg.fen.cosine_decay = fj.at("cosine_decay").get<bool>();
        cfg.fen.tau = fj.at("tau").get<float>();
        cfg.fen.crop_pad = fj.at("crop_pad").get<int>();
        cfg.fen.flip = fj.at("flip").get<bool>();
        const json& cj = j.at("classifier");
        cfg.clf.epochs = cj.at("epochs").get<int>();
        cfg.clf.batch = cj.at("batch").get<int>();
        cfg.clf.lr = cj.at("lr").get<float>();
        const json& nj = j.at("cnn");
        cfg.cnn.epochs = nj.at("epochs").get<int>();
        cfg.cnn.batch = nj.at("batch").get<int>();
        cfg.cnn.lr = nj.at("lr").get<float>();
        cfg.run_ablation = j.at("eval").value("run_ablation", false);
        cfg.tsne_export = j.at("eval").value("tsne_export", true);
    } catch (const json::exception& ex) {
        throw ConfigError(std::string("config: parse failure: ") + ex.what());
    }
    // All module seeds derive from the global determinism seed; modules mix
    // their own stream names on top.
    cfg.dae.seed = cfg.determinism_seed;
    cfg.fen.seed = cfg.determinism_seed;
    cfg.clf.seed = cfg.determinism_seed;
    cfg.cnn.seed = cfg.determinism_seed;
    cfg.validate();
    return cfg;
}

void ExperimentConfig::save(const std::string& path) const {
    std::ofstream f(path);
    check(f.good(), "config: cannot write " + path);
    f << to_json() << "\n";
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
    std::ifstream f(path);
    if (!f.good()) throw ConfigError("config: cannot open " + path);
    std::stringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

ExperimentConfig ExperimentConfig::desk() {
    ExperimentConfig cfg;
    cfg.name = "desk";
    cfg.families = ganzoo::default_families();
    for (auto& f : cfg.families) f.train.epochs = 15;
    cfg.dae.epochs = 25;
    cfg.fen.epochs = 30;
    cfg.fen.batch_sources = 125;
    cfg.clf.epochs = 50;
    cfg.cnn.epochs = 25;
    cfg.dae.seed = cfg.determinism_seed;
    cfg.fen.seed = cfg.determinism_seed;
    cfg.clf.seed = cfg.determinism_seed;
    cfg.cnn.seed = cfg.determinism_seed;
    cfg.validate();
    return cfg;
}

ExperimentConfig ExperimentConfig::smoke() {
    ExperimentConfig cfg;
    cfg.name = "smoke";
    auto all = ganzoo::default_families();
    cfg.families = {ganzoo::family_by_id(all, "dcgan"), ganzoo::family_by_id(all, "progan_nn")};
    for (auto& f : cfg.families) f.train.epochs = 5;
    cfg.train_seeds = {1};
    cfg.crossseed_seed = 2;
    cfg.finetune_families = {};
    cfg.data.synth_count = 600;
    cfg.data.per_seed_images = 250;
    cfg.data.crossseed_images = 150;
    cfg.data.finetune_images = 0;
    cfg.data.real_train = 200;
    cfg.data.real_closed = 50;
    cfg.data.real_crossseed = 150;
    cfg.data.real_finetune = 0;
    cfg.dae.epochs = 6;
    cfg.fen.epochs = 8;
    cfg.fen.batch_sources = 60;
    cfg.clf.epochs = 15;
    cfg.cnn.epochs = 8;
    cfg.tsne_export = false;
    cfg.dae.seed = cfg.determinism_seed;
    cfg.fen.seed = cfg.determinism_seed;
    cfg.clf.seed = cfg.determinism_seed;
    cfg.cnn.seed = cfg.determinism_seed;
    cfg.validate();
    return cfg;
}

} // namespace gda::pipe
