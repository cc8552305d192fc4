// pml: dataset generation, training, evaluation, and experiment presets
// for pose-aware descriptor learning on procedural RGB-D views.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "pmlearn/config.hpp"
#include "pmlearn/dataset.hpp"
#include "pmlearn/embed.hpp"
#include "pmlearn/eval.hpp"
#include "pmlearn/knn.hpp"
#include "pmlearn/train.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct GenOpts {
    std::string config;
    std::string out = ".";
    std::int64_t seed = -1;
};

struct TrainOpts {
    std::string config;
    std::string data = ".";
    std::string out = "net.pmnet";
    std::string report;
    std::int64_t seed = -1;
};

struct EvalOpts {
    std::string checkpoint;
    std::string data = ".";
    std::string out = "eval.csv";
};

struct PresetOpts {
    std::string name;
    std::string out = ".";
};

pml::Config load(const std::string& path, std::int64_t seed) {
    pml::Config cfg = pml::load_config(path);
    if (seed >= 0) {
        cfg.dataset.seed = static_cast<std::uint64_t>(seed);
        cfg.train.seed = static_cast<std::uint64_t>(seed);
    }
    cfg.validate();
    return cfg;
}

// A missing background pool directory is materialized with procedural
// stand-in scenes so real-background runs are self-contained.
void ensure_pool(const pml::Config& cfg) {
    const std::string& dir = cfg.dataset.background_pool_dir;
    if (dir.empty() || fs::exists(dir)) return;
    pml::generate_background_pool(dir, 256, 128,
                                  pml::mix_seed(cfg.dataset.seed, 0x706f6f6cULL));
    std::cout << "generated procedural background pool in " << dir << "\n";
}

int cmd_gen(const GenOpts& opts) {
    pml::Config cfg = load(opts.config, opts.seed);
    ensure_pool(cfg);
    fs::create_directories(opts.out);
    auto templates = pml::build_template_set(cfg.dataset);
    auto train_set = pml::build_training_set(cfg.dataset, templates);
    auto test_set = pml::build_test_set(cfg.dataset, templates, train_set);
    if (test_set.samples.empty()) {
        std::cout << "warning: real_fraction leaves the test set empty\n";
    }
    pml::save_set(templates, (fs::path(opts.out) / "templates.pmds").string());
    pml::save_set(train_set, (fs::path(opts.out) / "train.pmds").string());
    pml::save_set(test_set, (fs::path(opts.out) / "test.pmds").string());
    std::ofstream man((fs::path(opts.out) / "manifest.txt").string());
    man << pml::manifest_text(templates) << pml::manifest_text(train_set)
        << pml::manifest_text(test_set);
    std::cout << "templates: " << templates.samples.size()
              << "\ntrain: " << train_set.samples.size()
              << "\ntest: " << test_set.samples.size() << "\n";
    return 0;
}

int cmd_train(const TrainOpts& opts) {
    pml::Config cfg = load(opts.config, opts.seed);
    auto need = [&](const char* name) {
        fs::path p = fs::path(opts.data) / name;
        if (!fs::exists(p)) {
            throw pml::config_error("missing dataset file: " + p.string());
        }
        return pml::load_set(p.string());
    };
    auto templates = need("templates.pmds");
    auto train_set = need("train.pmds");
    auto test_set = need("test.pmds");

    pml::BackgroundPool pool;
    if (cfg.train.background.kind == pml::NoiseKind::real) {
        ensure_pool(cfg);
        if (cfg.dataset.background_pool_dir.empty()) {
            throw pml::config_error(
                "noise_kind real requires background_pool_dir");
        }
        pool = pml::load_background_pool(cfg.dataset.background_pool_dir);
        cfg.train.background.pool = &pool;
    }

    pml::EmbeddingNet net(cfg.dataset.patch_size,
                          pml::channel_count(pml::modality_mask(cfg.train.modality)),
                          cfg.descriptor_dim);
    net.modality_hint = cfg.train.modality;
    net.init_params(cfg.train.seed);
    auto report = pml::train(net, train_set, templates, test_set, cfg.train,
                             [](const pml::EpochStats& e) {
                                 std::cout << "epoch " << e.epoch << " loss "
                                           << e.loss << " class_rate "
                                           << e.class_rate << " mean_err "
                                           << e.mean_ang_err_deg << "\n";
                             });
    net.save(opts.out);
    std::string report_path =
        opts.report.empty() ? opts.out + ".report.csv" : opts.report;
    pml::write_report_csv(report_path, report);
    std::cout << "checkpoint: " << opts.out << "\nreport: " << report_path
              << "\n";
    return 0;
}

int cmd_eval(const EvalOpts& opts) {
    if (!fs::exists(opts.checkpoint)) {
        throw pml::config_error("missing checkpoint: " + opts.checkpoint);
    }
    pml::EmbeddingNet net = pml::EmbeddingNet::load(opts.checkpoint);
    auto templates = pml::load_set((fs::path(opts.data) / "templates.pmds").string());
    auto test_set = pml::load_set((fs::path(opts.data) / "test.pmds").string());

    // The checkpoint records which planes it was trained on (several
    // modalities share a channel count, so counting is not enough).
    pml::Modality modality = net.modality_hint;

    auto template_inputs = pml::assemble_set(templates, modality);
    auto test_inputs = pml::assemble_set(test_set, modality);
    auto db = pml::build_db(net, template_inputs);
    pml::EvalResult r = pml::evaluate(net, db, test_inputs);
    std::cout << pml::eval_table({{"eval", r}});
    pml::write_eval_csv(opts.out, {{"eval", r}});
    return 0;
}

int cmd_preset(const PresetOpts& opts) {
    auto configs = pml::preset_configs(opts.name);
    fs::create_directories(opts.out);
    for (const auto& [variant, cfg] : configs) {
        fs::path p = fs::path(opts.out) / (opts.name + "_" + variant + ".cfg");
        std::ofstream os(p);
        os << pml::emit_config(
            cfg, opts.name + " / " + variant +
                     " (object counts desk-scaled from the original setups)");
        std::cout << p.string() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"pose-aware descriptor learning over procedural RGB-D views"};
    app.require_subcommand(1);

    GenOpts gen;
    auto* sg = app.add_subcommand("gen", "build template/train/test sets");
    sg->add_option("--config", gen.config, "config file")->required();
    sg->add_option("--out", gen.out, "output directory");
    sg->add_option("--seed", gen.seed, "override config seed");

    TrainOpts tr;
    auto* st = app.add_subcommand("train", "train an embedding network");
    st->add_option("--config", tr.config, "config file")->required();
    st->add_option("--data", tr.data, "dataset directory");
    st->add_option("--out", tr.out, "checkpoint path");
    st->add_option("--report", tr.report, "per-epoch CSV path");
    st->add_option("--seed", tr.seed, "override config seed");

    EvalOpts ev;
    auto* se = app.add_subcommand("eval", "evaluate a checkpoint");
    se->add_option("--checkpoint", ev.checkpoint, "checkpoint path")->required();
    se->add_option("--data", ev.data, "dataset directory");
    se->add_option("--out", ev.out, "metrics CSV path");

    PresetOpts pr;
    auto* sp = app.add_subcommand("preset", "materialize experiment configs");
    sp->add_option("--preset", pr.name, "preset name")->required();
    sp->add_option("--out", pr.out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? kExitConfig : 0;
    }

    try {
        if (*sg) return cmd_gen(gen);
        if (*st) return cmd_train(tr);
        if (*se) return cmd_eval(ev);
        if (*sp) return cmd_preset(pr);
    } catch (const pml::training_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitNumeric;
    } catch (const pml::error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    }
    return kExitConfig;
}
