// rcdt: dataset generation, training, evaluation and ablation grids.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "rcdt/checkpoint.hpp"
#include "rcdt/errors.hpp"
#include "rcdt/tiling.hpp"
#include "rcdt/trainer.hpp"

namespace fs = std::filesystem;
using namespace rcdt;

namespace {

fs::path data_root(const std::string& flag) {
    if (!flag.empty()) return flag;
    if (const char* env = std::getenv("RCDT_DATA_DIR"); env && *env) return env;
    return "data";
}

struct ConfigArgs {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    std::vector<std::string> sets;
    std::map<std::string, std::string> overrides;
};

void add_config_options(CLI::App* cmd, ConfigArgs& args) {
    cmd->add_option("--config", args.config_path, "key = value config file");
    cmd->add_option("--seed", args.seed, "run seed")->each([&](const std::string&) { args.seed_set = true; });
    cmd->add_option("--set", args.sets, "override as key=value (repeatable)");
    for (const auto& key : config_keys()) {
        if (key == "seed") continue;
        cmd->add_option("--" + key, args.overrides[key], "override config key '" + key + "'");
    }
}

RunConfig resolve_config(const ConfigArgs& args) {
    RunConfig cfg = args.config_path.empty() ? RunConfig{} : load_config(args.config_path);
    for (const auto& [key, value] : args.overrides)
        if (!value.empty()) set_config_value(cfg, key, value);
    for (const auto& kv : args.sets) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
        set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (args.seed_set) cfg.seed = args.seed;
    cfg.validate();
    return cfg;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoull(item));
    if (out.empty()) throw ConfigError("--seeds is empty");
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Relational change detection transformer: data, training, evaluation"};
    app.require_subcommand(1);

    DatasetSpec spec;
    std::string gen_root;
    auto* gen = app.add_subcommand("gen-data", "generate the synthetic bi-temporal dataset");
    gen->add_option("--out", gen_root, "dataset root (default $RCDT_DATA_DIR or ./data)");
    gen->add_option("--seed", spec.seed, "generator seed")->capture_default_str();
    gen->add_option("--train-sources", spec.train_sources, "train source pairs")->capture_default_str();
    gen->add_option("--val-sources", spec.val_sources, "val source pairs")->capture_default_str();
    gen->add_option("--test-sources", spec.test_sources, "test source pairs")->capture_default_str();
    gen->add_option("--source-size", spec.source_size, "source image side")->capture_default_str();
    gen->add_option("--patch", spec.patch, "patch side")->capture_default_str();

    ConfigArgs train_args;
    std::string train_data, train_out;
    auto* tr = app.add_subcommand("train", "train on the train split, select on val");
    add_config_options(tr, train_args);
    tr->add_option("--data", train_data, "dataset root (default $RCDT_DATA_DIR or ./data)");
    tr->add_option("--out", train_out, "run directory (default runs/seed<N>)");

    std::string ckpt, split = "test", dump_dir, eval_data, eval_csv;
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on one split");
    ev->add_option("--checkpoint", ckpt, "checkpoint file")->required();
    ev->add_option("--split", split, "split name")->capture_default_str();
    ev->add_option("--dump-maps", dump_dir, "write predicted masks and attention maps here");
    ev->add_option("--data", eval_data, "dataset root (default $RCDT_DATA_DIR or ./data)");
    ev->add_option("--out", eval_csv, "metrics CSV path (default stdout)");

    ConfigArgs abl_args;
    std::string suite, seeds_text = "1,2,3", abl_data, abl_csv;
    auto* ab = app.add_subcommand("ablate", "run an ablation grid and write a comparison CSV");
    ab->add_option("--suite", suite, "table2|table3|table4|table5|layers|dropout")
        ->required()
        ->check(CLI::IsMember({"table2", "table3", "table4", "table5", "layers", "dropout"}));
    ab->add_option("--seeds", seeds_text, "comma-separated seeds")->capture_default_str();
    add_config_options(ab, abl_args);
    ab->add_option("--data", abl_data, "dataset root (default $RCDT_DATA_DIR or ./data)");
    ab->add_option("--out", abl_csv, "comparison CSV path (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (gen->parsed()) {
            const fs::path root = data_root(gen_root);
            const DatasetManifest m = write_dataset(spec, root);
            std::printf("wrote %zu train, %zu val, %zu test patches to %s\n", m.split("train").size(),
                        m.split("val").size(), m.split("test").size(), (root / "manifest.tsv").c_str());
        } else if (tr->parsed()) {
            const RunConfig cfg = resolve_config(train_args);
            const fs::path out = train_out.empty() ? fs::path("runs") / ("seed" + std::to_string(cfg.seed)) : fs::path(train_out);
            TrainOptions opts;
            opts.out_dir = out;
            opts.on_epoch = [](const EpochLog& e) {
                std::printf("epoch %3d  loss %.4f  val iou %.4f  f1 %.4f  lr %.2e\n", e.epoch, e.train_loss, e.val_iou,
                            e.val_f1, e.lr);
                std::fflush(stdout);
            };
            const TrainResult r = train(cfg, data_root(train_data) / "manifest.tsv", opts);
            std::printf("best val iou %.4f at epoch %d (%.1f s); checkpoint %s\n", r.best_val_iou, r.best_epoch,
                        r.seconds, (out / "best.ckpt").c_str());
        } else if (ev->parsed()) {
            const LoadedModel loaded = load_checkpoint(ckpt);
            const auto samples = load_pairs(data_root(eval_data) / "manifest.tsv", split);
            const EvalResult r = evaluate(loaded.model, samples, {"synthetic", split, dump_dir});
            if (r.row.m.degenerate)
                std::fprintf(stderr, "warning: degenerate metrics (a ratio had a zero denominator)\n");
            if (eval_csv.empty())
                std::cout << metrics_csv({r.row});
            else
                write_metrics_csv({r.row}, eval_csv);
        } else if (ab->parsed()) {
            const RunConfig base = resolve_config(abl_args);
            const fs::path manifest = data_root(abl_data) / "manifest.tsv";
            const auto train_set = load_pairs(manifest, "train");
            const auto val_set = load_pairs(manifest, "val");
            const auto test_set = load_pairs(manifest, "test");
            const auto rows = run_ablation(suite, base, parse_seeds(seeds_text), train_set, val_set, test_set,
                                           [](const AblationRow& r) {
                                               std::fprintf(stderr, "%s seed %llu: test iou %.4f (%.0f s)\n",
                                                            r.variant.c_str(), static_cast<unsigned long long>(r.seed),
                                                            r.test.iou, r.seconds);
                                           });
            if (abl_csv.empty()) {
                std::cout << ablation_csv(rows);
            } else {
                std::ofstream out(abl_csv, std::ios::trunc);
                if (!out) throw IoError("cannot open " + abl_csv + " for writing");
                out << ablation_csv(rows);
            }
        }
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
