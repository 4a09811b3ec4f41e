#include "rcdt/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "rcdt/augment.hpp"
#include "rcdt/checkpoint.hpp"
#include "rcdt/errors.hpp"
#include "rcdt/imageio.hpp"
#include "rcdt/loss.hpp"
#include "rcdt/optim.hpp"
#include "rcdt/tiling.hpp"

namespace rcdt {

namespace {

std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a * 0x9e3779b97f4a7c15ULL + b + 0x632be59bd9b4e019ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << text;
}

SamplePair random_crop(const SamplePair& s, int crop, std::mt19937_64& rng) {
    const int h = s.gt.height, w = s.gt.width;
    if (crop > h || crop > w)
        throw ConfigError("crop_size " + std::to_string(crop) + " exceeds the " + std::to_string(h) + "x" +
                          std::to_string(w) + " training patches");
    if (crop == h && crop == w) return s;
    const int oy = std::uniform_int_distribution<int>(0, h - crop)(rng);
    const int ox = std::uniform_int_distribution<int>(0, w - crop)(rng);
    return extract_patch(s, oy, ox, crop);
}

std::vector<std::vector<double>> snapshot(const ParameterStore& store) {
    std::vector<std::vector<double>> out;
    for (const auto& p : store.entries()) out.emplace_back(p.value.data().begin(), p.value.data().end());
    return out;
}

void restore(ParameterStore& store, const std::vector<std::vector<double>>& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
        Tensor t = store.entries()[i].value;
        std::copy(values[i].begin(), values[i].end(), t.data().begin());
    }
}

}  // namespace

std::string training_log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,train_loss,val_iou,val_f1,lr\n";
    for (const auto& e : log)
        out += std::to_string(e.epoch) + "," + fmt(e.train_loss) + "," + fmt(e.val_iou) + "," + fmt(e.val_f1) + "," +
               fmt(e.lr) + "\n";
    return out;
}

TrainResult train(const RunConfig& cfg, const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& val_set,
                  const TrainOptions& options) {
    cfg.validate();
    if (train_set.empty()) throw ConfigError("training set is empty");
    const auto start = std::chrono::steady_clock::now();
    TrainResult result;
    result.model = std::make_unique<ChangeDetector>(cfg.model, cfg.seed);
    ChangeDetector& model = *result.model;
    ParameterStore& store = model.parameters();
    AdamW optimizer(store, {cfg.weight_decay, cfg.beta1, cfg.beta2, cfg.adam_eps},
                    [&](const std::string& name) {
                        return ChangeDetector::is_backbone_parameter(name) ? cfg.backbone_lr_multiplier : 1.0;
                    });
    if (!options.out_dir.empty()) {
        std::filesystem::create_directories(options.out_dir);
        save_config(cfg, options.out_dir / "config.txt");
    }

    const int n = static_cast<int>(train_set.size());
    const int batches = (n + cfg.batch_size - 1) / cfg.batch_size;
    const long long max_iter = static_cast<long long>(batches) * cfg.epochs;
    std::mt19937_64 order_rng(mix(cfg.seed, 1));
    std::mt19937_64 dropout_rng(mix(cfg.seed, 2));
    std::mt19937_64 crop_rng(mix(cfg.seed, 3));
    std::vector<int> order(n);
    std::vector<std::vector<double>> best;
    long long iter = 0;

    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), order_rng);
        EpochLog entry;
        entry.epoch = epoch;
        entry.lr = poly_lr(iter, max_iter, cfg.lr, cfg.poly_power);
        double loss_sum = 0.0;
        for (int b = 0; b < batches; ++b) {
            const int first = b * cfg.batch_size, last = std::min(n, first + cfg.batch_size);
            const double inv = 1.0 / (last - first);
            store.zero_grad();
            for (int k = first; k < last; ++k) {
                const int idx = order[k];
                SamplePair s = cfg.augment.enabled
                                   ? augment(train_set[idx], mix(mix(cfg.seed, epoch), idx), cfg.augment)
                                   : train_set[idx];
                s = random_crop(s, cfg.crop_size, crop_rng);
                const ModelOutput out = model.forward(s.before, s.after, true, &dropout_rng);
                LossResult loss = total_loss(out.aux_logits, out.logits, s.gt, cfg.alpha, cfg.supervision, cfg.dice_eps);
                const double value = loss.total.item();
                if (!std::isfinite(value))
                    throw DivergenceError("loss became non-finite at epoch " + std::to_string(epoch) + ", step " +
                                          std::to_string(b + 1));
                loss_sum += value;
                const double seed_grad = inv;
                backward(loss.total, std::span<const double>(&seed_grad, 1));
            }
            try {
                optimizer.step(poly_lr(iter, max_iter, cfg.lr, cfg.poly_power));
            } catch (const DivergenceError& e) {
                throw DivergenceError(std::string(e.what()) + " at epoch " + std::to_string(epoch) + ", step " +
                                      std::to_string(b + 1));
            }
            ++iter;
        }
        store.zero_grad();
        entry.train_loss = loss_sum / n;
        if (!val_set.empty()) {
            const EvalResult val = evaluate(model, val_set, {"synthetic", "val", {}});
            entry.val_iou = val.row.m.iou;
            entry.val_f1 = val.row.m.f1;
        }
        result.log.push_back(entry);
        if (entry.val_iou > result.best_val_iou) {
            result.best_val_iou = entry.val_iou;
            result.best_epoch = epoch;
            best = snapshot(store);
            if (!options.out_dir.empty()) save_checkpoint(store, cfg, options.out_dir / "best.ckpt");
        }
        if (!options.out_dir.empty()) write_text(options.out_dir / "train_log.csv", training_log_csv(result.log));
        if (options.on_epoch) options.on_epoch(entry);
    }
    restore(store, best);
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

std::vector<SamplePair> load_pairs(const std::filesystem::path& manifest, const std::string& split) {
    std::vector<SamplePair> out;
    for (auto& s : load_split(manifest, split)) out.push_back(std::move(s.pair));
    return out;
}

TrainResult train(const RunConfig& cfg, const std::filesystem::path& manifest, const TrainOptions& options) {
    check_disjoint_splits(read_manifest(manifest));
    return train(cfg, load_pairs(manifest, "train"), load_pairs(manifest, "val"), options);
}

std::vector<double> mean_attention_map(const ModelOutput& out, int* h, int* w) {
    if (out.rcam.attention.empty()) throw ConfigError("model output holds no attention maps");
    // the last decoder layer runs at the finest attended scale
    const Tensor& attn = out.rcam.attention.back();
    const SequenceFeatures& ctx = out.rcam.context.back();
    const int rows = attn.dim(0), cols = attn.dim(1);
    std::vector<double> map(cols, 0.0);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) map[c] += attn[static_cast<std::size_t>(r) * cols + c] / rows;
    if (h) *h = ctx.h;
    if (w) *w = ctx.w;
    return map;
}

Mask attention_to_mask_bytes(const std::vector<double>& map, int h, int w) {
    if (static_cast<int>(map.size()) != h * w) throw DimensionError("attention map size does not match its grid");
    Mask out(h, w);
    const auto [lo, hi] = std::minmax_element(map.begin(), map.end());
    const double range = *hi - *lo;
    for (std::size_t i = 0; i < map.size(); ++i)
        out.values[i] = range > 0 ? to_byte((map[i] - *lo) / range) : 0;
    return out;
}

EvalResult evaluate(const ChangeDetector& model, const std::vector<SamplePair>& samples, const EvalOptions& options) {
    NoGradGuard no_grad;
    EvalResult result;
    result.row.dataset = options.dataset;
    result.row.split = options.split;
    if (!options.dump_dir.empty()) std::filesystem::create_directories(options.dump_dir);
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const ModelOutput out = model.forward(samples[i].before, samples[i].after, false, nullptr);
        Mask pred = predict_mask(out.logits);
        result.row.counts += confusion(pred, samples[i].gt);
        if (!options.dump_dir.empty()) {
            char stem[32];
            std::snprintf(stem, sizeof stem, "%05zu", i);
            write_pnm(mask_to_raster(pred), options.dump_dir / (std::string(stem) + "_pred.pgm"));
            int h = 0, w = 0;
            const auto map = mean_attention_map(out, &h, &w);
            const Mask bytes = attention_to_mask_bytes(map, h, w);
            RasterImage img(w, h, 1);
            img.samples = bytes.values;
            write_pnm(img, options.dump_dir / (std::string(stem) + "_attn.pgm"));
        }
        result.predictions.push_back(std::move(pred));
    }
    result.row.m = metrics(result.row.counts);
    return result;
}

std::vector<AblationVariant> ablation_suite(const std::string& suite) {
    if (suite == "table2")
        return {
            {"no-deep-supervision",
             [](RunConfig& c) { c.supervision.ce = {false, false, false}, c.supervision.dice = {false, false, false}; }},
            {"ce-only", [](RunConfig& c) { c.supervision.dice = {false, false, false}; }},
            {"dice-only", [](RunConfig& c) { c.supervision.ce = {false, false, false}; }},
            {"ce+dice", [](RunConfig&) {}},
        };
    if (suite == "table3")
        return {
            {"standard", [](RunConfig& c) { c.model.cosine = false, c.model.subtraction = false; }},
            {"cosine", [](RunConfig& c) { c.model.subtraction = false; }},
            {"subtraction", [](RunConfig& c) { c.model.cosine = false; }},
            {"cosine+subtraction", [](RunConfig&) {}},
        };
    if (suite == "table4")
        return {
            {"OCA-CA", [](RunConfig& c) { c.model.ffn = false; }},
            {"OCA-CA-FFN", [](RunConfig&) {}},
            {"OCA-SA-CA-FFN", [](RunConfig& c) { c.model.self_attention = true, c.profile = "ablation"; }},
        };
    if (suite == "table5")
        return {
            {"no-FCM", [](RunConfig& c) { c.model.fcm = false; }},
            {"FCM", [](RunConfig&) {}},
        };
    if (suite == "layers") {
        std::vector<AblationVariant> out;
        for (int layers : {3, 6, 9, 12})
            out.push_back({"layers=" + std::to_string(layers), [layers](RunConfig& c) { c.model.decoder_layers = layers; }});
        return out;
    }
    if (suite == "dropout") {
        std::vector<AblationVariant> out;
        for (double p : {0.0, 0.1, 0.2, 0.3, 0.4}) {
            char name[32];
            std::snprintf(name, sizeof name, "dropout=%.1f", p);
            out.push_back({name, [p](RunConfig& c) { c.model.dropout = p; }});
        }
        return out;
    }
    throw ConfigError("unknown ablation suite '" + suite + "' (table2, table3, table4, table5, layers, dropout)");
}

std::string ablation_csv(const std::vector<AblationRow>& rows) {
    std::string out = "suite,variant,seed,precision,recall,iou,f1,best_val_iou,seconds\n";
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof buf, "%s,%s,%llu,%.6f,%.6f,%.6f,%.6f,%.6f,%.1f\n", r.suite.c_str(),
                      r.variant.c_str(), static_cast<unsigned long long>(r.seed), r.test.precision, r.test.recall,
                      r.test.iou, r.test.f1, r.best_val_iou, r.seconds);
        out += buf;
    }
    return out;
}

std::vector<AblationRow> run_ablation(const std::string& suite, const RunConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const std::vector<SamplePair>& train_set,
                                      const std::vector<SamplePair>& val_set, const std::vector<SamplePair>& test_set,
                                      const std::function<void(const AblationRow&)>& on_row) {
    std::vector<AblationRow> rows;
    for (const auto& variant : ablation_suite(suite)) {
        for (const auto seed : seeds) {
            RunConfig cfg = base;
            variant.apply(cfg);
            cfg.seed = seed;
            TrainResult tr = train(cfg, train_set, val_set);
            const EvalResult ev = evaluate(*tr.model, test_set);
            AblationRow row{suite, variant.name, seed, ev.row.m, tr.best_val_iou, tr.seconds};
            if (on_row) on_row(row);
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace rcdt
