#pragma once

// Training loop, evaluation, attention export and the ablation grids.

#include <filesystem>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "rcdt/config.hpp"
#include "rcdt/metrics.hpp"
#include "rcdt/model.hpp"
#include "rcdt/synth.hpp"

namespace rcdt {

struct EpochLog {
    int epoch = 0;  // 1-based
    double train_loss = 0.0;
    double val_iou = 0.0;
    double val_f1 = 0.0;
    double lr = 0.0;  // head learning rate at the epoch's first step

    bool operator==(const EpochLog&) const = default;
};

// Header: epoch,train_loss,val_iou,val_f1,lr
std::string training_log_csv(const std::vector<EpochLog>& log);

struct TrainOptions {
    // When set, receives train_log.csv and best.ckpt.
    std::filesystem::path out_dir;
    std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
    std::vector<EpochLog> log;
    int best_epoch = 0;
    double best_val_iou = -1.0;
    double seconds = 0.0;
    // Parameters restored to the best validation epoch.
    std::unique_ptr<ChangeDetector> model;
};

TrainResult train(const RunConfig& cfg, const std::vector<SamplePair>& train_set, const std::vector<SamplePair>& val_set,
                  const TrainOptions& options = {});

// Reads the train and val splits from a manifest.
TrainResult train(const RunConfig& cfg, const std::filesystem::path& manifest, const TrainOptions& options = {});

std::vector<SamplePair> load_pairs(const std::filesystem::path& manifest, const std::string& split);

struct EvalOptions {
    std::string dataset = "synthetic";
    std::string split = "test";
    // When set, receives <index>_pred.pgm and <index>_attn.pgm per sample.
    std::filesystem::path dump_dir;
};

struct EvalResult {
    MetricsRow row;
    std::vector<Mask> predictions;
};

// Batch size 1, no augmentation, counts aggregated over the whole set.
EvalResult evaluate(const ChangeDetector& model, const std::vector<SamplePair>& samples,
                    const EvalOptions& options = {});

// Mean over query positions of the finest offset cross attention map, i.e.
// the attention each key position receives, as an h x w grid.
std::vector<double> mean_attention_map(const ModelOutput& out, int* h, int* w);

// Min-max scaled to 0..255 (constant maps become 0).
Mask attention_to_mask_bytes(const std::vector<double>& map, int h, int w);

struct AblationVariant {
    std::string name;
    std::function<void(RunConfig&)> apply;
};

// table2 | table3 | table4 | table5 | layers | dropout
std::vector<AblationVariant> ablation_suite(const std::string& suite);

struct AblationRow {
    std::string suite;
    std::string variant;
    std::uint64_t seed = 0;
    Metrics test;
    double best_val_iou = 0.0;
    double seconds = 0.0;
};

// Header: suite,variant,seed,precision,recall,iou,f1,best_val_iou,seconds
std::string ablation_csv(const std::vector<AblationRow>& rows);

std::vector<AblationRow> run_ablation(const std::string& suite, const RunConfig& base,
                                      const std::vector<std::uint64_t>& seeds, const std::vector<SamplePair>& train_set,
                                      const std::vector<SamplePair>& val_set, const std::vector<SamplePair>& test_set,
                                      const std::function<void(const AblationRow&)>& on_row = {});

}  // namespace rcdt
