#pragma once

// Confusion counting and the precision / recall / IoU / F1 report.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "rcdt/mask.hpp"

namespace rcdt {

struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
    std::uint64_t tn = 0;

    std::uint64_t total() const { return tp + fp + fn + tn; }
    ConfusionCounts& operator+=(const ConfusionCounts& o) {
        tp += o.tp;
        fp += o.fp;
        fn += o.fn;
        tn += o.tn;
        return *this;
    }
    bool operator==(const ConfusionCounts&) const = default;
};

// Counts over equal-shape binary masks; any value other than 0/1 is an
// InputError.
ConfusionCounts confusion(const Mask& pred, const Mask& gt);

struct Metrics {
    double precision = 0.0;
    double recall = 0.0;
    double iou = 0.0;
    double f1 = 0.0;
    // A ratio had a zero denominator and was reported as 0.
    bool degenerate = false;
};

Metrics metrics(const ConfusionCounts& c);

// F1 from precision and recall, and IoU from F1 (IoU = F1 / (2 - F1)).
double f1_from(double precision, double recall);
double iou_from_f1(double f1);

struct MetricsRow {
    std::string dataset;
    std::string split;
    Metrics m;
    ConfusionCounts counts;
};

// Header: dataset,split,precision,recall,iou,f1,tp,fp,fn,tn
std::string metrics_csv(const std::vector<MetricsRow>& rows);
void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path);

}  // namespace rcdt
