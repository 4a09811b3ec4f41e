#include "rcdt/metrics.hpp"

#include <cstdio>
#include <fstream>

#include "rcdt/errors.hpp"

namespace rcdt {

ConfusionCounts confusion(const Mask& pred, const Mask& gt) {
    if (pred.height != gt.height || pred.width != gt.width)
        throw DimensionError("confusion: prediction " + std::to_string(pred.height) + "x" + std::to_string(pred.width) +
                             " vs ground truth " + std::to_string(gt.height) + "x" + std::to_string(gt.width));
    ConfusionCounts c;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const auto p = pred.values[i], g = gt.values[i];
        if (p > 1 || g > 1) throw InputError("confusion: non-binary label at pixel " + std::to_string(i));
        if (p && g)
            ++c.tp;
        else if (p)
            ++c.fp;
        else if (g)
            ++c.fn;
        else
            ++c.tn;
    }
    return c;
}

double f1_from(double precision, double recall) {
    return precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
}

double iou_from_f1(double f1) { return f1 / (2.0 - f1); }

Metrics metrics(const ConfusionCounts& c) {
    Metrics m;
    const auto tp = static_cast<double>(c.tp);
    if (c.tp + c.fp > 0)
        m.precision = tp / static_cast<double>(c.tp + c.fp);
    else
        m.degenerate = true;
    if (c.tp + c.fn > 0)
        m.recall = tp / static_cast<double>(c.tp + c.fn);
    else
        m.degenerate = true;
    if (c.tp + c.fp + c.fn > 0) m.iou = tp / static_cast<double>(c.tp + c.fp + c.fn);
    m.f1 = f1_from(m.precision, m.recall);
    return m;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = "dataset,split,precision,recall,iou,f1,tp,fp,fn,tn\n";
    char buf[256];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof buf, "%.10f,%.10f,%.10f,%.10f,%llu,%llu,%llu,%llu\n", r.m.precision, r.m.recall,
                      r.m.iou, r.m.f1, static_cast<unsigned long long>(r.counts.tp),
                      static_cast<unsigned long long>(r.counts.fp), static_cast<unsigned long long>(r.counts.fn),
                      static_cast<unsigned long long>(r.counts.tn));
        out += r.dataset + "," + r.split + "," + buf;
    }
    return out;
}

void write_metrics_csv(const std::vector<MetricsRow>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << metrics_csv(rows);
}

}  // namespace rcdt
