#include "rcdt/model.hpp"

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

ChangeDetector::ChangeDetector(const ModelConfig& cfg, std::uint64_t init_seed)
    : cfg_(cfg),
      init_rng_(init_seed),
      backbone_(store_, cfg_, init_rng_),
      rcam_(store_, cfg_, init_rng_) {
    if (cfg_.fcm) fcm_.emplace(store_, cfg_, init_rng_);
}

ModelOutput ChangeDetector::forward(const Tensor& before, const Tensor& after, bool training,
                                    std::mt19937_64* rng) const {
    ModelOutput out;
    std::tie(out.before, out.after) = backbone_.siamese_forward(before, after);
    out.rcam = rcam_.forward(out.before, out.after, AttentionRun{0.0, training, rng});
    const int layers = rcam_.layer_count();
    for (int i = layers - 3; i < layers; ++i) out.aux_logits.push_back(out.rcam.aux_logits[i]);
    const Tensor& pix = out.rcam.pixel_embeddings.back();
    if (fcm_) {
        out.logits = fcm_->forward(pix, out.before.levels[0], out.after.levels[0]);
    } else {
        // Without the constrain head the finest decoder scale (stride 8) is
        // the prediction.
        out.logits = bilinear_resize(out.aux_logits.back(), 8);
    }
    return out;
}

bool ChangeDetector::is_backbone_parameter(const std::string& name) { return name.starts_with("backbone."); }

Mask predict_mask(const Tensor& logits) {
    if (logits.rank() != 3) throw DimensionError("predict_mask: expected K x H x W, got " + shape_str(logits.shape()));
    const int k = logits.dim(0), h = logits.dim(1), w = logits.dim(2);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    Mask m(h, w);
    for (std::size_t p = 0; p < plane; ++p) {
        int best = 0;
        for (int c = 1; c < k; ++c)
            if (logits[c * plane + p] > logits[best * plane + p]) best = c;
        m.values[p] = static_cast<std::uint8_t>(best);
    }
    return m;
}

}  // namespace rcdt
