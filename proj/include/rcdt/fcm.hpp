#pragma once

// Features Constrain Module: full-resolution change logits from the final
// pixel embeddings and the stride-4 bi-temporal features.

#include <random>
#include <vector>

#include "rcdt/config.hpp"
#include "rcdt/nn.hpp"

namespace rcdt {

class FeaturesConstrainModule {
   public:
    FeaturesConstrainModule(ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

    // Three C -> C linear maps with ReLU between: K x C -> K x C.
    Tensor segment_embed(const Tensor& pix) const;
    // Channel concatenation of the two C x H/4 x W/4 maps, then a 1x1
    // convolution back to C channels.
    Tensor constrain_project(const Tensor& before, const Tensor& after) const;
    // logits[k, y, x] = <seg_k, con[:, y, x]>, upsampled x4 to K x H x W.
    static Tensor fuse_predict(const Tensor& seg, const Tensor& con);

    Tensor forward(const Tensor& pix, const Tensor& before, const Tensor& after) const;

    const std::vector<Linear>& mlp() const { return mlp_; }
    const Conv2d& projection() const { return projection_; }

   private:
    std::vector<Linear> mlp_;
    Conv2d projection_;
    bool relu_after_projection_;
};

}  // namespace rcdt
