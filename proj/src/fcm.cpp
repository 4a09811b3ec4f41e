#include "rcdt/fcm.hpp"

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

FeaturesConstrainModule::FeaturesConstrainModule(ParameterStore& store, const ModelConfig& cfg,
                                                 std::mt19937_64& rng)
    : relu_after_projection_(cfg.constrain_relu) {
    const int c = cfg.channels;
    for (int i = 0; i < 3; ++i) mlp_.push_back(Linear::make(store, "fcm.mlp.fc" + std::to_string(i), c, c, rng));
    projection_ = Conv2d::make(store, "fcm.projection", 2 * c, c, 1, 1, rng);
}

Tensor FeaturesConstrainModule::segment_embed(const Tensor& pix) const {
    Tensor x = relu(mlp_[0](pix));
    x = relu(mlp_[1](x));
    return mlp_[2](x);
}

Tensor FeaturesConstrainModule::constrain_project(const Tensor& before, const Tensor& after) const {
    if (before.rank() != 3 || after.rank() != 3 || before.dim(1) != after.dim(1) || before.dim(2) != after.dim(2))
        throw DimensionError("constrain_project: spatial mismatch " + shape_str(before.shape()) + " vs " +
                             shape_str(after.shape()));
    Tensor con = projection_(concat_channels(before, after));
    return relu_after_projection_ ? relu(con) : con;
}

Tensor FeaturesConstrainModule::fuse_predict(const Tensor& seg, const Tensor& con) {
    if (seg.rank() != 2 || con.rank() != 3 || seg.dim(1) != con.dim(0))
        throw DimensionError("fuse_predict: segment embeddings " + shape_str(seg.shape()) + " vs features " +
                             shape_str(con.shape()));
    const int h = con.dim(1), w = con.dim(2);
    const Tensor flat = reshape(con, Shape{con.dim(0), h * w});
    const Tensor logits = reshape(matmul(seg, flat), Shape{seg.dim(0), h, w});
    return bilinear_resize(logits, 4);
}

Tensor FeaturesConstrainModule::forward(const Tensor& pix, const Tensor& before, const Tensor& after) const {
    return fuse_predict(segment_embed(pix), constrain_project(before, after));
}

}  // namespace rcdt
