#pragma once

// Relational cross attention between bi-temporal features, the learnable
// query decoder, and the coarse-to-fine chain over three pyramid scales.

#include <random>
#include <vector>

#include "rcdt/backbone.hpp"
#include "rcdt/config.hpp"
#include "rcdt/nn.hpp"

namespace rcdt {

// Flattened feature map: tokens is L x C with L = h * w, positions row-major.
struct SequenceFeatures {
    Tensor tokens;
    int h = 0;
    int w = 0;
    int stride = 1;

    int length() const { return h * w; }
};

SequenceFeatures to_sequence(const Tensor& map, int stride);
Tensor to_map(const SequenceFeatures& seq);

// Fixed 2-D sine/cosine table (L x C). The first C/2 columns encode the row
// coordinate and the last C/2 the column coordinate; each half interleaves
// sin/cos pairs over a temperature-10000 frequency ladder applied to
// coordinates normalized onto (0, 2*pi].
Tensor sine_positional_encoding(int h, int w, int c);

// Category queries and their learnable positional embeddings, both K x C.
struct PixelEmbeddings {
    Tensor queries;
    Tensor query_pos;
};

struct AttentionVariant {
    bool cosine = true;       // cosine logits instead of dot product / sqrt(C)
    bool subtraction = true;  // Y = Q - A V instead of Q + A V
};

struct AttentionRun {
    double dropout = 0.0;
    bool training = false;
    std::mt19937_64* rng = nullptr;  // required when training with dropout > 0
};

struct CrossAttentionResult {
    Tensor output;     // L_q x C
    Tensor attention;  // L_q x L_k, post-softmax and before dropout
    Tensor logits;     // L_q x L_k, pre-softmax
};

// Parameter-free cross attention from query tokens onto key/value tokens,
// with Q = q + pos_q and K = V = kv + pos_kv.
CrossAttentionResult relational_cross_attention(const Tensor& q, const Tensor& kv, const Tensor& pos_q,
                                                const Tensor& pos_kv, AttentionVariant variant,
                                                const AttentionRun& run = {});

// Y = Q + softmax(Q K^T / sqrt(C)) V
CrossAttentionResult standard_cross_attention(const SequenceFeatures& q, const SequenceFeatures& kv,
                                              const Tensor& pos_q, const Tensor& pos_kv,
                                              const AttentionRun& run = {});
// Y = Q - softmax(cos(Q, K)) V
CrossAttentionResult offset_cross_attention(const SequenceFeatures& q, const SequenceFeatures& kv,
                                            const Tensor& pos_q, const Tensor& pos_kv, const AttentionRun& run = {});

class QueryDecoderLayer {
   public:
    QueryDecoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& cfg, std::mt19937_64& rng);

    // pix: K x C category queries; context: offset attention output at this
    // scale; pos_kv: sine table for the context positions.
    Tensor forward(const Tensor& pix, const Tensor& query_pos, const SequenceFeatures& context, const Tensor& pos_kv,
                   const AttentionRun& run = {}) const;

    const Linear& ffn_layer(int i) const { return ffn_.at(i); }

   private:
    struct Attention {
        Linear q, k, v, out;
    };
    Tensor attend(const Attention& a, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                  const AttentionRun& run) const;

    bool use_ffn_;
    bool use_self_attention_;
    int channels_;
    Attention self_attn_;
    LayerNorm self_norm_;
    Attention cross_attn_;
    LayerNorm cross_norm_;
    std::vector<Linear> ffn_;
    LayerNorm ffn_norm_;
};

struct RcamOutput {
    std::vector<Tensor> pixel_embeddings;   // per decoder layer, K x C
    std::vector<Tensor> attention;          // per layer, the relational attention map
    std::vector<SequenceFeatures> context;  // per layer, Y
    std::vector<Tensor> aux_logits;         // per layer, pix . Y^T as K x h x w
};

class RelationalCrossAttention {
   public:
    RelationalCrossAttention(ParameterStore& store, const ModelConfig& cfg, std::mt19937_64& rng);

    // Coarse to fine: layer i runs at pyramid level 3 - (i mod 3), i.e.
    // strides 32, 16, 8, feeding each layer's embeddings to the next.
    RcamOutput forward(const DecodedPyramid& before, const DecodedPyramid& after, const PixelEmbeddings& pix0,
                       const AttentionRun& run = {}) const;
    RcamOutput forward(const DecodedPyramid& before, const DecodedPyramid& after,
                       const AttentionRun& run = {}) const {
        return forward(before, after, embeddings_, run);
    }

    const PixelEmbeddings& embeddings() const { return embeddings_; }
    int layer_count() const { return static_cast<int>(layers_.size()); }
    const QueryDecoderLayer& layer(int i) const { return layers_.at(i); }
    static int level_for_layer(int layer) { return 3 - layer % 3; }

   private:
    AttentionVariant variant_;
    double dropout_;
    PixelEmbeddings embeddings_;
    std::vector<QueryDecoderLayer> layers_;
};

}  // namespace rcdt
