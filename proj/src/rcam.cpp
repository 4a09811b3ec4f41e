#include "rcdt/rcam.hpp"

#include <cmath>
#include <numbers>

#include "rcdt/errors.hpp"
#include "rcdt/ops.hpp"

namespace rcdt {

SequenceFeatures to_sequence(const Tensor& map, int stride) {
    if (map.rank() != 3) throw DimensionError("to_sequence: expected C x H x W, got " + shape_str(map.shape()));
    return {flatten_tokens(map), map.dim(1), map.dim(2), stride};
}

Tensor to_map(const SequenceFeatures& seq) { return unflatten_tokens(seq.tokens, seq.h, seq.w); }

Tensor sine_positional_encoding(int h, int w, int c) {
    if (h <= 0 || w <= 0) throw ConfigError("sine_positional_encoding: empty grid");
    if (c <= 0 || c % 4 != 0)
        throw ConfigError("sine_positional_encoding: channel count " + std::to_string(c) + " is not divisible by 4");
    const int half = c / 2;
    constexpr double two_pi = 2.0 * std::numbers::pi;
    std::vector<double> table(static_cast<std::size_t>(h) * w * c);
    std::vector<double> inv_freq(half);
    for (int i = 0; i < half; ++i) inv_freq[i] = std::pow(10000.0, -2.0 * (i / 2) / half);
    for (int y = 0; y < h; ++y) {
        const double ey = (y + 1.0) / h * two_pi;
        for (int x = 0; x < w; ++x) {
            const double ex = (x + 1.0) / w * two_pi;
            double* row = table.data() + (static_cast<std::size_t>(y) * w + x) * c;
            for (int i = 0; i < half; ++i) {
                row[i] = (i % 2 == 0) ? std::sin(ey * inv_freq[i]) : std::cos(ey * inv_freq[i]);
                row[half + i] = (i % 2 == 0) ? std::sin(ex * inv_freq[i]) : std::cos(ex * inv_freq[i]);
            }
        }
    }
    return Tensor(Shape{h * w, c}, std::move(table));
}

namespace {

void require_tokens(const Tensor& t, const char* what) {
    if (t.rank() != 2) throw DimensionError(std::string(what) + " must be L x C, got " + shape_str(t.shape()));
}

Tensor attention_dropout(const Tensor& attn, const AttentionRun& run) {
    if (!run.training || run.dropout <= 0.0) return attn;
    if (run.rng == nullptr) throw ConfigError("attention dropout during training needs a random generator");
    return dropout(attn, run.dropout, *run.rng, true);
}

}  // namespace

CrossAttentionResult relational_cross_attention(const Tensor& q, const Tensor& kv, const Tensor& pos_q,
                                                const Tensor& pos_kv, AttentionVariant variant,
                                                const AttentionRun& run) {
    require_tokens(q, "query tokens");
    require_tokens(kv, "key/value tokens");
    if (q.dim(1) != kv.dim(1))
        throw DimensionError("cross attention: channel mismatch, query " + shape_str(q.shape()) + " vs key " +
                             shape_str(kv.shape()));
    const Tensor query = add(q, pos_q);
    const Tensor key = add(kv, pos_kv);
    const Tensor& value = key;
    Tensor logits;
    if (variant.cosine) {
        logits = matmul(l2_normalize_rows(query), transpose(l2_normalize_rows(key)));
    } else {
        logits = scale(matmul(query, transpose(key)), 1.0 / std::sqrt(static_cast<double>(q.dim(1))));
    }
    const Tensor attn = softmax_lastdim(logits);
    const Tensor aggregated = matmul(attention_dropout(attn, run), value);
    Tensor out = variant.subtraction ? sub(query, aggregated) : add(query, aggregated);
    return {std::move(out), attn, logits};
}

CrossAttentionResult standard_cross_attention(const SequenceFeatures& q, const SequenceFeatures& kv,
                                              const Tensor& pos_q, const Tensor& pos_kv, const AttentionRun& run) {
    return relational_cross_attention(q.tokens, kv.tokens, pos_q, pos_kv, {false, false}, run);
}

CrossAttentionResult offset_cross_attention(const SequenceFeatures& q, const SequenceFeatures& kv,
                                            const Tensor& pos_q, const Tensor& pos_kv, const AttentionRun& run) {
    return relational_cross_attention(q.tokens, kv.tokens, pos_q, pos_kv, {true, true}, run);
}

QueryDecoderLayer::QueryDecoderLayer(ParameterStore& store, const std::string& name, const ModelConfig& cfg,
                                     std::mt19937_64& rng)
    : use_ffn_(cfg.ffn), use_self_attention_(cfg.self_attention), channels_(cfg.channels) {
    const int c = cfg.channels;
    auto make_attention = [&](const std::string& prefix) {
        return Attention{Linear::make(store, prefix + ".q", c, c, rng), Linear::make(store, prefix + ".k", c, c, rng),
                         Linear::make(store, prefix + ".v", c, c, rng),
                         Linear::make(store, prefix + ".out", c, c, rng)};
    };
    if (use_self_attention_) {
        self_attn_ = make_attention(name + ".self_attn");
        self_norm_ = LayerNorm::make(store, name + ".self_attn.norm", c);
    }
    cross_attn_ = make_attention(name + ".cross_attn");
    cross_norm_ = LayerNorm::make(store, name + ".cross_attn.norm", c);
    if (use_ffn_) {
        const int hidden = cfg.ffn_multiplier * c;
        ffn_.push_back(Linear::make(store, name + ".ffn.fc0", c, hidden, rng));
        ffn_.push_back(Linear::make(store, name + ".ffn.fc1", hidden, hidden, rng));
        ffn_.push_back(Linear::make(store, name + ".ffn.fc2", hidden, c, rng));
        ffn_norm_ = LayerNorm::make(store, name + ".ffn.norm", c);
    }
}

Tensor QueryDecoderLayer::attend(const Attention& a, const Tensor& q_in, const Tensor& k_in, const Tensor& v_in,
                                 const AttentionRun& run) const {
    const Tensor logits =
        scale(matmul(a.q(q_in), transpose(a.k(k_in))), 1.0 / std::sqrt(static_cast<double>(channels_)));
    const Tensor attn = attention_dropout(softmax_lastdim(logits), run);
    return a.out(matmul(attn, a.v(v_in)));
}

Tensor QueryDecoderLayer::forward(const Tensor& pix, const Tensor& query_pos, const SequenceFeatures& context,
                                  const Tensor& pos_kv, const AttentionRun& run) const {
    Tensor x = pix;
    if (use_self_attention_) {
        const Tensor qk = add(x, query_pos);
        x = self_norm_(add(x, attend(self_attn_, qk, qk, x, run)));
    }
    x = cross_norm_(add(x, attend(cross_attn_, add(x, query_pos), add(context.tokens, pos_kv), context.tokens, run)));
    if (use_ffn_) {
        Tensor h = relu(ffn_[0](x));
        h = relu(ffn_[1](h));
        x = ffn_norm_(add(x, ffn_[2](h)));
    }
    return x;
}

RelationalCrossAttention::RelationalCrossAttention(ParameterStore& store, const ModelConfig& cfg,
                                                   std::mt19937_64& rng)
    : variant_{cfg.cosine, cfg.subtraction}, dropout_(cfg.dropout) {
    cfg.validate();
    const Shape shape{cfg.categories, cfg.channels};
    embeddings_.queries = store.add("rcam.queries", init_tensor(shape, Init::Normal, rng, 1, 1, 1.0));
    embeddings_.query_pos = store.add("rcam.query_pos", init_tensor(shape, Init::Normal, rng, 1, 1, 1.0));
    layers_.reserve(cfg.decoder_layers);
    for (int i = 0; i < cfg.decoder_layers; ++i)
        layers_.emplace_back(store, "rcam.layer" + std::to_string(i), cfg, rng);
}

RcamOutput RelationalCrossAttention::forward(const DecodedPyramid& before, const DecodedPyramid& after,
                                             const PixelEmbeddings& pix0, const AttentionRun& run) const {
    const AttentionRun attn_run{dropout_, run.training, run.rng};
    RcamOutput out;
    Tensor pix = pix0.queries;
    for (int i = 0; i < layer_count(); ++i) {
        const int level = level_for_layer(i);
        const int stride = kPyramidStrides[level];
        const SequenceFeatures qa = to_sequence(before.levels[level], stride);
        const SequenceFeatures kb = to_sequence(after.levels[level], stride);
        const Tensor pos = sine_positional_encoding(qa.h, qa.w, qa.tokens.dim(1));
        auto rel = relational_cross_attention(qa.tokens, kb.tokens, pos, pos, variant_, attn_run);
        const SequenceFeatures y{rel.output, qa.h, qa.w, stride};
        pix = layers_[i].forward(pix, pix0.query_pos, y, pos, attn_run);
        Tensor aux = reshape(matmul(pix, transpose(y.tokens)), Shape{pix.dim(0), y.h, y.w});
        out.pixel_embeddings.push_back(pix);
        out.attention.push_back(rel.attention);
        out.context.push_back(y);
        out.aux_logits.push_back(std::move(aux));
    }
    return out;
}

}  // namespace rcdt
