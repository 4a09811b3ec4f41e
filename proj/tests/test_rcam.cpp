#include <cmath>

#include "doctest.h"
#include "helpers.hpp"
#include "rcdt/errors.hpp"
#include "rcdt/gradcheck.hpp"
#include "rcdt/model.hpp"
#include "rcdt/ops.hpp"
#include "rcdt/rcam.hpp"

using namespace rcdt;
using rcdt::test::max_abs_diff;
using rcdt::test::random_tensor;

namespace {

Tensor rows(int r, int c, std::vector<double> v) { return Tensor(Shape{r, c}, std::move(v)); }
Tensor zeros(int r, int c) { return Tensor(Shape{r, c}); }

// Per-pair loop evaluation of softmax attention with an explicit logit rule.
std::vector<double> attention_oracle(const Tensor& q, const Tensor& k, bool cosine, double sign) {
    const int lq = q.dim(0), lk = k.dim(0), c = q.dim(1);
    std::vector<double> y(static_cast<std::size_t>(lq) * c);
    for (int i = 0; i < lq; ++i) {
        std::vector<double> logit(lk);
        double qn = 0;
        for (int d = 0; d < c; ++d) qn += q[i * c + d] * q[i * c + d];
        for (int j = 0; j < lk; ++j) {
            double dot = 0, kn = 0;
            for (int d = 0; d < c; ++d) {
                dot += q[i * c + d] * k[j * c + d];
                kn += k[j * c + d] * k[j * c + d];
            }
            logit[j] = cosine ? dot / (std::sqrt(qn) * std::sqrt(kn)) : dot / std::sqrt(static_cast<double>(c));
        }
        double mx = logit[0], z = 0;
        for (double l : logit) mx = std::max(mx, l);
        for (double& l : logit) z += (l = std::exp(l - mx));
        for (int d = 0; d < c; ++d) {
            double agg = 0;
            for (int j = 0; j < lk; ++j) agg += logit[j] / z * k[j * c + d];
            y[i * c + d] = q[i * c + d] + sign * agg;
        }
    }
    return y;
}

}  // namespace

TEST_CASE("sine positional encoding: range, distinct rows, determinism") {
    const Tensor pe = sine_positional_encoding(8, 8, 64);
    CHECK(pe.shape() == Shape{64, 64});
    for (double v : pe.data()) {
        CHECK(v >= -1.0);
        CHECK(v <= 1.0);
    }
    double closest = 1e9;
    for (int a = 0; a < 64; ++a)
        for (int b = a + 1; b < 64; ++b) {
            double d = 0;
            for (int c = 0; c < 64; ++c) d += std::abs(pe[a * 64 + c] - pe[b * 64 + c]);
            closest = std::min(closest, d);
        }
    CHECK(closest > 1e-6);
    const Tensor again = sine_positional_encoding(8, 8, 64);
    CHECK(max_abs_diff(pe.data(), again.data()) == 0.0);
    CHECK_THROWS_AS(sine_positional_encoding(8, 8, 30), ConfigError);
}

TEST_CASE("standard cross attention examples") {
    const SequenceFeatures q{rows(2, 2, {1, 2, 3, 4}), 1, 2, 32};
    const SequenceFeatures one{rows(1, 2, {5, -1}), 1, 1, 32};
    const auto single = standard_cross_attention(q, one, zeros(2, 2), zeros(1, 2));
    CHECK(max_abs_diff(single.output.data(), std::vector<double>{6, 1, 8, 3}) < 1e-12);

    const SequenceFeatures zq{zeros(1, 2), 1, 1, 32};
    const SequenceFeatures kv{rows(3, 2, {1, 2, 3, 4, 5, 9}), 1, 3, 32};
    const auto uniform = standard_cross_attention(zq, kv, zeros(1, 2), zeros(3, 2));
    CHECK(uniform.output[0] == doctest::Approx(3.0));
    CHECK(uniform.output[1] == doctest::Approx(5.0));

    std::mt19937_64 rng(1);
    const Tensor qa = random_tensor({2, 4}, rng), kb = random_tensor({3, 4}, rng);
    const Tensor pq = random_tensor({2, 4}, rng), pk = random_tensor({3, 4}, rng);
    const auto y = standard_cross_attention({qa, 1, 2, 8}, {kb, 1, 3, 8}, pq, pk);
    CHECK(max_abs_diff(y.output.data(), attention_oracle(add(qa, pq), add(kb, pk), false, 1.0)) < 1e-10);
    CHECK_THROWS_AS(standard_cross_attention({qa, 1, 2, 8}, {random_tensor({3, 5}, rng), 1, 3, 8}, pq, pk),
                    DimensionError);
}

TEST_CASE("offset cross attention examples") {
    const SequenceFeatures q{rows(1, 2, {0.3, -0.7}), 1, 1, 32};
    const SequenceFeatures one{rows(1, 2, {2, 5}), 1, 1, 32};
    const auto single = offset_cross_attention(q, one, zeros(1, 2), zeros(1, 2));
    CHECK(max_abs_diff(single.output.data(), std::vector<double>{0.3 - 2, -0.7 - 5}) < 1e-12);

    const auto hand = offset_cross_attention({rows(1, 2, {2, 0}), 1, 1, 32}, {rows(2, 2, {1, 0, 0, 1}), 1, 2, 32},
                                             zeros(1, 2), zeros(2, 2));
    CHECK(hand.logits[0] == doctest::Approx(1.0));
    CHECK(hand.logits[1] == doctest::Approx(0.0));
    CHECK(hand.attention[0] == doctest::Approx(0.7311).epsilon(1e-4));
    CHECK(hand.attention[1] == doctest::Approx(0.2689).epsilon(1e-4));
    CHECK(hand.output[0] == doctest::Approx(1.2689).epsilon(1e-4));
    CHECK(hand.output[1] == doctest::Approx(-0.2689).epsilon(1e-4));

    std::mt19937_64 rng(2);
    const Tensor qa = random_tensor({5, 6}, rng), kb = random_tensor({7, 6}, rng);
    const auto base = offset_cross_attention({qa, 1, 5, 8}, {kb, 1, 7, 8}, zeros(5, 6), zeros(7, 6));
    const auto scaled = offset_cross_attention({scale(qa, 10.0), 1, 5, 8}, {kb, 1, 7, 8}, zeros(5, 6), zeros(7, 6));
    CHECK(max_abs_diff(base.attention.data(), scaled.attention.data()) < 1e-10);
    CHECK(max_abs_diff(base.output.data(), attention_oracle(qa, kb, true, -1.0)) < 1e-10);
    const auto standard = standard_cross_attention({qa, 1, 5, 8}, {kb, 1, 7, 8}, zeros(5, 6), zeros(7, 6));
    CHECK(max_abs_diff(base.output.data(), standard.output.data()) > 1e-3);
}

TEST_CASE("attention dropout only acts in training") {
    std::mt19937_64 rng(3);
    const Tensor qa = random_tensor({6, 4}, rng), kb = random_tensor({6, 4}, rng);
    const SequenceFeatures q{qa, 2, 3, 8}, kv{kb, 2, 3, 8};
    const auto eval1 = offset_cross_attention(q, kv, zeros(6, 4), zeros(6, 4), {0.5, false, nullptr});
    const auto eval2 = offset_cross_attention(q, kv, zeros(6, 4), zeros(6, 4), {0.5, false, nullptr});
    CHECK(max_abs_diff(eval1.output.data(), eval2.output.data()) == 0.0);
    std::mt19937_64 drng(4);
    const auto train = offset_cross_attention(q, kv, zeros(6, 4), zeros(6, 4), {0.5, true, &drng});
    CHECK(max_abs_diff(eval1.output.data(), train.output.data()) > 1e-6);
    CHECK(max_abs_diff(eval1.attention.data(), train.attention.data()) == 0.0);
    CHECK_THROWS_AS(offset_cross_attention(q, kv, zeros(6, 4), zeros(6, 4), {0.5, true, nullptr}), ConfigError);
}

TEST_CASE("offset cross attention block passes central differences") {
    std::mt19937_64 rng(5);
    auto fn = [](std::span<const Tensor> in) {
        return relational_cross_attention(in[0], in[1], in[2], in[3], {true, true}).output;
    };
    const double err = finite_difference_check(
        fn, {random_tensor({4, 8}, rng, -1, 1, true), random_tensor({6, 8}, rng, -1, 1, true),
             random_tensor({4, 8}, rng, -1, 1, true), random_tensor({6, 8}, rng, -1, 1, true)});
    CHECK(err < 1e-4);
}

TEST_CASE("query decoder layer: shape, zero FFN, gradient reach") {
    ModelConfig cfg;
    ParameterStore store;
    std::mt19937_64 rng(6);
    QueryDecoderLayer layer(store, "dec", cfg, rng);
    const Tensor pix = random_tensor({2, 64}, rng), qpos = random_tensor({2, 64}, rng, -1, 1, true);
    for (int len : {4, 16, 64}) {
        const SequenceFeatures ctx{random_tensor({len, 64}, rng), 1, len, 8};
        CHECK(layer.forward(pix, qpos, ctx, random_tensor({len, 64}, rng)).shape() == Shape{2, 64});
    }
    const SequenceFeatures ctx{random_tensor({16, 64}, rng), 4, 4, 8};
    const Tensor pos = sine_positional_encoding(4, 4, 64);
    backward(sum(mul(layer.forward(pix, qpos, ctx, pos), random_tensor({2, 64}, rng))));
    double norm = 0;
    for (double g : qpos.grad()) norm += g * g;
    CHECK(norm > 0.0);

    // Same init stream without the FFN block: the cross-attention weights coincide.
    ModelConfig no_ffn = cfg;
    no_ffn.ffn = false;
    ParameterStore store2;
    std::mt19937_64 rng2(6);
    QueryDecoderLayer bare(store2, "dec", no_ffn, rng2);
    for (int i = 0; i < 3; ++i) {
        Tensor w = layer.ffn_layer(i).weight, b = layer.ffn_layer(i).bias;
        std::fill(w.data().begin(), w.data().end(), 0.0);
        std::fill(b.data().begin(), b.data().end(), 0.0);
    }
    const Tensor with_zero_ffn = layer.forward(pix, qpos, ctx, pos);
    const Tensor attention_only = bare.forward(pix, qpos, ctx, pos);
    // Only the trailing LayerNorm's eps separates LN(LN(x)) from LN(x).
    CHECK(max_abs_diff(with_zero_ffn.data(), attention_only.data()) < 1e-4);
}

TEST_CASE("multi-scale chain: key lengths, layer count, no self-attention weights") {
    ModelConfig cfg;
    ChangeDetector model(cfg, 7);
    std::mt19937_64 rng(7);
    const Tensor a = random_tensor({3, 64, 64}, rng, 0, 1), b = random_tensor({3, 64, 64}, rng, 0, 1);
    const ModelOutput out = model.forward(a, b);
    REQUIRE(out.rcam.attention.size() == 3);
    CHECK(out.rcam.attention[0].dim(1) == 4);
    CHECK(out.rcam.attention[1].dim(1) == 16);
    CHECK(out.rcam.attention[2].dim(1) == 64);
    CHECK(out.aux_logits[0].shape() == Shape{2, 2, 2});
    CHECK(out.aux_logits[2].shape() == Shape{2, 8, 8});
    CHECK(model.rcam().layer_count() == 3);
    for (const auto& p : model.parameters().entries()) CHECK(p.name.find("self_attn") == std::string::npos);

    const ModelOutput same = model.forward(a, a);
    for (const auto& attn : same.rcam.attention) {
        const int r = attn.dim(0), c = attn.dim(1);
        for (int i = 0; i < r; ++i) {
            double s = 0;
            for (int j = 0; j < c; ++j) s += attn[i * c + j];
            CHECK(std::abs(s - 1.0) < 1e-6);
        }
    }
    for (const auto& pix : same.rcam.pixel_embeddings)
        for (double v : pix.data()) CHECK(std::isfinite(v));

    const ModelOutput again = model.forward(a, b);
    CHECK(max_abs_diff(out.logits.data(), again.logits.data()) == 0.0);
}

TEST_CASE("self-attention ablation adds parameters") {
    ModelConfig cfg;
    cfg.self_attention = true;
    ChangeDetector with_sa(cfg, 1);
    ChangeDetector without(ModelConfig{}, 1);
    CHECK(with_sa.parameters().scalar_count() > without.parameters().scalar_count());
    CHECK(with_sa.parameters().contains("rcam.layer0.self_attn.q.weight"));
}

TEST_CASE("deeper decoders cycle through the three scales") {
    ModelConfig cfg;
    cfg.decoder_layers = 6;
    cfg.channels = 16;
    ChangeDetector model(cfg, 3);
    std::mt19937_64 rng(8);
    const ModelOutput out =
        model.forward(random_tensor({3, 64, 64}, rng, 0, 1), random_tensor({3, 64, 64}, rng, 0, 1));
    REQUIRE(out.rcam.attention.size() == 6);
    CHECK(out.rcam.attention[3].dim(1) == 4);
    CHECK(out.rcam.attention[5].dim(1) == 64);
    CHECK(out.aux_logits.size() == 3);
}
