#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "hibert/encoder.hpp"

using namespace hibert;
using testutil::rand_tensor;
using testutil::small_config;
using testutil::zero_stack;

namespace {

ModelParams make_model(int vocab_size, uint64_t seed = 1) {
  Rng rng(seed);
  return ModelParams::init(small_config(vocab_size), rng);
}

}  // namespace

TEST_CASE("sincos positions") {
  Tensor p0 = sincos_position(0, 8);
  for (Index i = 0; i < 8; i += 2) {
    CHECK(p0.at(i) == 0.0);
    CHECK(p0.at(i + 1) == 1.0);
  }
  Tensor p1 = sincos_position(1, 2);
  CHECK(p1.at(0) == doctest::Approx(std::sin(1.0)).epsilon(1e-12));
  CHECK(p1.at(1) == doctest::Approx(std::cos(1.0)).epsilon(1e-12));

  Tensor p7 = sincos_position(7, 16);
  for (Index i = 0; i < 16; ++i) {
    CHECK(p7.at(i) <= 1.0);
    CHECK(p7.at(i) >= -1.0);
  }
  CHECK_THROWS(sincos_position(0, 7));

  // word position t and sentence position t share the same table
  Tensor rows = sincos_rows(0, 5, 16);
  for (long t = 0; t < 5; ++t) {
    Tensor pt = sincos_position(t, 16);
    for (Index i = 0; i < 16; ++i) CHECK(rows.at(t, i) == pt.at(i));
  }
}

TEST_CASE("multi-head attention oracles") {
  ModelParams m = make_model(12);
  const auto& attn = m.sent_enc.layers[0].attn;
  RunContext ctx;
  Rng rng(5);

  // single key-value: softmax over one item is 1 -> query-independent output
  Tensor kv = rand_tensor({1, 16}, rng, false);
  Tensor q1 = rand_tensor({1, 16}, rng, false);
  Tensor q2 = rand_tensor({1, 16}, rng, false);
  Tensor o1 = multi_head_attention(q1, kv, kv, attn, 4, Tensor(), ctx);
  Tensor o2 = multi_head_attention(q2, kv, kv, attn, 4, Tensor(), ctx);
  for (Index i = 0; i < 16; ++i) CHECK(o1.at(i) == doctest::Approx(o2.at(i)).epsilon(1e-12));

  // mask hiding all but key j reproduces the single-key case
  Tensor keys = rand_tensor({4, 16}, rng, false);
  long j = 2;
  std::vector<bool> pad(4, true);
  pad[static_cast<size_t>(j)] = false;
  Tensor mask = key_pad_mask(pad, 1);
  Tensor masked = multi_head_attention(q1, keys, keys, attn, 4, mask, ctx);
  Tensor only_j = multi_head_attention(q1, slice_rows(keys, j, j + 1), slice_rows(keys, j, j + 1),
                                       attn, 4, Tensor(), ctx);
  for (Index i = 0; i < 16; ++i) CHECK(masked.at(i) == doctest::Approx(only_j.at(i)).epsilon(1e-9));

  // identical keys -> uniform weights -> query-independent output
  Tensor row = rand_tensor({1, 16}, rng, false);
  Tensor same = concat_rows({row, row, row});
  Tensor u1 = multi_head_attention(q1, same, same, attn, 4, Tensor(), ctx);
  Tensor u2 = multi_head_attention(q2, same, same, attn, 4, Tensor(), ctx);
  for (Index i = 0; i < 16; ++i) CHECK(u1.at(i) == doctest::Approx(u2.at(i)).epsilon(1e-9));
}

TEST_CASE("encoder_layer") {
  ModelParams m = make_model(12);
  RunContext ctx;
  Rng rng(9);

  for (Index n : {1, 3, 7, 30}) {
    Tensor x = rand_tensor({n, 16}, rng, false);
    Tensor y = encoder_layer(x, {}, m.sent_enc.layers[0], 4, ctx);
    CHECK(y.shape() == x.shape());
    CHECK(y.all_finite());
  }

  // zeroed sublayers -> residual identity
  ModelParams z = make_model(12, 2);
  zero_stack(z.sent_enc);
  Tensor x = rand_tensor({5, 16}, rng, false);
  Tensor y = encoder_layer(x, {}, z.sent_enc.layers[0], 4, ctx);
  for (Index i = 0; i < x.size(); ++i) CHECK(y.at(i) == x.at(i));

  // PAD content cannot leak into non-PAD outputs
  std::vector<bool> pad{false, false, true};
  Tensor base = rand_tensor({3, 16}, rng, false);
  Tensor out1 = encoder_layer(base, pad, m.sent_enc.layers[0], 4, ctx);
  Tensor perturbed = rand_tensor({3, 16}, rng, false);
  for (Index c = 0; c < 16; ++c) {
    for (Index r = 0; r < 2; ++r) perturbed.mut(r * 16 + c) = base.at(r, c);
    perturbed.mut(2 * 16 + c) = base.at(2, c) + 0.75;
  }
  Tensor out2 = encoder_layer(perturbed, pad, m.sent_enc.layers[0], 4, ctx);
  for (Index r = 0; r < 2; ++r)
    for (Index c = 0; c < 16; ++c) CHECK(out1.at(r, c) == out2.at(r, c));
}

TEST_CASE("encode_sentence") {
  ModelParams m = make_model(12);
  RunContext ctx;
  std::vector<int> sent{5, 7, 9, Vocab::kEos};

  Tensor h2 = encode_sentence(sent, 2, m, ctx);
  CHECK(h2.shape() == Shape{16});

  // different sentence indices differ exactly by p_i - p_j
  Tensor h5 = encode_sentence(sent, 5, m, ctx);
  Tensor p2 = sincos_position(2, 16);
  Tensor p5 = sincos_position(5, 16);
  for (Index i = 0; i < 16; ++i)
    CHECK(h2.at(i) - h5.at(i) == doctest::Approx(p2.at(i) - p5.at(i)).epsilon(1e-9));

  // deterministic in eval mode
  Tensor again = encode_sentence(sent, 2, m, ctx);
  for (Index i = 0; i < 16; ++i) CHECK(again.at(i) == h2.at(i));

  CHECK_THROWS(encode_sentence({5, 7}, 0, m, ctx));
}

TEST_CASE("encode_document") {
  ModelParams m = make_model(12);
  RunContext ctx;

  Document one;
  one.sentences = {{5, Vocab::kEos}};
  SentenceRepr r1 = encode_document(one, m, ctx);
  CHECK(r1.d.shape() == Shape{1, 16});

  CHECK_THROWS(encode_document(Document{}, m, ctx));

  Document doc;
  doc.sentences = {{5, 6, Vocab::kEos}, {7, Vocab::kEos}, {8, 9, 10, Vocab::kEos}};
  SentenceRepr r = encode_document(doc, m, ctx);
  CHECK(r.d.shape() == Shape{3, 16});
  CHECK(r.h_hat.shape() == Shape{3, 16});

  // zeroed document encoder -> d_i == h_hat_i
  ModelParams z = make_model(12, 3);
  zero_stack(z.doc_enc);
  SentenceRepr rz = encode_document(doc, z, ctx);
  for (Index i = 0; i < rz.d.size(); ++i) CHECK(rz.d.at(i) == rz.h_hat.at(i));

  // bidirectionality: perturbing sentence j changes d_i for i != j
  Document perturbed = doc;
  perturbed.sentences[2][0] = 11;
  SentenceRepr rp = encode_document(perturbed, m, ctx);
  double delta = 0.0;
  for (Index c = 0; c < 16; ++c) delta += std::abs(r.d.at(0, c) - rp.d.at(0, c));
  CHECK(delta > 1e-8);
}

TEST_CASE("gradients reach word embeddings") {
  ModelParams m = make_model(12);
  RunContext ctx;
  Document doc;
  doc.sentences = {{5, 6, Vocab::kEos}, {7, Vocab::kEos}};
  m.word_embed.zero_grad();
  backward(sum(encode_document(doc, m, ctx).d));
  for (int id : {5, 6, 7}) {
    double g = 0.0;
    for (Index c = 0; c < 16; ++c) g += std::abs(m.word_embed.grad()[id * 16 + c]);
    CHECK(g > 0.0);
  }
}

TEST_CASE("document stack is permutation-equivariant without positions") {
  // Bypassing the +p_i addition, permuting sentence vectors permutes outputs.
  ModelParams m = make_model(12);
  RunContext ctx;
  Rng rng(13);
  Tensor h = rand_tensor({4, 16}, rng, false);
  Tensor out = run_stack(h, {}, m.doc_enc, 4, ctx);

  std::vector<long> perm{2, 0, 3, 1};
  std::vector<Tensor> rows;
  for (long p : perm) rows.push_back(slice_rows(h, p, p + 1));
  Tensor out_p = run_stack(concat_rows(rows), {}, m.doc_enc, 4, ctx);
  for (size_t i = 0; i < perm.size(); ++i)
    for (Index c = 0; c < 16; ++c)
      CHECK(out_p.at(static_cast<Index>(i), c) ==
            doctest::Approx(out.at(perm[i], c)).epsilon(1e-9));
}

TEST_CASE("config validation") {
  ModelConfig bad = small_config(10);
  bad.heads = 3;  // 16 % 3 != 0
  CHECK_THROWS(bad.validate());
  ModelConfig ff = small_config(10);
  ff.ff = 32;  // not 4H
  CHECK_THROWS(ff.validate());
  ModelConfig ok = ModelConfig::hibert_s(100);
  ok.validate();
  CHECK(ok.hidden == 512);
  CHECK(ModelConfig::hibert_m(100).hidden == 768);
  CHECK(ModelConfig::tiny(100).hidden == 64);
}
