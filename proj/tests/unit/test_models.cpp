#include <doctest.h>

#include <cmath>

#include "mtvqa/corpus/reformat.hpp"
#include "mtvqa/encoding.hpp"
#include "mtvqa/error.hpp"
#include "mtvqa/models.hpp"
#include "support.hpp"

using namespace mtvqa;
using namespace mtvqa::models;
using corpus::QuestionType;

namespace {

textenc::Vocabulary small_vocab() {
  textenc::Vocabulary v;
  for (const char* w : {"what", "colour", "is", "the", "cup", "how", "many"}) v.add(w);
  return v;
}

ModelConfig small_config(Variant variant) {
  ModelConfig cfg;
  cfg.variant = variant;
  cfg.answers = {"red", "blue", "2", "3", "left"};
  cfg.embed_dim = 8;
  cfg.max_len = 6;
  cfg.feature_dim = 10;
  return cfg;
}

std::vector<float> image_of(std::size_t dim, float base) {
  std::vector<float> v(dim);
  for (std::size_t i = 0; i < dim; ++i) v[i] = base + 0.1f * static_cast<float>(i);
  return v;
}

std::vector<std::vector<int>> questions_of(const ModelConfig& cfg) {
  std::vector<std::vector<int>> qs;
  for (std::size_t s = 0; s < cfg.slot_count(); ++s) {
    std::vector<int> q(cfg.max_len, 0);
    q[0] = 1;
    q[1] = static_cast<int>(2 + s % 5);
    qs.push_back(q);
  }
  return qs;
}

}  // namespace

TEST_CASE("variant names round-trip") {
  for (Variant v : {Variant::MtlSimple, Variant::StlSimple, Variant::VqateamStl, Variant::VqateamMtl})
    CHECK(parse_variant(to_string(v)) == v);
  CHECK_FALSE(parse_variant("resnet").has_value());
  CHECK(is_multitask(Variant::VqateamMtl));
  CHECK_FALSE(is_multitask(Variant::StlSimple));
}

TEST_CASE("simple variants have the documented layer widths") {
  ModelConfig cfg = small_config(Variant::MtlSimple);
  cfg.hidden_width = 64;
  const Model mtl(cfg, small_vocab(), 1);
  CHECK(cfg.question_feature_width() == 96);
  CHECK(mtl.parameter("conv.w1.W").value.shape() == ad::Shape{8, 32});
  CHECK(mtl.parameter("conv.w3.W").value.shape() == ad::Shape{24, 32});
  CHECK(mtl.parameter("hidden.W").value.shape() == ad::Shape{64 + 4 * 96, 64});
  for (auto t : cfg.tasks) CHECK(mtl.parameter("head." + std::string(corpus::to_string(t)) + ".W").value.shape() ==
                                 ad::Shape{64, 5});
  const auto logits = mtl.logits(image_of(10, 0.0f), questions_of(cfg));
  REQUIRE(logits.size() == 4);
  for (const auto& row : logits) CHECK(row.size() == 5);

  cfg.variant = Variant::StlSimple;
  const Model stl(cfg, small_vocab(), 1);
  CHECK(stl.slot_count() == 1);
  CHECK(stl.parameter("hidden.W").value.cols() == mtl.parameter("hidden.W").value.cols());
  CHECK(stl.parameter("head.answer.W").value.shape() == ad::Shape{64, 5});
  CHECK_THROWS_AS(stl.parameter("head.colour.W"), ConfigError);
}

TEST_CASE("unshared encoders get one conv bank per slot") {
  ModelConfig cfg = small_config(Variant::MtlSimple);
  cfg.share_question_encoder = false;
  const Model m(cfg, small_vocab(), 1);
  CHECK(m.parameter("conv.count.w2.W").value.shape() == ad::Shape{16, 32});
  CHECK_THROWS_AS(m.parameter("conv.w2.W"), ConfigError);
}

TEST_CASE("vqateam variants stack lstm, product fusion and trunk") {
  ModelConfig cfg = small_config(Variant::VqateamMtl);
  const Model m(cfg, small_vocab(), 1);
  CHECK(m.parameter("lstm.l0.W").value.shape() == ad::Shape{8 + 64, 256});
  CHECK(m.parameter("lstm.l1.W").value.shape() == ad::Shape{128, 256});
  CHECK(m.parameter("question.W").value.shape() == ad::Shape{256, 64});
  CHECK(m.parameter("trunk.0.W").value.shape() == ad::Shape{4 * 64, 128});
  const auto& fb = m.parameter("lstm.l0.b").value;
  for (std::size_t c = 0; c < 256; ++c) CHECK(fb[c] == ((c >= 64 && c < 128) ? 1.0 : 0.0));
  CHECK(m.logits(image_of(10, 0.0f), questions_of(cfg)).size() == 4);
}

TEST_CASE("construction is deterministic in the seed") {
  for (Variant v : {Variant::MtlSimple, Variant::VqateamStl}) {
    const auto cfg = small_config(v);
    CHECK(Model(cfg, small_vocab(), 3) == Model(cfg, small_vocab(), 3));
    CHECK_FALSE(Model(cfg, small_vocab(), 3) == Model(cfg, small_vocab(), 4));
    const Model m(cfg, small_vocab(), 3);
    CHECK(m.logits(image_of(10, 0.2f), questions_of(cfg)) == m.logits(image_of(10, 0.2f), questions_of(cfg)));
    for (double x : m.parameter("embedding").value.row(0)) CHECK(x == 0.0);
  }
}

TEST_CASE("invalid configurations and inputs are rejected") {
  ModelConfig cfg = small_config(Variant::MtlSimple);
  cfg.answers.clear();
  CHECK_THROWS_AS(Model(cfg, small_vocab(), 1), ConfigError);
  cfg = small_config(Variant::MtlSimple);
  cfg.filter_widths.clear();
  CHECK_THROWS_AS(Model(cfg, small_vocab(), 1), ConfigError);
  cfg = small_config(Variant::MtlSimple);
  const Model m(cfg, small_vocab(), 1);
  CHECK_THROWS_AS(m.logits(image_of(9, 0.0f), questions_of(cfg)), ShapeError);
  auto qs = questions_of(cfg);
  qs.pop_back();
  CHECK_THROWS_AS(m.logits(image_of(10, 0.0f), qs), ShapeError);
  ad::Graph g;
  Model stl(small_config(Variant::StlSimple), small_vocab(), 1);
  CHECK_THROWS_AS(forward_mtl_simple(g, stl, image_of(10, 0.0f), questions_of(stl.config())), ConfigError);
  CHECK_THROWS_AS(forward_vqateam(g, stl, image_of(10, 0.0f), questions_of(stl.config())), ConfigError);
}

TEST_CASE("all-pad questions give finite logits in every variant") {
  for (Variant v : {Variant::MtlSimple, Variant::StlSimple, Variant::VqateamStl, Variant::VqateamMtl}) {
    const auto cfg = small_config(v);
    const Model m(cfg, small_vocab(), 2);
    const std::vector<std::vector<int>> pads(cfg.slot_count(), std::vector<int>(cfg.max_len, 0));
    for (const auto& row : m.logits(image_of(10, 0.3f), pads))
      for (double x : row) CHECK(std::isfinite(x));
  }
}

TEST_CASE("an all-pad lstm question encodes to the zero state") {
  ad::Graph g;
  ad::Parameter table("t", ad::Tensor::matrix(2, 1, {0.0, 0.5}));
  ad::Parameter w("w", ad::Tensor({2, 4}, 0.3));
  ad::Parameter b("b", ad::Tensor({1, 4}, 0.1));
  const LstmEncoderVars enc{g.param(table), {{g.param(w), g.param(b)}}, 1};
  const std::vector<int> ids = {0, 0, 0};
  const auto out = g.value(encode_question_lstm(g, enc, ids));
  CHECK(out == ad::Tensor({1, 2}, 0.0));
}

TEST_CASE("a zero image makes vqateam logits equal the head bias") {
  // tanh(0 * W + 0) = 0 zeroes the fused product, so the trunk sees
  // tanh(trunk bias) = 0 and only the head bias survives.
  const auto cfg = small_config(Variant::VqateamMtl);
  Model m(cfg, small_vocab(), 5);
  m.parameter("head.count.b").value = ad::Tensor::row_vector({0.1, -0.2, 0.3, 0.0, 1.5});
  const auto logits = m.logits(std::vector<float>(10, 0.0f), questions_of(cfg));
  CHECK(logits[1] == std::vector<double>{0.1, -0.2, 0.3, 0.0, 1.5});
  CHECK(logits[0] == std::vector<double>(5, 0.0));
}

TEST_CASE("stl vqateam matches a hand-computed two-token forward pass") {
  ModelConfig cfg;
  cfg.variant = Variant::VqateamStl;
  cfg.answers = {"yes", "no"};
  cfg.embed_dim = 1;
  cfg.max_len = 3;
  cfg.feature_dim = 1;
  cfg.lstm_layers = 1;
  cfg.lstm_width = 1;
  cfg.common_width = 1;
  cfg.classifier_widths = {1};
  textenc::Vocabulary vocab;
  vocab.add("a");
  vocab.add("b");
  Model m(cfg, vocab, 1);
  m.parameter("embedding").value = ad::Tensor::matrix(3, 1, {0.0, 0.5, -0.3});
  m.parameter("lstm.l0.W").value = ad::Tensor::matrix(2, 4, {0.1, -0.2, 0.3, 0.4, 0.5, 0.6, -0.7, 0.8});
  m.parameter("lstm.l0.b").value = ad::Tensor::row_vector({0.01, 1.0, -0.02, 0.03});
  m.parameter("question.W").value = ad::Tensor::matrix(2, 1, {0.7, -0.4});
  m.parameter("question.b").value = ad::Tensor::row_vector({0.05});
  m.parameter("image.W").value = ad::Tensor::matrix(1, 1, {0.9});
  m.parameter("image.b").value = ad::Tensor::row_vector({-0.1});
  m.parameter("trunk.0.W").value = ad::Tensor::matrix(1, 1, {1.5});
  m.parameter("trunk.0.b").value = ad::Tensor::row_vector({0.2});
  m.parameter("head.answer.W").value = ad::Tensor::matrix(1, 2, {1.0, -2.0});
  m.parameter("head.answer.b").value = ad::Tensor::row_vector({0.1, 0.3});

  const std::vector<std::vector<int>> q = {{1, 2, 0}};
  const auto logits = m.logits(std::vector<float>{0.6f}, q);
  // float32 image input: 0.6f differs from 0.6 in the 8th digit
  CHECK(logits[0][0] == doctest::Approx(0.32394075143233514).epsilon(1e-6));
  CHECK(logits[0][1] == doctest::Approx(-0.14788150286467028).epsilon(1e-6));
}

TEST_CASE("multitask loss is the sum of per-head losses") {
  ad::Graph g;
  const auto a = g.constant(ad::Tensor::row_vector({2.0, 1.0, 0.0}));
  const auto b = g.constant(ad::Tensor::row_vector({0.0, 0.5, -1.0}));
  const std::vector<ad::Var> both = {a, b};
  const std::vector<ad::Var> only_a = {a};
  const std::vector<ad::Var> only_b = {b};
  const double joint = g.value(multitask_loss(g, both, std::vector<int>{0, 2}, std::vector<std::uint8_t>{1, 1}))[0];
  const double la = g.value(multitask_loss(g, only_a, std::vector<int>{0}, std::vector<std::uint8_t>{1}))[0];
  const double lb = g.value(multitask_loss(g, only_b, std::vector<int>{2}, std::vector<std::uint8_t>{1}))[0];
  CHECK(joint == doctest::Approx(la + lb).epsilon(1e-15));
  CHECK(la == doctest::Approx(0.40760596444438013).epsilon(1e-15));
  const double masked = g.value(multitask_loss(g, both, std::vector<int>{0, 2}, std::vector<std::uint8_t>{1, 0}))[0];
  CHECK(masked == la);
}

TEST_CASE("masked heads receive exactly zero gradient") {
  for (Variant v : {Variant::MtlSimple, Variant::VqateamMtl}) {
    const auto cfg = small_config(v);
    Model m(cfg, small_vocab(), 7);
    m.zero_grad();
    ad::Graph g;
    const auto logits = m.forward(g, image_of(10, 0.1f), questions_of(cfg));
    const std::vector<int> targets = {0, 2, 1, 4};
    const std::vector<std::uint8_t> mask = {1, 0, 1, 0};
    g.backward(multitask_loss(g, logits, targets, mask));
    for (std::size_t s : {1u, 3u}) {
      const std::string tag = "head." + std::string(corpus::to_string(cfg.tasks[s]));
      CHECK(m.parameter(tag + ".W").grad == ad::Tensor(m.parameter(tag + ".W").grad.shape(), 0.0));
      CHECK(m.parameter(tag + ".b").grad == ad::Tensor(m.parameter(tag + ".b").grad.shape(), 0.0));
    }
    const std::string live = "head." + std::string(corpus::to_string(cfg.tasks[0]));
    CHECK_FALSE(m.parameter(live + ".b").grad == ad::Tensor(m.parameter(live + ".b").grad.shape(), 0.0));
  }
}

TEST_CASE("inference graphs leave parameter gradients untouched") {
  const auto cfg = small_config(Variant::MtlSimple);
  Model m(cfg, small_vocab(), 7);
  m.zero_grad();
  const Model& cm = m;
  ad::Graph g;
  const auto logits = cm.forward(g, image_of(10, 0.1f), questions_of(cfg));
  g.backward(multitask_loss(g, logits, std::vector<int>{0, 1, 2, 3}, std::vector<std::uint8_t>{1, 1, 1, 1}));
  for (const auto& p : m.parameters()) CHECK(p.grad == ad::Tensor(p.grad.shape(), 0.0));
}

TEST_CASE("model gradients match finite differences on small configurations") {
  for (const auto& c : testing::model_gradient_suite(10)) {
    INFO(c.name << " worst " << c.worst << " rel " << c.max_rel_error);
    CHECK(c.passed);
  }
}

TEST_CASE("checkpoints restore the exact model") {
  const auto dir = testing::scratch_dir("model_ckpt");
  for (Variant v : {Variant::MtlSimple, Variant::VqateamStl}) {
    ModelConfig cfg = small_config(v);
    cfg.tasks = {QuestionType::Colour, QuestionType::Size};
    const Model m(cfg, small_vocab(), 9);
    for (auto fmt : {ad::CheckpointFormat::Text, ad::CheckpointFormat::Binary}) {
      const auto path = dir / (std::string(to_string(v)) + (fmt == ad::CheckpointFormat::Text ? ".txt" : ".bin"));
      m.save(path, fmt);
      const Model back = Model::load(path);
      CHECK(back == m);
      CHECK(back.config().tasks == cfg.tasks);
      CHECK(back.vocab() == m.vocab());
    }
  }
  ad::Checkpoint foreign;
  foreign.meta = "{\"format\":\"something else\"}";
  ad::save_checkpoint(dir / "foreign.txt", foreign, ad::CheckpointFormat::Text);
  CHECK_THROWS_AS(Model::load(dir / "foreign.txt"), FormatError);
  foreign.meta = "not json";
  ad::save_checkpoint(dir / "garbage.txt", foreign, ad::CheckpointFormat::Text);
  CHECK_THROWS_AS(Model::load(dir / "garbage.txt"), FormatError);
}

TEST_CASE("config json round-trips every field") {
  ModelConfig cfg = small_config(Variant::VqateamMtl);
  cfg.tasks = corpus::cocoqa_task_set();
  cfg.filter_widths = {2, 4};
  cfg.share_question_encoder = false;
  cfg.classifier_widths = {32, 16};
  const ModelConfig back = config_from_json(config_to_json(cfg));
  CHECK(config_to_json(back) == config_to_json(cfg));
  CHECK(back.variant == cfg.variant);
  CHECK(back.classifier_widths == cfg.classifier_widths);
  CHECK_THROWS_AS(config_from_json("{\"variant\":\"nope\"}"), FormatError);
}

TEST_CASE("encoding maps slots, masks and unseen answers") {
  const std::vector<corpus::LabeledQuestion> qs = {
      {"i1", {"what", "colour", "is", "the", "cup"}, "red", QuestionType::Colour},
      {"i1", {"how", "many", "cup"}, "2", QuestionType::Count},
  };
  const auto tasks = corpus::daquar_task_set();
  const auto mt = corpus::reformat_multitask(corpus::group_by_image(qs), tasks);
  const auto vocab = question_vocab(mt);
  const auto labels = answer_labels(mt);
  CHECK(labels.size() == 2);
  const auto enc = encode_multitask(mt, tasks, vocab, labels, 4);
  REQUIRE(enc.size() == 1);
  CHECK(enc[0].mask == std::vector<std::uint8_t>{1, 1, 0, 0});
  CHECK(enc[0].targets == std::vector<int>{0, 1, -1, -1});
  CHECK(enc[0].questions[0].size() == 4);
  CHECK(enc[0].questions[2] == std::vector<int>(4, 0));

  const textenc::LabelSet only_red({"red"});
  const auto single = encode_single(corpus::flatten_single_task(mt), vocab, only_red, 4);
  REQUIRE(single.size() == 2);
  CHECK(single[0].targets == std::vector<int>{0});
  CHECK(single[1].targets == std::vector<int>{-1});
  CHECK(single[1].mask == std::vector<std::uint8_t>{1});
  CHECK(single[1].types == std::vector<QuestionType>{QuestionType::Count});
}
