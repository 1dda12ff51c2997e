#include "mtvqa/models.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <json.hpp>

#include "mtvqa/error.hpp"

namespace mtvqa::models {

namespace {

using nlohmann::json;

constexpr const char* kMetaFormat = "mtvqa-model v1";

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError("models", message);
}

std::string slot_name(const ModelConfig& cfg, std::size_t slot) {
  if (!is_multitask(cfg.variant)) return "answer";
  return std::string(corpus::to_string(cfg.tasks[slot]));
}

// Resolves each parameter to one graph leaf per forward pass.
template <class Params>
class Binder {
 public:
  Binder(ad::Graph& g, Params& params) : g_(g), params_(params), leaves_(params.size()) {}

  ad::Var operator()(std::size_t index) {
    if (!leaves_[index]) leaves_[index] = g_.param(params_[index]);
    return *leaves_[index];
  }

 private:
  ad::Graph& g_;
  Params& params_;
  std::vector<std::optional<ad::Var>> leaves_;
};

}  // namespace

std::string_view to_string(Variant v) {
  switch (v) {
    case Variant::MtlSimple: return "mtl_simple";
    case Variant::StlSimple: return "stl_simple";
    case Variant::VqateamStl: return "vqateam_stl";
    case Variant::VqateamMtl: return "vqateam_mtl";
  }
  return "unknown";
}

std::optional<Variant> parse_variant(std::string_view s) {
  for (Variant v : {Variant::MtlSimple, Variant::StlSimple, Variant::VqateamStl, Variant::VqateamMtl}) {
    if (to_string(v) == s) return v;
  }
  return std::nullopt;
}

bool is_multitask(Variant v) { return v == Variant::MtlSimple || v == Variant::VqateamMtl; }

void ModelConfig::validate() const {
  if (is_multitask(variant)) {
    corpus::validate_task_set(tasks);
  } else {
    require(!tasks.empty(), "task set must not be empty");
  }
  require(!answers.empty(), "answer vocabulary is empty");
  require(embed_dim > 0, "embed_dim must be positive");
  require(max_len > 0, "max_len must be positive");
  require(feature_dim > 0, "feature_dim must be positive");
  require(image_width > 0, "image_width must be positive");
  const bool simple = variant == Variant::MtlSimple || variant == Variant::StlSimple;
  if (simple) {
    require(!filter_widths.empty(), "filter_widths must not be empty");
    for (std::size_t w : filter_widths) {
      require(w > 0, "filter widths must be positive");
      require(w <= max_len, "filter width " + std::to_string(w) + " exceeds max_len " + std::to_string(max_len));
    }
    require(filters_per_width > 0, "filters_per_width must be positive");
    require(hidden_width > 0, "hidden_width must be positive");
  } else {
    require(lstm_layers > 0, "lstm_layers must be positive");
    require(lstm_width > 0, "lstm_width must be positive");
    require(common_width > 0, "common_width must be positive");
    for (std::size_t w : classifier_widths) require(w > 0, "classifier widths must be positive");
  }
}

std::string config_to_json(const ModelConfig& cfg) {
  json j;
  j["variant"] = std::string(to_string(cfg.variant));
  j["tasks"] = corpus::task_set_string(cfg.tasks);
  j["answers"] = cfg.answers;
  j["embed_dim"] = cfg.embed_dim;
  j["max_len"] = cfg.max_len;
  j["filter_widths"] = cfg.filter_widths;
  j["filters_per_width"] = cfg.filters_per_width;
  j["hidden_width"] = cfg.hidden_width;
  j["feature_dim"] = cfg.feature_dim;
  j["image_width"] = cfg.image_width;
  j["share_question_encoder"] = cfg.share_question_encoder;
  j["lstm_layers"] = cfg.lstm_layers;
  j["lstm_width"] = cfg.lstm_width;
  j["common_width"] = cfg.common_width;
  j["classifier_widths"] = cfg.classifier_widths;
  return j.dump();
}

ModelConfig config_from_json(std::string_view text) {
  ModelConfig cfg;
  try {
    const json j = json::parse(text);
    const auto variant = parse_variant(j.at("variant").get<std::string>());
    if (!variant) throw FormatError("models", "unknown variant in model config");
    cfg.variant = *variant;
    const auto tasks = j.at("tasks").get<std::string>();
    cfg.tasks.clear();
    std::size_t start = 0;
    while (start <= tasks.size()) {
      const auto comma = std::min(tasks.find(',', start), tasks.size());
      const auto t = corpus::parse_question_type(std::string_view(tasks).substr(start, comma - start));
      if (!t) throw FormatError("models", "unknown task in model config: " + tasks);
      cfg.tasks.push_back(*t);
      start = comma + 1;
    }
    cfg.answers = j.at("answers").get<std::vector<std::string>>();
    cfg.embed_dim = j.at("embed_dim").get<std::size_t>();
    cfg.max_len = j.at("max_len").get<std::size_t>();
    cfg.filter_widths = j.at("filter_widths").get<std::vector<std::size_t>>();
    cfg.filters_per_width = j.at("filters_per_width").get<std::size_t>();
    cfg.hidden_width = j.at("hidden_width").get<std::size_t>();
    cfg.feature_dim = j.at("feature_dim").get<std::size_t>();
    cfg.image_width = j.at("image_width").get<std::size_t>();
    cfg.share_question_encoder = j.at("share_question_encoder").get<bool>();
    cfg.lstm_layers = j.at("lstm_layers").get<std::size_t>();
    cfg.lstm_width = j.at("lstm_width").get<std::size_t>();
    cfg.common_width = j.at("common_width").get<std::size_t>();
    cfg.classifier_widths = j.at("classifier_widths").get<std::vector<std::size_t>>();
  } catch (const json::exception& e) {
    throw FormatError("models", std::string("bad model config: ") + e.what());
  }
  return cfg;
}

ad::Var encode_question_conv(ad::Graph& g, const ConvEncoderVars& enc, std::span<const int> ids) {
  const ad::Var emb = ad::embedding(g, enc.table, ids);
  std::vector<ad::Var> pooled;
  pooled.reserve(enc.widths.size());
  for (std::size_t k = 0; k < enc.widths.size(); ++k) {
    const ad::Var conv = ad::conv1d(g, emb, enc.w[k], enc.b[k], enc.widths[k]);
    pooled.push_back(ad::max_over_time(g, ad::tanh(g, conv)));
  }
  return pooled.size() == 1 ? pooled.front() : ad::concat(g, pooled);
}

ad::Var encode_question_lstm(ad::Graph& g, const LstmEncoderVars& enc, std::span<const int> ids) {
  std::size_t length = ids.size();
  while (length > 0 && ids[length - 1] == textenc::Vocabulary::kPad) --length;
  const std::size_t layers = enc.layers.size();
  if (length == 0) return g.constant(ad::Tensor({1, 2 * layers * enc.width}));

  std::vector<ad::LstmState> state(layers);
  for (auto& s : state) {
    s.h = g.constant(ad::Tensor({1, enc.width}));
    s.c = g.constant(ad::Tensor({1, enc.width}));
  }
  const ad::Var emb = ad::embedding(g, enc.table, ids.first(length));
  for (std::size_t t = 0; t < length; ++t) {
    ad::Var x = ad::select_row(g, emb, t);
    for (std::size_t l = 0; l < layers; ++l) {
      state[l] = ad::lstm_step(g, x, state[l], enc.layers[l]);
      x = state[l].h;
    }
  }
  std::vector<ad::Var> parts;
  parts.reserve(2 * layers);
  for (const auto& s : state) {
    parts.push_back(s.h);
    parts.push_back(s.c);
  }
  return ad::concat(g, parts);
}

Model::Model(ModelConfig cfg, textenc::Vocabulary vocab, std::uint64_t seed, const textenc::EmbeddingTable* pretrained)
    : cfg_(std::move(cfg)), vocab_(std::move(vocab)) {
  cfg_.validate();
  require(vocab_.size() >= 1, "question vocabulary is empty");
  build_layout();
  initialise(seed, pretrained);
}

std::size_t Model::add_param(const std::string& name, ad::Shape shape) {
  params_.emplace_back(name, ad::Tensor(std::move(shape)));
  return params_.size() - 1;
}

void Model::build_layout() {
  const std::size_t slots = cfg_.slot_count();
  const std::size_t answers = cfg_.answers.size();
  idx_.embedding = add_param("embedding", {vocab_.size(), cfg_.embed_dim});

  const bool simple = cfg_.variant == Variant::MtlSimple || cfg_.variant == Variant::StlSimple;
  std::size_t trunk_in = 0;
  if (simple) {
    idx_.image_w = add_param("image.W", {cfg_.feature_dim, cfg_.image_width});
    idx_.image_b = add_param("image.b", {1, cfg_.image_width});
    const std::size_t banks = cfg_.share_question_encoder ? 1 : slots;
    idx_.conv_w.resize(banks);
    idx_.conv_b.resize(banks);
    for (std::size_t bank = 0; bank < banks; ++bank) {
      const std::string prefix =
          cfg_.share_question_encoder ? std::string("conv") : "conv." + slot_name(cfg_, bank);
      for (std::size_t w : cfg_.filter_widths) {
        const std::string tag = prefix + ".w" + std::to_string(w);
        idx_.conv_w[bank].push_back(add_param(tag + ".W", {w * cfg_.embed_dim, cfg_.filters_per_width}));
        idx_.conv_b[bank].push_back(add_param(tag + ".b", {1, cfg_.filters_per_width}));
      }
    }
    const std::size_t in = cfg_.image_width + slots * cfg_.question_feature_width();
    idx_.hidden_w = add_param("hidden.W", {in, cfg_.hidden_width});
    idx_.hidden_b = add_param("hidden.b", {1, cfg_.hidden_width});
    trunk_in = cfg_.hidden_width;
  } else {
    const std::size_t h = cfg_.lstm_width;
    for (std::size_t l = 0; l < cfg_.lstm_layers; ++l) {
      const std::size_t in = (l == 0 ? cfg_.embed_dim : h) + h;
      idx_.lstm_w.push_back(add_param("lstm.l" + std::to_string(l) + ".W", {in, 4 * h}));
      idx_.lstm_b.push_back(add_param("lstm.l" + std::to_string(l) + ".b", {1, 4 * h}));
    }
    idx_.question_w = add_param("question.W", {2 * cfg_.lstm_layers * h, cfg_.common_width});
    idx_.question_b = add_param("question.b", {1, cfg_.common_width});
    idx_.image_w = add_param("image.W", {cfg_.feature_dim, cfg_.common_width});
    idx_.image_b = add_param("image.b", {1, cfg_.common_width});
    std::size_t in = slots * cfg_.common_width;
    for (std::size_t k = 0; k < cfg_.classifier_widths.size(); ++k) {
      idx_.trunk_w.push_back(add_param("trunk." + std::to_string(k) + ".W", {in, cfg_.classifier_widths[k]}));
      idx_.trunk_b.push_back(add_param("trunk." + std::to_string(k) + ".b", {1, cfg_.classifier_widths[k]}));
      in = cfg_.classifier_widths[k];
    }
    trunk_in = in;
  }
  for (std::size_t s = 0; s < slots; ++s) {
    const std::string tag = "head." + slot_name(cfg_, s);
    idx_.head_w.push_back(add_param(tag + ".W", {trunk_in, answers}));
    idx_.head_b.push_back(add_param(tag + ".b", {1, answers}));
  }
}

void Model::initialise(std::uint64_t seed, const textenc::EmbeddingTable* pretrained) {
  std::mt19937_64 rng(seed);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& p = params_[i];
    if (i == idx_.embedding) {
      if (pretrained) {
        if (pretrained->weights.shape() != p.value.shape()) {
          throw ConfigError("models", "pretrained embedding shape " + ad::shape_string(pretrained->weights.shape()) +
                                          " does not match " + ad::shape_string(p.value.shape()));
        }
        p.value = pretrained->weights;
        p.trainable = pretrained->trainable;
      } else {
        p.value = textenc::random_embeddings(vocab_, cfg_.embed_dim, rng()).weights;
      }
      continue;
    }
    const bool bias = p.value.rows() == 1 && p.name.ends_with(".b");
    if (bias) {
      const bool lstm = p.name.starts_with("lstm.");
      if (lstm) {
        // forget gate occupies the second quarter of the gate block
        const std::size_t h = p.value.cols() / 4;
        for (std::size_t c = h; c < 2 * h; ++c) p.value[c] = 1.0;
      }
      continue;
    }
    const double fan_in = static_cast<double>(p.value.rows());
    const double fan_out = static_cast<double>(p.value.cols());
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    for (auto& x : p.value.values()) x = dist(rng);
  }
}

ad::Parameter& Model::parameter(std::string_view name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("models", "no parameter named " + std::string(name));
}

const ad::Parameter& Model::parameter(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p;
  throw ConfigError("models", "no parameter named " + std::string(name));
}

void Model::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

template <class Self>
std::vector<ad::Var> Model::forward_impl(Self& self, ad::Graph& g, std::span<const float> image,
                                         std::span<const std::vector<int>> questions) {
  const ModelConfig& cfg = self.cfg_;
  const std::size_t slots = cfg.slot_count();
  if (image.size() != cfg.feature_dim) {
    throw ShapeError("model: image feature has " + std::to_string(image.size()) + " values, expected " +
                     std::to_string(cfg.feature_dim));
  }
  if (questions.size() != slots) {
    throw ShapeError("model: got " + std::to_string(questions.size()) + " question slots, expected " +
                     std::to_string(slots));
  }
  for (const auto& q : questions) {
    if (q.size() != cfg.max_len) {
      throw ShapeError("model: question has " + std::to_string(q.size()) + " ids, expected " +
                       std::to_string(cfg.max_len));
    }
  }

  Binder binder(g, self.params_);
  const auto& idx = self.idx_;
  ad::Tensor img_t({1, cfg.feature_dim});
  std::copy(image.begin(), image.end(), img_t.values().begin());
  const ad::Var img_in = g.constant(std::move(img_t));
  const ad::Var table = binder(idx.embedding);

  std::vector<ad::Var> heads_in;
  const bool simple = cfg.variant == Variant::MtlSimple || cfg.variant == Variant::StlSimple;
  ad::Var top{};
  if (simple) {
    std::vector<ad::Var> parts;
    parts.push_back(ad::affine(g, img_in, binder(idx.image_w), binder(idx.image_b)));
    for (std::size_t s = 0; s < slots; ++s) {
      const std::size_t bank = cfg.share_question_encoder ? 0 : s;
      ConvEncoderVars enc{table, cfg.filter_widths, {}, {}};
      for (std::size_t k = 0; k < cfg.filter_widths.size(); ++k) {
        enc.w.push_back(binder(idx.conv_w[bank][k]));
        enc.b.push_back(binder(idx.conv_b[bank][k]));
      }
      parts.push_back(encode_question_conv(g, enc, questions[s]));
    }
    top = ad::tanh(g, ad::affine(g, ad::concat(g, parts), binder(idx.hidden_w), binder(idx.hidden_b)));
  } else {
    LstmEncoderVars enc{table, {}, cfg.lstm_width};
    for (std::size_t l = 0; l < idx.lstm_w.size(); ++l) enc.layers.push_back({binder(idx.lstm_w[l]), binder(idx.lstm_b[l])});
    const ad::Var img = ad::tanh(g, ad::affine(g, img_in, binder(idx.image_w), binder(idx.image_b)));
    std::vector<ad::Var> products;
    for (std::size_t s = 0; s < slots; ++s) {
      const ad::Var state = encode_question_lstm(g, enc, questions[s]);
      const ad::Var q = ad::tanh(g, ad::affine(g, state, binder(idx.question_w), binder(idx.question_b)));
      products.push_back(ad::mul(g, q, img));
    }
    top = products.size() == 1 ? products.front() : ad::concat(g, products);
    for (std::size_t k = 0; k < idx.trunk_w.size(); ++k) {
      top = ad::tanh(g, ad::affine(g, top, binder(idx.trunk_w[k]), binder(idx.trunk_b[k])));
    }
  }
  std::vector<ad::Var> logits;
  logits.reserve(slots);
  for (std::size_t s = 0; s < slots; ++s) {
    logits.push_back(ad::affine(g, top, binder(idx.head_w[s]), binder(idx.head_b[s])));
  }
  return logits;
}

std::vector<ad::Var> Model::forward(ad::Graph& g, std::span<const float> image,
                                    std::span<const std::vector<int>> questions) {
  return forward_impl(*this, g, image, questions);
}

std::vector<ad::Var> Model::forward(ad::Graph& g, std::span<const float> image,
                                    std::span<const std::vector<int>> questions) const {
  return forward_impl(*this, g, image, questions);
}

std::vector<std::vector<double>> Model::logits(std::span<const float> image,
                                               std::span<const std::vector<int>> questions) const {
  ad::Graph g;
  const auto out = forward(g, image, questions);
  std::vector<std::vector<double>> rows;
  rows.reserve(out.size());
  for (ad::Var v : out) {
    const auto vals = g.value(v).values();
    rows.emplace_back(vals.begin(), vals.end());
  }
  return rows;
}

void Model::save(const std::filesystem::path& path, ad::CheckpointFormat format) const {
  json meta;
  meta["format"] = kMetaFormat;
  meta["config"] = json::parse(config_to_json(cfg_));
  meta["vocab"] = vocab_.tokens();
  ad::Checkpoint ckpt;
  ckpt.meta = meta.dump();
  ckpt.params = params_;
  save_checkpoint(path, ckpt, format);
}

Model Model::load(const std::filesystem::path& path) {
  ad::Checkpoint ckpt = ad::load_checkpoint(path);
  json meta;
  try {
    meta = json::parse(ckpt.meta);
  } catch (const json::exception& e) {
    throw FormatError("models", path.string() + ": checkpoint meta is not JSON: " + e.what());
  }
  if (!meta.is_object() || meta.value("format", "") != kMetaFormat) {
    throw FormatError("models", path.string() + ": not a model checkpoint");
  }
  ModelConfig cfg = config_from_json(meta.at("config").dump());
  textenc::Vocabulary vocab = textenc::Vocabulary::from_tokens(meta.at("vocab").get<std::vector<std::string>>());
  Model model(std::move(cfg), std::move(vocab), 0);
  if (ckpt.params.size() != model.params_.size()) {
    throw FormatError("models", path.string() + ": checkpoint has " + std::to_string(ckpt.params.size()) +
                                    " parameters, architecture needs " + std::to_string(model.params_.size()));
  }
  for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
    auto& dst = model.params_[i];
    const auto& src = ckpt.params[i];
    if (src.name != dst.name || src.value.shape() != dst.value.shape()) {
      throw FormatError("models", path.string() + ": parameter " + src.name + " " + ad::shape_string(src.value.shape()) +
                                      " does not match " + dst.name + " " + ad::shape_string(dst.value.shape()));
    }
    dst.value = src.value;
    dst.zero_grad();
  }
  return model;
}

bool operator==(const Model& a, const Model& b) {
  if (config_to_json(a.cfg_) != config_to_json(b.cfg_) || !(a.vocab_ == b.vocab_)) return false;
  if (a.params_.size() != b.params_.size()) return false;
  for (std::size_t i = 0; i < a.params_.size(); ++i) {
    if (a.params_[i].name != b.params_[i].name || !(a.params_[i].value == b.params_[i].value)) return false;
  }
  return true;
}

std::vector<ad::Var> forward_mtl_simple(ad::Graph& g, Model& model, std::span<const float> image,
                                        std::span<const std::vector<int>> questions) {
  require(model.variant() == Variant::MtlSimple, "forward_mtl_simple needs an mtl_simple model");
  return model.forward(g, image, questions);
}

ad::Var forward_stl_simple(ad::Graph& g, Model& model, std::span<const float> image, const std::vector<int>& question) {
  require(model.variant() == Variant::StlSimple, "forward_stl_simple needs an stl_simple model");
  return model.forward(g, image, std::span<const std::vector<int>>(&question, 1)).front();
}

std::vector<ad::Var> forward_vqateam(ad::Graph& g, Model& model, std::span<const float> image,
                                     std::span<const std::vector<int>> questions) {
  require(model.variant() == Variant::VqateamStl || model.variant() == Variant::VqateamMtl,
          "forward_vqateam needs a vqateam model");
  return model.forward(g, image, questions);
}

ad::Var multitask_loss(ad::Graph& g, std::span<const ad::Var> logits, std::span<const int> targets,
                       std::span<const std::uint8_t> mask) {
  return ad::softmax_cross_entropy_masked(g, logits, targets, mask);
}

}  // namespace mtvqa::models
