#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "mtvqa/autodiff/checkpoint.hpp"
#include "mtvqa/autodiff/graph.hpp"
#include "mtvqa/autodiff/ops.hpp"
#include "mtvqa/corpus/types.hpp"
#include "mtvqa/textenc.hpp"

namespace mtvqa::models {

enum class Variant { MtlSimple, StlSimple, VqateamStl, VqateamMtl };

std::string_view to_string(Variant v);
std::optional<Variant> parse_variant(std::string_view s);
bool is_multitask(Variant v);

struct ModelConfig {
  Variant variant = Variant::MtlSimple;
  corpus::TaskSet tasks = corpus::daquar_task_set();
  std::vector<std::string> answers;  // shared by every head
  std::size_t embed_dim = 50;
  std::size_t max_len = 25;
  std::vector<std::size_t> filter_widths = {1, 2, 3};
  std::size_t filters_per_width = 32;
  std::size_t hidden_width = 128;
  std::size_t feature_dim = 0;
  std::size_t image_width = 64;
  /// One conv encoder applied to every slot; false gives each slot its own.
  bool share_question_encoder = true;
  std::size_t lstm_layers = 2;
  std::size_t lstm_width = 64;
  std::size_t common_width = 64;
  std::vector<std::size_t> classifier_widths = {128};

  /// Throws ConfigError on empty widths, zero sizes or an empty answer set.
  void validate() const;
  /// Question inputs / answer heads: |tasks| for multi-task variants, else 1.
  std::size_t slot_count() const { return is_multitask(variant) ? tasks.size() : 1; }
  std::size_t question_feature_width() const { return filter_widths.size() * filters_per_width; }
};

std::string config_to_json(const ModelConfig& cfg);
ModelConfig config_from_json(std::string_view json);

/// Weight handles of a conv sentence encoder inside one graph.
struct ConvEncoderVars {
  ad::Var table;
  std::vector<std::size_t> widths;
  std::vector<ad::Var> w;
  std::vector<ad::Var> b;
};

/// embed -> per-width valid conv -> tanh -> max over time -> concat.
/// Output is [1, widths.size() * filters].
ad::Var encode_question_conv(ad::Graph& g, const ConvEncoderVars& enc, std::span<const int> ids);

struct LstmEncoderVars {
  ad::Var table;
  std::vector<ad::LstmWeights> layers;
  std::size_t width = 0;
};

/// Runs the stacked LSTM over the ids up to the last non-pad position and
/// returns [h_1, c_1, ..., h_L, c_L] as a [1, 2*L*width] row. An all-pad
/// question runs zero steps and yields the zero state.
ad::Var encode_question_lstm(ad::Graph& g, const LstmEncoderVars& enc, std::span<const int> ids);

/// A network variant with its named parameters and question vocabulary.
/// Parameters are initialised from `seed`: weights Glorot-uniform, biases
/// zero, LSTM forget-gate bias 1. The embedding comes from `pretrained`
/// when given, otherwise uniform(+-0.5/embed_dim); its pad row is zero.
class Model {
 public:
  Model(ModelConfig cfg, textenc::Vocabulary vocab, std::uint64_t seed,
        const textenc::EmbeddingTable* pretrained = nullptr);

  const ModelConfig& config() const noexcept { return cfg_; }
  const textenc::Vocabulary& vocab() const noexcept { return vocab_; }
  Variant variant() const noexcept { return cfg_.variant; }
  std::size_t slot_count() const noexcept { return cfg_.slot_count(); }

  std::span<ad::Parameter> parameters() noexcept { return params_; }
  std::span<const ad::Parameter> parameters() const noexcept { return params_; }
  ad::Parameter& parameter(std::string_view name);
  const ad::Parameter& parameter(std::string_view name) const;
  void zero_grad();

  /// Per-slot logits. `questions` holds slot_count() id sequences of length
  /// max_len. The non-const overload wires parameters for backprop; the
  /// const one builds an inference-only graph.
  std::vector<ad::Var> forward(ad::Graph& g, std::span<const float> image,
                               std::span<const std::vector<int>> questions);
  std::vector<ad::Var> forward(ad::Graph& g, std::span<const float> image,
                               std::span<const std::vector<int>> questions) const;

  /// Convenience inference returning the logit rows.
  std::vector<std::vector<double>> logits(std::span<const float> image,
                                          std::span<const std::vector<int>> questions) const;

  /// Checkpoint meta carries the config and vocabulary; load() rebuilds
  /// the architecture from it and checks every parameter shape.
  void save(const std::filesystem::path& path, ad::CheckpointFormat format) const;
  static Model load(const std::filesystem::path& path);

  friend bool operator==(const Model& a, const Model& b);

 private:
  template <class Self>
  static std::vector<ad::Var> forward_impl(Self& self, ad::Graph& g, std::span<const float> image,
                                           std::span<const std::vector<int>> questions);

  std::size_t add_param(const std::string& name, ad::Shape shape);
  void build_layout();
  void initialise(std::uint64_t seed, const textenc::EmbeddingTable* pretrained);

  ModelConfig cfg_;
  textenc::Vocabulary vocab_;
  std::vector<ad::Parameter> params_;

  struct Indices {
    std::size_t embedding = 0;
    std::size_t image_w = 0, image_b = 0;
    std::vector<std::vector<std::size_t>> conv_w, conv_b;  // [bank][width]
    std::size_t hidden_w = 0, hidden_b = 0;
    std::vector<std::size_t> lstm_w, lstm_b;
    std::size_t question_w = 0, question_b = 0;
    std::vector<std::size_t> trunk_w, trunk_b;
    std::vector<std::size_t> head_w, head_b;
  } idx_;
};

/// Variant-checked entry points; each throws ConfigError when `model` is
/// of another variant.
std::vector<ad::Var> forward_mtl_simple(ad::Graph& g, Model& model, std::span<const float> image,
                                        std::span<const std::vector<int>> questions);
ad::Var forward_stl_simple(ad::Graph& g, Model& model, std::span<const float> image, const std::vector<int>& question);
std::vector<ad::Var> forward_vqateam(ad::Graph& g, Model& model, std::span<const float> image,
                                     std::span<const std::vector<int>> questions);

/// Sum of softmax cross entropy over unmasked heads.
ad::Var multitask_loss(ad::Graph& g, std::span<const ad::Var> logits, std::span<const int> targets,
                       std::span<const std::uint8_t> mask);

}  // namespace mtvqa::models
