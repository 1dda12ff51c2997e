#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtvqa/autodiff/optim.hpp"
#include "mtvqa/corpus.hpp"
#include "mtvqa/encoding.hpp"
#include "mtvqa/models.hpp"

namespace mtvqa::harness {

/// Which loss drives early stopping and best-checkpoint selection.
/// Training monitors the full training set and skips the split; it exists
/// for memorisation checks on tiny corpora.
enum class Monitor { Validation, Training };

struct TrainConfig {
  std::size_t batch_size = 64;
  std::size_t max_epochs_nadam = 200;
  std::size_t max_epochs_sgd = 50;
  std::size_t patience = 10;
  double min_delta = 1e-4;
  ad::NadamConfig nadam;
  ad::SgdConfig sgd;
  std::uint64_t seed = 1;
  double validation_fraction = 0.1;
  Monitor monitor = Monitor::Validation;

  /// Throws ConfigError: patience >= 1, batch_size >= 1, 0 < fraction < 1.
  void validate() const;
};

/// `key=value` override by flat name (batch_size, max_epochs_nadam,
/// max_epochs_sgd, patience, min_delta, nadam.lr, nadam.beta1, nadam.beta2,
/// nadam.eps, sgd.lr, sgd.momentum, seed, validation_fraction, monitor).
/// Returns false for unknown keys; throws ConfigError for bad values.
bool apply_override(TrainConfig& cfg, std::string_view key, std::string_view value);
/// Same for model shape keys (embed_dim, max_len, filter_widths as "1,2,3",
/// filters_per_width, hidden_width, image_width, share_question_encoder,
/// lstm_layers, lstm_width, common_width, classifier_widths).
bool apply_override(models::ModelConfig& cfg, std::string_view key, std::string_view value);

enum class Phase { Nadam, Sgd };
std::string_view to_string(Phase p);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, continuous across phases
  Phase phase = Phase::Nadam;
  double train_loss = 0.0;  // mean batch loss during the epoch
  double val_loss = 0.0;    // mean loss on the monitored set after the epoch
  double val_accuracy = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;
  /// Epoch with the lowest monitored loss inside each phase.
  std::optional<std::size_t> converged_nadam;
  std::optional<std::size_t> converged_sgd;
  /// Epoch whose parameters were returned; 0 means the initialisation.
  std::size_t best_epoch = 0;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

/// Tab-separated: `mtvqa-history v1`, `converged\t<nadam>\t<sgd>\t<best>`
/// (`-` when absent), a column header, then one row per epoch.
void save_history(const std::filesystem::path& path, const TrainHistory& history);
TrainHistory load_history(const std::filesystem::path& path);
std::string history_tsv(const TrainHistory& history);

/// Splits image ids (sorted, then shuffled by `seed`) so that
/// round(fraction * images) of them, at least one and at most all but one,
/// hold out. Returns (train indices, validation indices) into `data`.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> split_by_image(const models::EncodedDataset& data,
                                                                              double fraction, std::uint64_t seed);

/// Two-phase training: Nadam until `patience` epochs pass without a
/// monitored-loss improvement above `min_delta` (or the epoch cap), then
/// SGD with momentum from the best phase-one parameters under the same
/// rule. The model ends holding the best parameters seen in either phase.
/// Throws NumericError naming epoch and batch on a non-finite loss.
TrainHistory train(models::Model& model, const models::EncodedDataset& data, const corpus::FeatureStore& features,
                   const TrainConfig& cfg);

struct TypeScore {
  std::size_t correct = 0;
  std::size_t total = 0;
  friend bool operator==(const TypeScore&, const TypeScore&) = default;
};

/// One-decimal percentage with halves rounded up, from exact counts.
double rounded_percent(std::size_t correct, std::size_t total);
/// One-decimal half-up rounding of an arbitrary percentage.
double round_half_up(double percent);

struct EvalReport {
  std::array<TypeScore, corpus::kNumQuestionTypes> per_type{};
  TypeScore overall;

  /// Percentage of unmasked slots answered correctly; nullopt when the type
  /// never occurs.
  std::optional<double> accuracy(corpus::QuestionType t) const;
  std::optional<double> total_accuracy() const;
  std::optional<double> rounded(corpus::QuestionType t) const;
  std::optional<double> rounded_total() const;

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

/// Argmax per slot (first index on ties); -1 for masked slots.
std::vector<int> predict(const models::Model& model, const models::EncodedExample& ex,
                         const corpus::FeatureStore& features);
/// Unmasked slots only. A target of -1 (answer unseen in training) always
/// counts as wrong.
EvalReport evaluate(const models::Model& model, const models::EncodedDataset& data,
                    const corpus::FeatureStore& features);
/// Mean per-example loss over slots with a known target.
double mean_loss(const models::Model& model, const models::EncodedDataset& data, const corpus::FeatureStore& features);

/// Everything a model needs to read a corpus: question vocabulary and
/// answer labels from the training split.
struct Encoders {
  textenc::Vocabulary vocab;
  textenc::LabelSet answers;
};
Encoders build_encoders(const std::vector<corpus::LabeledQuestion>& train);

/// Single-task examples as one-slot multi-task examples.
std::vector<corpus::MultiTaskExample> as_isolated(const std::vector<corpus::SingleTaskExample>& singles);

/// Compares, for every filled slot of `test`, the logits obtained from the
/// isolated multi-task encoding against a direct single-question forward
/// pass with pad in the other slots. Returns the number of slots whose
/// logits differ in any bit.
std::size_t isolation_mismatches(const models::Model& model, const std::vector<corpus::MultiTaskExample>& test,
                                 const textenc::LabelSet& answers, const corpus::FeatureStore& features);

enum class ExperimentKind { MtlVsStl, ArchitectureControl, SharedInfoControl, VqateamCompare };
std::string_view to_string(ExperimentKind k);
std::optional<ExperimentKind> parse_experiment_kind(std::string_view s);

struct ExperimentSpec {
  ExperimentKind kind = ExperimentKind::MtlVsStl;
  std::string corpus_name = "synthetic";
  corpus::TaskSet tasks = corpus::daquar_task_set();
  /// Shape template; variant, tasks, answers and feature_dim are filled in
  /// per arm.
  models::ModelConfig model;
  TrainConfig train;
  std::vector<std::uint64_t> seeds = {1};
  std::optional<std::filesystem::path> embeddings;
};

struct ExperimentData {
  std::vector<corpus::LabeledQuestion> train;
  std::vector<corpus::LabeledQuestion> test;
  corpus::FeatureStore features;
};

/// Synthetic corpus with the first (1 - test_fraction) of the sorted image
/// ids used for training and the rest for testing.
ExperimentData synthetic_experiment_data(const corpus::SyntheticSceneConfig& cfg, double test_fraction = 0.2);

struct ArmRun {
  std::string label;
  models::Variant variant = models::Variant::MtlSimple;
  EvalReport eval;
  TrainHistory history;
  std::size_t train_examples = 0;
  std::size_t test_examples = 0;
};

struct SeedRun {
  std::uint64_t seed = 0;
  std::vector<ArmRun> arms;
  /// shared_info_control: combined minus split total accuracy.
  std::optional<double> shared_info_delta;
  /// architecture_control: slots whose isolated and pad-filled combined
  /// logits differ.
  std::optional<std::size_t> isolation_mismatches;
};

struct TableRow {
  std::string label;
  std::vector<std::optional<double>> cells;  // one per task, then total
  bool difference = false;
};

struct ExperimentReport {
  ExperimentKind kind = ExperimentKind::MtlVsStl;
  std::string corpus_name;
  corpus::TaskSet tasks;
  std::vector<TableRow> rows;  // seed means
  std::vector<SeedRun> runs;
};

ExperimentReport run_experiment(const ExperimentSpec& spec, const ExperimentData& data);

/// Table CSV with one-decimal half-up cells, or full-precision cells when
/// `raw` is set. Absent cells are empty.
std::string table_csv(const ExperimentReport& report, bool raw);
std::string table_markdown(const ExperimentReport& report);
/// seed, arm, per-phase convergence epochs, epochs run, returned epoch.
std::string convergence_csv(const ExperimentReport& report);
std::string manifest_json(const ExperimentReport& report, const ExperimentSpec& spec);
std::string history_file_name(std::uint64_t seed, const std::string& arm_label);

/// Writes table.csv, table_raw.csv, table.md, convergence.csv,
/// manifest.json and one history file per seed and arm into `dir`.
void write_report(const std::filesystem::path& dir, const ExperimentReport& report, const ExperimentSpec& spec);

/// Loss and accuracy curves with the phase switch marked.
std::string render_history_svg(const TrainHistory& history, std::string_view title);

struct SearchSpace {
  double log10_lr_min = -4.0;
  double log10_lr_max = -2.0;
  std::vector<std::size_t> batch_sizes = {16, 32, 64};
  std::vector<std::size_t> hidden_widths = {64, 128, 256};
  void validate() const;
};

struct Trial {
  std::size_t index = 0;
  double nadam_lr = 0.0;
  std::size_t batch_size = 0;
  std::size_t hidden_width = 0;
  double accuracy = 0.0;  // holdout total accuracy, percent
};

struct SearchResult {
  TrainConfig best_train;
  models::ModelConfig best_model;
  std::size_t best_index = 0;
  std::vector<Trial> trials;
};

struct SearchProblem {
  models::ModelConfig model;  // fully specified apart from the searched fields
  textenc::Vocabulary vocab;
  TrainConfig train;
  models::EncodedDataset train_subset;
  models::EncodedDataset holdout;
  const corpus::FeatureStore* features = nullptr;
};

/// Seeded random search: each trial draws the Nadam learning rate
/// log-uniformly and batch size and hidden width uniformly, trains on the
/// subset and scores holdout accuracy. Ties keep the earlier trial.
SearchResult search_hyperparams(const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                                const SearchProblem& problem);
std::string trials_csv(const SearchResult& result);

}  // namespace mtvqa::harness
