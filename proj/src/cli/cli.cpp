#include "mtvqa/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <set>

#include <CLI11.hpp>
#include <json.hpp>

#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"

namespace mtvqa::cli {

namespace {

namespace fs = std::filesystem;
using corpus::DatasetKind;

std::uint64_t default_seed() {
  const char* env = std::getenv("MTVQA_SEED");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const unsigned long long v = std::strtoull(env, &end, 10);
  if (*end != '\0') throw ConfigError("cli", std::string("MTVQA_SEED is not an unsigned integer: ") + env);
  return v;
}

void require_file(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw IoError("cli", std::string(what) + " not found: " + p.string());
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cli", "cannot write " + path.string());
  out << text;
  if (!out) throw IoError("cli", "write failed for " + path.string());
}

// `key=value` pairs go to the train config first, then the model config.
void apply_sets(const std::vector<std::string>& sets, harness::TrainConfig& tc, models::ModelConfig& mc) {
  for (const auto& kv : sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("cli", "--set expects key=value, got '" + kv + "'");
    const std::string key = kv.substr(0, eq);
    const std::string value = kv.substr(eq + 1);
    if (!harness::apply_override(tc, key, value) && !harness::apply_override(mc, key, value)) {
      throw ConfigError("cli", "unknown --set key '" + key + "'");
    }
  }
}

corpus::TaskSet tasks_or_default(const std::string& text) {
  return text.empty() ? corpus::daquar_task_set() : corpus::parse_task_set(text);
}

std::string percent(const std::optional<double>& v) {
  if (!v) return "absent";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", *v);
  return buf;
}

// ---- ingest -------------------------------------------------------------

struct IngestOpts {
  std::string format;
  fs::path input, output, rejections, keywords, audit;
  std::size_t audit_size = 0;
  std::uint64_t seed = 1;
};

void run_ingest(const IngestOpts& o) {
  require_file(o.input, "input");
  std::vector<corpus::LabeledQuestion> labeled;
  std::vector<corpus::RawQuestion> rejected;
  std::size_t source = 0;
  if (o.format == "daquar") {
    const auto raw = corpus::parse_daquar(o.input);
    source = raw.size();
    const corpus::KeywordConfig cfg =
        o.keywords.empty() ? corpus::KeywordConfig::daquar_default() : corpus::KeywordConfig::load(o.keywords);
    auto result = corpus::label_corpus(raw, cfg);
    labeled = std::move(result.labeled);
    rejected = std::move(result.rejected);
  } else {
    labeled = corpus::parse_cocoqa(o.input);
    source = labeled.size();
  }
  corpus::write_labeled(o.output, labeled);
  if (!o.rejections.empty()) corpus::write_rejections(o.rejections, rejected);
  if (o.audit_size > 0) {
    if (o.audit.empty()) throw ConfigError("cli", "--audit-size needs --audit");
    corpus::write_labeled(o.audit, corpus::audit_sample(labeled, o.audit_size, o.seed));
  }
  std::cout << "source\t" << source << "\nlabeled\t" << labeled.size() << "\nrejected\t" << rejected.size() << "\n";
}

// ---- synth --------------------------------------------------------------

struct SynthOpts {
  fs::path output_dir;
  std::size_t images = 100;
  std::size_t questions_per_type = 2;
  double noise = 0.1;
  std::string types;
  bool binary_features = false;
  std::uint64_t seed = 1;
};

void run_synth(const SynthOpts& o) {
  corpus::SyntheticSceneConfig sc;
  sc.num_images = o.images;
  sc.max_questions_per_type = o.questions_per_type;
  sc.noise_std = o.noise;
  sc.seed = o.seed;
  if (!o.types.empty()) sc.question_types = corpus::parse_task_set(o.types);
  const auto c = corpus::gen_synthetic_corpus(sc);
  fs::create_directories(o.output_dir);
  corpus::write_labeled(o.output_dir / "questions.tsv", c.questions);
  if (o.binary_features) corpus::save_features_binary(o.output_dir / "features.bin", c.features);
  else corpus::save_features_text(o.output_dir / "features.txt", c.features);
  std::cout << "images\t" << c.features.size() << "\nquestions\t" << c.questions.size() << "\nfeature_dim\t"
            << c.features.dim() << "\n";
}

// ---- reformat -----------------------------------------------------------

struct ReformatOpts {
  fs::path input, output;
  std::string tasks, mode = "multitask";
};

void run_reformat(const ReformatOpts& o) {
  require_file(o.input, "input");
  const auto tasks = tasks_or_default(o.tasks);
  const auto mt = corpus::reformat_multitask(corpus::group_by_image(corpus::read_labeled(o.input)), tasks);
  if (o.mode == "multitask") {
    corpus::write_multitask(o.output, mt, tasks);
    std::cout << "examples\t" << mt.size() << "\n";
  } else if (o.mode == "single") {
    const auto st = corpus::flatten_single_task(mt);
    corpus::write_single(o.output, st);
    std::cout << "examples\t" << st.size() << "\n";
  } else {
    const auto iso = corpus::isolate_slots(mt);
    corpus::write_multitask(o.output, iso, tasks);
    std::cout << "examples\t" << iso.size() << "\n";
  }
}

// ---- stats --------------------------------------------------------------

void print_stats(const corpus::CorpusStats& s, const corpus::TaskSet& tasks) {
  std::cout << "examples\t" << s.examples << "\nqualifying_images\t" << s.qualifying_images << "\nanswer_vocabulary\t"
            << s.answer_vocabulary << "\n";
  for (auto t : tasks) std::cout << "filled_" << corpus::to_string(t) << "\t" << s.filled_per_type[corpus::index_of(t)] << "\n";
}

void run_stats(const fs::path& input, const std::string& tasks_text) {
  require_file(input, "input");
  switch (corpus::detect_dataset_kind(input)) {
    case DatasetKind::Labeled: {
      const auto qs = corpus::read_labeled(input);
      const auto tasks = tasks_or_default(tasks_text);
      std::array<std::size_t, corpus::kNumQuestionTypes> per_type{};
      for (const auto& q : qs) ++per_type[corpus::index_of(q.qtype)];
      std::cout << "source_questions\t" << qs.size() << "\n";
      for (auto t : corpus::kAllQuestionTypes)
        if (per_type[corpus::index_of(t)]) std::cout << "questions_" << corpus::to_string(t) << "\t" << per_type[corpus::index_of(t)] << "\n";
      const auto mt = corpus::reformat_multitask(corpus::group_by_image(qs), tasks);
      print_stats(corpus::corpus_stats(mt), tasks);
      break;
    }
    case DatasetKind::MultiTask: {
      const auto file = corpus::read_multitask(input);
      print_stats(corpus::corpus_stats(file.examples), file.tasks);
      break;
    }
    case DatasetKind::Single: {
      const auto xs = corpus::read_single(input);
      std::array<std::size_t, corpus::kNumQuestionTypes> per_type{};
      std::set<std::string> answers;
      for (const auto& x : xs) {
        ++per_type[corpus::index_of(x.qtype)];
        answers.insert(x.answer);
      }
      std::cout << "examples\t" << xs.size() << "\nanswer_vocabulary\t" << answers.size() << "\n";
      for (auto t : corpus::kAllQuestionTypes)
        if (per_type[corpus::index_of(t)]) std::cout << "filled_" << corpus::to_string(t) << "\t" << per_type[corpus::index_of(t)] << "\n";
      break;
    }
    case DatasetKind::Unknown:
      throw FormatError("cli", input.string() + ": unrecognised dataset header");
  }
}

// ---- train / eval -------------------------------------------------------

// A dataset file as model input. Single-task files feed multi-task models
// as isolated slots.
struct LoadedData {
  corpus::TaskSet tasks;
  std::vector<corpus::MultiTaskExample> multitask;
  std::vector<corpus::SingleTaskExample> single;
  bool is_single = false;
};

LoadedData load_dataset(const fs::path& path) {
  require_file(path, "data");
  LoadedData d;
  switch (corpus::detect_dataset_kind(path)) {
    case DatasetKind::MultiTask: {
      auto file = corpus::read_multitask(path);
      d.tasks = std::move(file.tasks);
      d.multitask = std::move(file.examples);
      break;
    }
    case DatasetKind::Single:
      d.single = corpus::read_single(path);
      d.is_single = true;
      break;
    default:
      throw FormatError("cli", path.string() + ": expected a multi-task or single-task dataset (run reformat first)");
  }
  return d;
}

models::EncodedDataset encode_for(const models::ModelConfig& cfg, const textenc::Vocabulary& vocab,
                                  const textenc::LabelSet& answers, const LoadedData& d) {
  if (models::is_multitask(cfg.variant)) {
    const auto& mt = d.is_single ? harness::as_isolated(d.single) : d.multitask;
    return models::encode_multitask(mt, cfg.tasks, vocab, answers, cfg.max_len);
  }
  if (!d.is_single) return models::encode_single(corpus::flatten_single_task(d.multitask), vocab, answers, cfg.max_len);
  return models::encode_single(d.single, vocab, answers, cfg.max_len);
}

struct TrainOpts {
  fs::path data, features, output, history, embeddings, trials;
  std::string variant, format = "binary", tasks;
  std::vector<std::string> sets;
  bool search = false;
  std::size_t search_budget = 20;
  std::uint64_t seed = 1;
};

void run_train(const TrainOpts& o) {
  require_file(o.features, "features");
  const LoadedData d = load_dataset(o.data);
  const auto features = corpus::load_features(o.features);

  models::ModelConfig mc;
  const std::string variant_name = !o.variant.empty() ? o.variant : (d.is_single ? "stl_simple" : "mtl_simple");
  const auto variant = models::parse_variant(variant_name);
  if (!variant) throw ConfigError("cli", "unknown variant '" + variant_name + "'");
  mc.variant = *variant;
  mc.tasks = !o.tasks.empty() ? corpus::parse_task_set(o.tasks) : (d.is_single ? corpus::daquar_task_set() : d.tasks);
  harness::TrainConfig tc;
  tc.seed = o.seed;
  apply_sets(o.sets, tc, mc);

  textenc::Vocabulary vocab;
  textenc::LabelSet answers;
  auto note = [&](const std::vector<std::string>& tokens, const std::string& answer) {
    for (const auto& t : tokens) vocab.add(t);
    answers.add(answer);
  };
  for (const auto& x : d.single) note(x.tokens, x.answer);
  for (const auto& ex : d.multitask)
    for (const auto& s : ex.slots)
      if (s) note(s->tokens, s->answer);
  mc.answers = answers.labels();
  mc.feature_dim = features.dim();
  mc.validate();

  auto data = encode_for(mc, vocab, answers, d);

  if (o.search) {
    const auto [sub, hold] = harness::split_by_image(data, tc.validation_fraction, tc.seed);
    harness::SearchProblem problem{mc, vocab, tc, {}, {}, &features};
    for (auto i : sub) problem.train_subset.push_back(data[i]);
    for (auto i : hold) problem.holdout.push_back(data[i]);
    const auto result = harness::search_hyperparams(harness::SearchSpace{}, o.search_budget, tc.seed, problem);
    if (!o.trials.empty()) write_text(o.trials, harness::trials_csv(result));
    mc = result.best_model;
    tc = result.best_train;
    std::cout << "search_best_trial\t" << result.best_index << "\n";
  }

  std::optional<textenc::EmbeddingTable> table;
  if (!o.embeddings.empty()) table = textenc::load_embeddings(o.embeddings, vocab, mc.embed_dim, tc.seed);
  models::Model model(mc, vocab, tc.seed, table ? &*table : nullptr);
  const auto history = harness::train(model, data, features, tc);
  model.save(o.output, o.format == "text" ? ad::CheckpointFormat::Text : ad::CheckpointFormat::Binary);
  if (!o.history.empty()) harness::save_history(o.history, history);

  const auto report = harness::evaluate(model, data, features);
  auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
  std::cout << "examples\t" << data.size() << "\nepochs\t" << history.epochs.size() << "\nconverged_nadam\t"
            << opt(history.converged_nadam) << "\nconverged_sgd\t" << opt(history.converged_sgd) << "\nbest_epoch\t"
            << history.best_epoch << "\ntraining_accuracy\t" << percent(report.rounded_total()) << "\n";
}

struct EvalOpts {
  fs::path model, data, features, json;
};

void run_eval(const EvalOpts& o) {
  require_file(o.model, "model");
  require_file(o.features, "features");
  const auto model = models::Model::load(o.model);
  const LoadedData d = load_dataset(o.data);
  const auto features = corpus::load_features(o.features);
  const auto& cfg = model.config();
  if (!d.is_single && models::is_multitask(cfg.variant) && d.tasks != cfg.tasks) {
    throw ConfigError("cli", "dataset tasks " + corpus::task_set_string(d.tasks) + " differ from model tasks " +
                                 corpus::task_set_string(cfg.tasks));
  }
  const textenc::LabelSet answers(cfg.answers);
  const auto data = encode_for(cfg, model.vocab(), answers, d);
  const auto report = harness::evaluate(model, data, features);

  nlohmann::json j;
  for (auto t : corpus::kAllQuestionTypes) {
    const auto& s = report.per_type[corpus::index_of(t)];
    if (s.total == 0) continue;
    std::cout << corpus::display_name(t) << "\t" << percent(report.rounded(t)) << "\t" << s.correct << "/" << s.total
              << "\n";
    j["types"][std::string(corpus::to_string(t))] = {{"correct", s.correct}, {"total", s.total},
                                                      {"accuracy", *report.rounded(t)}};
  }
  std::cout << "Total\t" << percent(report.rounded_total()) << "\t" << report.overall.correct << "/"
            << report.overall.total << "\n";
  j["total"] = {{"correct", report.overall.correct},
                {"total", report.overall.total},
                {"accuracy", report.rounded_total() ? nlohmann::json(*report.rounded_total()) : nlohmann::json(nullptr)}};
  if (!o.json.empty()) write_text(o.json, j.dump(2) + "\n");
}

// ---- experiment ---------------------------------------------------------

struct ExperimentOpts {
  std::string kind, tasks, corpus_name;
  fs::path train, test, features, output_dir, embeddings;
  std::size_t synth_images = 0;
  std::size_t questions_per_type = 2;
  double noise = 0.1;
  std::size_t seeds = 1;
  std::uint64_t seed = 1;
  std::vector<std::string> sets;
};

void run_experiment_cmd(const ExperimentOpts& o) {
  const auto kind = harness::parse_experiment_kind(o.kind);
  if (!kind) throw ConfigError("cli", "unknown experiment kind '" + o.kind + "'");
  if (o.seeds == 0) throw ConfigError("cli", "--seeds must be at least 1");

  harness::ExperimentSpec spec;
  spec.kind = *kind;
  spec.tasks = tasks_or_default(o.tasks);
  apply_sets(o.sets, spec.train, spec.model);
  for (std::size_t i = 0; i < o.seeds; ++i) spec.seeds.push_back(o.seed + i);
  if (!o.embeddings.empty()) spec.embeddings = o.embeddings;

  harness::ExperimentData data;
  if (o.synth_images > 0) {
    corpus::SyntheticSceneConfig sc;
    sc.num_images = o.synth_images;
    sc.max_questions_per_type = o.questions_per_type;
    sc.noise_std = o.noise;
    sc.seed = o.seed;
    sc.question_types = spec.tasks;
    data = harness::synthetic_experiment_data(sc);
    spec.corpus_name = o.corpus_name.empty() ? "synthetic" : o.corpus_name;
  } else {
    if (o.train.empty() || o.test.empty() || o.features.empty()) {
      throw ConfigError("cli", "experiment needs --synth-images or all of --train, --test and --features");
    }
    require_file(o.train, "train");
    require_file(o.test, "test");
    require_file(o.features, "features");
    data.train = corpus::read_labeled(o.train);
    data.test = corpus::read_labeled(o.test);
    data.features = corpus::load_features(o.features);
    spec.corpus_name = o.corpus_name.empty() ? "corpus" : o.corpus_name;
  }
  const auto report = harness::run_experiment(spec, data);
  harness::write_report(o.output_dir, report, spec);
  std::cout << harness::table_markdown(report);
}

// ---- report -------------------------------------------------------------

void run_report(const fs::path& history, const fs::path& output, const std::string& title) {
  require_file(history, "history");
  const auto h = harness::load_history(history);
  write_text(output, harness::render_history_svg(h, title.empty() ? history.stem().string() : title));
}

void print_error(const std::string& kind, const std::string& module, const std::string& message) {
  nlohmann::json j = {{"error", kind}, {"module", module}, {"message", message}};
  std::cerr << j.dump() << std::endl;
}

}  // namespace

int run_cli(int argc, char** argv) {
  CLI::App app{"Multi-task visual question answering toolkit", "mtvqa"};
  app.require_subcommand(1);
  app.fallthrough(false);

  std::uint64_t seed = 0;
  try {
    seed = default_seed();
  } catch (const Error& e) {
    print_error(e.kind(), e.module(), e.what());
    return 1;
  }

  IngestOpts ingest{};
  ingest.seed = seed;
  auto* c_ingest = app.add_subcommand("ingest", "Parse and label a raw corpus");
  c_ingest->add_option("--format", ingest.format, "daquar or cocoqa")->required()->check(CLI::IsMember({"daquar", "cocoqa"}));
  c_ingest->add_option("--input", ingest.input, "DAQUAR text file or COCO-QA directory")->required();
  c_ingest->add_option("--output", ingest.output, "Labeled question file")->required();
  c_ingest->add_option("--rejections", ingest.rejections, "Log of unclassified questions");
  c_ingest->add_option("--keywords", ingest.keywords, "Keyword configuration (DAQUAR)");
  c_ingest->add_option("--audit", ingest.audit, "Write a random audit sample here");
  c_ingest->add_option("--audit-size", ingest.audit_size, "Audit sample size");
  c_ingest->add_option("--seed", ingest.seed, "Seed for the audit sample");

  SynthOpts synth{};
  synth.seed = seed;
  auto* c_synth = app.add_subcommand("synth", "Generate a synthetic scene corpus");
  c_synth->add_option("--output-dir", synth.output_dir, "Directory for questions.tsv and features")->required();
  c_synth->add_option("--images", synth.images, "Number of scenes");
  c_synth->add_option("--questions-per-type", synth.questions_per_type, "Questions per type per image, at most");
  c_synth->add_option("--noise", synth.noise, "Feature noise standard deviation");
  c_synth->add_option("--types", synth.types, "Comma-separated question types");
  c_synth->add_flag("--binary-features", synth.binary_features, "Write features.bin instead of features.txt");
  c_synth->add_option("--seed", synth.seed, "Generator seed");

  ReformatOpts reformat{};
  auto* c_reformat = app.add_subcommand("reformat", "Build multi-task, single-task or isolated datasets");
  c_reformat->add_option("--input", reformat.input, "Labeled question file")->required();
  c_reformat->add_option("--output", reformat.output, "Output dataset")->required();
  c_reformat->add_option("--tasks", reformat.tasks, "Comma-separated task set (default colour,count,position,size)");
  c_reformat->add_option("--mode", reformat.mode, "multitask, single or isolated")
      ->check(CLI::IsMember({"multitask", "single", "isolated"}));

  fs::path stats_input;
  std::string stats_tasks;
  auto* c_stats = app.add_subcommand("stats", "Print corpus statistics");
  c_stats->add_option("--input", stats_input, "Labeled, multi-task or single-task file")->required();
  c_stats->add_option("--tasks", stats_tasks, "Task set used to reformat a labeled file");

  TrainOpts trainopts{};
  trainopts.seed = seed;
  auto* c_train = app.add_subcommand("train", "Train a model");
  c_train->add_option("--data", trainopts.data, "Multi-task or single-task dataset")->required();
  c_train->add_option("--features", trainopts.features, "Image feature file")->required();
  c_train->add_option("--output", trainopts.output, "Checkpoint path")->required();
  c_train->add_option("--variant", trainopts.variant, "mtl_simple, stl_simple, vqateam_stl or vqateam_mtl");
  c_train->add_option("--tasks", trainopts.tasks, "Task set (defaults to the dataset's)");
  c_train->add_option("--history", trainopts.history, "Write the training history here");
  c_train->add_option("--embeddings", trainopts.embeddings, "Pretrained word vectors");
  c_train->add_option("--format", trainopts.format, "Checkpoint format")->check(CLI::IsMember({"text", "binary"}));
  c_train->add_option("--set", trainopts.sets, "Override key=value (repeatable)");
  c_train->add_flag("--search", trainopts.search, "Run a random hyperparameter search before the final run");
  auto* o_budget = c_train->add_option("--search-budget", trainopts.search_budget, "Search trials (implies --search)");
  c_train->add_option("--trials", trainopts.trials, "Write the search trials here");
  c_train->add_option("--seed", trainopts.seed, "Model and training seed");

  EvalOpts evalopts{};
  auto* c_eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  c_eval->add_option("--model", evalopts.model, "Checkpoint")->required();
  c_eval->add_option("--data", evalopts.data, "Multi-task or single-task dataset")->required();
  c_eval->add_option("--features", evalopts.features, "Image feature file")->required();
  c_eval->add_option("--json", evalopts.json, "Also write the report as JSON");

  ExperimentOpts exp{};
  exp.seed = seed;
  auto* c_exp = app.add_subcommand("experiment", "Run a comparison experiment and write its report");
  c_exp->add_option("kind", exp.kind, "mtl_vs_stl, architecture_control, shared_info_control or vqateam_compare")
      ->required()
      ->check(CLI::IsMember({"mtl_vs_stl", "architecture_control", "shared_info_control", "vqateam_compare"}));
  c_exp->add_option("--output-dir", exp.output_dir, "Report directory")->required();
  c_exp->add_option("--synth-images", exp.synth_images, "Use a synthetic corpus with this many images");
  c_exp->add_option("--questions-per-type", exp.questions_per_type, "Synthetic questions per type per image");
  c_exp->add_option("--noise", exp.noise, "Synthetic feature noise");
  c_exp->add_option("--train", exp.train, "Labeled training questions");
  c_exp->add_option("--test", exp.test, "Labeled test questions");
  c_exp->add_option("--features", exp.features, "Image feature file");
  c_exp->add_option("--corpus-name", exp.corpus_name, "Name used in table rows");
  c_exp->add_option("--tasks", exp.tasks, "Comma-separated task set");
  c_exp->add_option("--embeddings", exp.embeddings, "Pretrained word vectors");
  c_exp->add_option("--seeds", exp.seeds, "Number of seeds (consecutive from --seed)");
  c_exp->add_option("--seed", exp.seed, "First seed");
  c_exp->add_option("--set", exp.sets, "Override key=value (repeatable)");

  fs::path report_history, report_output;
  std::string report_title;
  auto* c_report = app.add_subcommand("report", "Render a training history as SVG curves");
  c_report->add_option("--history", report_history, "History file")->required();
  c_report->add_option("--output", report_output, "SVG path")->required();
  c_report->add_option("--title", report_title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 2;
  }

  try {
    if (*c_ingest) run_ingest(ingest);
    else if (*c_synth) run_synth(synth);
    else if (*c_reformat) run_reformat(reformat);
    else if (*c_stats) run_stats(stats_input, stats_tasks);
    else if (*c_train) {
      trainopts.search = trainopts.search || o_budget->count() > 0;
      run_train(trainopts);
    }
    else if (*c_eval) run_eval(evalopts);
    else if (*c_exp) run_experiment_cmd(exp);
    else if (*c_report) run_report(report_history, report_output, report_title);
  } catch (const Error& e) {
    print_error(e.kind(), e.module(), e.what());
    return 1;
  } catch (const std::exception& e) {
    print_error("internal", "cli", e.what());
    return 1;
  }
  return 0;
}

}  // namespace mtvqa::cli
