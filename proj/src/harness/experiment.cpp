#include <algorithm>
#include <cctype>
#include <cstdio>
#include <memory>
#include <set>

#include <json.hpp>

#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"

namespace mtvqa::harness {

namespace {

struct ArmPlan {
  std::string label;
  models::Variant variant;
  const models::EncodedDataset* train;
  const models::EncodedDataset* test;
};

std::vector<corpus::LabeledQuestion> restrict_to(const std::vector<corpus::LabeledQuestion>& qs,
                                                 const corpus::TaskSet& tasks) {
  std::vector<corpus::LabeledQuestion> out;
  for (const auto& q : qs)
    if (std::find(tasks.begin(), tasks.end(), q.qtype) != tasks.end()) out.push_back(q);
  return out;
}

std::vector<std::optional<double>> cells_of(const EvalReport& r, const corpus::TaskSet& tasks) {
  std::vector<std::optional<double>> cells;
  for (auto t : tasks) cells.push_back(r.accuracy(t));
  cells.push_back(r.total_accuracy());
  return cells;
}

TableRow mean_row(const std::string& label, const std::vector<std::vector<std::optional<double>>>& per_seed) {
  TableRow row{label, {}, false};
  const std::size_t width = per_seed.front().size();
  for (std::size_t c = 0; c < width; ++c) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const auto& cells : per_seed) {
      if (cells[c]) {
        sum += *cells[c];
        ++n;
      }
    }
    row.cells.push_back(n ? std::optional<double>(sum / static_cast<double>(n)) : std::nullopt);
  }
  return row;
}

TableRow difference_row(const TableRow& a, const TableRow& b) {
  TableRow row{"Difference", {}, true};
  for (std::size_t c = 0; c < a.cells.size(); ++c) {
    row.cells.push_back(a.cells[c] && b.cells[c] ? std::optional<double>(*a.cells[c] - *b.cells[c]) : std::nullopt);
  }
  return row;
}

std::string format_cell(const std::optional<double>& v, bool raw, bool signed_value) {
  if (!v) return "";
  char buf[64];
  if (raw) {
    std::snprintf(buf, sizeof buf, "%.17g", *v);
  } else {
    double r = round_half_up(*v);
    if (r == 0.0) r = 0.0;  // no "-0.0"
    std::snprintf(buf, sizeof buf, signed_value ? "%+.1f" : "%.1f", r);
  }
  return buf;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string slug(const std::string& label) {
  std::string out;
  for (char c : label) {
    if (std::isalnum(static_cast<unsigned char>(c))) out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    else if (!out.empty() && out.back() != '_') out += '_';
  }
  while (!out.empty() && out.back() == '_') out.pop_back();
  return out;
}

std::string title_of(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::MtlVsStl: return "Multi-task vs single-task, simple networks";
    case ExperimentKind::ArchitectureControl: return "Single-task data in both architectures";
    case ExperimentKind::SharedInfoControl: return "Combined vs split testing of the multi-task network";
    case ExperimentKind::VqateamCompare: return "Multi-task vs single-task, LSTM networks";
  }
  return "";
}

}  // namespace

std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::MtlVsStl: return "mtl_vs_stl";
    case ExperimentKind::ArchitectureControl: return "architecture_control";
    case ExperimentKind::SharedInfoControl: return "shared_info_control";
    case ExperimentKind::VqateamCompare: return "vqateam_compare";
  }
  return "unknown";
}

std::optional<ExperimentKind> parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::MtlVsStl, ExperimentKind::ArchitectureControl, ExperimentKind::SharedInfoControl,
                 ExperimentKind::VqateamCompare}) {
    if (to_string(k) == s) return k;
  }
  return std::nullopt;
}

ExperimentData synthetic_experiment_data(const corpus::SyntheticSceneConfig& cfg, double test_fraction) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("harness", "test fraction must lie strictly between 0 and 1");
  }
  auto corpus = corpus::gen_synthetic_corpus(cfg);
  std::set<std::string> ids;
  for (const auto& q : corpus.questions) ids.insert(q.image_id);
  const auto train_images =
      static_cast<std::size_t>(static_cast<double>(ids.size()) * (1.0 - test_fraction) + 0.5);
  std::set<std::string> train_ids;
  for (const auto& id : ids) {
    if (train_ids.size() >= train_images) break;
    train_ids.insert(id);
  }
  ExperimentData data;
  for (auto& q : corpus.questions) (train_ids.count(q.image_id) ? data.train : data.test).push_back(std::move(q));
  data.features = std::move(corpus.features);
  return data;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, const ExperimentData& data) {
  spec.train.validate();
  corpus::validate_task_set(spec.tasks);
  if (spec.seeds.empty()) throw ConfigError("harness", "at least one seed is required");

  const auto train_q = restrict_to(data.train, spec.tasks);
  const auto test_q = restrict_to(data.test, spec.tasks);
  const auto mt_train = corpus::reformat_multitask(corpus::group_by_image(train_q), spec.tasks);
  const auto mt_test = corpus::reformat_multitask(corpus::group_by_image(test_q), spec.tasks);
  if (mt_train.empty()) throw ConfigError("harness", "no multi-task training examples for the task set");
  if (mt_test.empty()) throw ConfigError("harness", "no multi-task test examples for the task set");
  const auto st_train = corpus::flatten_single_task(mt_train);
  const auto st_test = corpus::flatten_single_task(mt_test);

  // Vocabulary and answers come from the questions the arms actually train on.
  std::vector<corpus::LabeledQuestion> seen;
  for (const auto& s : st_train) seen.push_back({s.image_id, s.tokens, s.answer, s.qtype});
  const Encoders enc = build_encoders(seen);
  const std::size_t L = spec.model.max_len;

  const auto mt_train_enc = models::encode_multitask(mt_train, spec.tasks, enc.vocab, enc.answers, L);
  const auto mt_test_enc = models::encode_multitask(mt_test, spec.tasks, enc.vocab, enc.answers, L);
  const auto st_train_enc = models::encode_single(st_train, enc.vocab, enc.answers, L);
  const auto st_test_enc = models::encode_single(st_test, enc.vocab, enc.answers, L);
  const auto iso_train_enc =
      models::encode_multitask(as_isolated(st_train), spec.tasks, enc.vocab, enc.answers, L);
  const auto iso_test_enc = models::encode_multitask(as_isolated(st_test), spec.tasks, enc.vocab, enc.answers, L);
  const auto split_test_enc =
      models::encode_multitask(corpus::isolate_slots(mt_test), spec.tasks, enc.vocab, enc.answers, L);

  const std::string& name = spec.corpus_name;
  std::vector<ArmPlan> plans;
  switch (spec.kind) {
    case ExperimentKind::MtlVsStl:
      plans = {{"MTL " + name, models::Variant::MtlSimple, &mt_train_enc, &mt_test_enc},
               {"STL " + name, models::Variant::StlSimple, &st_train_enc, &st_test_enc}};
      break;
    case ExperimentKind::VqateamCompare:
      plans = {{"MTL " + name, models::Variant::VqateamMtl, &mt_train_enc, &mt_test_enc},
               {"STL " + name, models::Variant::VqateamStl, &st_train_enc, &st_test_enc}};
      break;
    case ExperimentKind::ArchitectureControl:
      plans = {{"STL Data MTL " + name, models::Variant::MtlSimple, &iso_train_enc, &iso_test_enc},
               {"STL Data STL " + name, models::Variant::StlSimple, &st_train_enc, &st_test_enc}};
      break;
    case ExperimentKind::SharedInfoControl:
      plans = {{"Combined " + name, models::Variant::MtlSimple, &mt_train_enc, &mt_test_enc},
               {"Split " + name, models::Variant::MtlSimple, &mt_train_enc, &split_test_enc}};
      break;
  }

  ExperimentReport report;
  report.kind = spec.kind;
  report.corpus_name = name;
  report.tasks = spec.tasks;

  std::vector<std::vector<std::vector<std::optional<double>>>> cells(plans.size());
  for (std::uint64_t seed : spec.seeds) {
    SeedRun run;
    run.seed = seed;
    TrainConfig tc = spec.train;
    tc.seed = seed;
    std::unique_ptr<models::Model> previous;
    for (std::size_t a = 0; a < plans.size(); ++a) {
      const auto& plan = plans[a];
      models::ModelConfig mc = spec.model;
      mc.variant = plan.variant;
      mc.tasks = spec.tasks;
      mc.answers = enc.answers.labels();
      mc.feature_dim = data.features.dim();

      ArmRun arm;
      arm.label = plan.label;
      arm.variant = plan.variant;
      arm.train_examples = plan.train->size();
      arm.test_examples = plan.test->size();
      // The split arm of the shared-information control re-tests the
      // combined arm's model instead of training a second one.
      const bool reuse = spec.kind == ExperimentKind::SharedInfoControl && a == 1;
      if (!reuse) {
        std::optional<textenc::EmbeddingTable> table;
        if (spec.embeddings) table = textenc::load_embeddings(*spec.embeddings, enc.vocab, mc.embed_dim, seed);
        previous = std::make_unique<models::Model>(mc, enc.vocab, seed, table ? &*table : nullptr);
        arm.history = train(*previous, *plan.train, data.features, tc);
      } else {
        arm.history = run.arms.front().history;
      }
      arm.eval = evaluate(*previous, *plan.test, data.features);
      if (spec.kind == ExperimentKind::ArchitectureControl && plan.variant == models::Variant::MtlSimple) {
        run.isolation_mismatches = isolation_mismatches(*previous, mt_test, enc.answers, data.features);
      }
      cells[a].push_back(cells_of(arm.eval, spec.tasks));
      run.arms.push_back(std::move(arm));
    }
    if (spec.kind == ExperimentKind::SharedInfoControl) {
      const auto combined = run.arms[0].eval.total_accuracy();
      const auto split = run.arms[1].eval.total_accuracy();
      if (combined && split) run.shared_info_delta = *combined - *split;
    }
    report.runs.push_back(std::move(run));
  }

  for (std::size_t a = 0; a < plans.size(); ++a) report.rows.push_back(mean_row(plans[a].label, cells[a]));
  report.rows.push_back(difference_row(report.rows[0], report.rows[1]));
  return report;
}

std::string table_csv(const ExperimentReport& report, bool raw) {
  std::string out = "row";
  for (auto t : report.tasks) out += "," + std::string(corpus::display_name(t));
  out += ",Total\n";
  for (const auto& row : report.rows) {
    out += csv_escape(row.label);
    for (const auto& c : row.cells) out += "," + format_cell(c, raw, row.difference);
    out += "\n";
  }
  return out;
}

std::string table_markdown(const ExperimentReport& report) {
  std::string out = "## " + title_of(report.kind) + "\n\n|";
  std::string rule = "|---";
  for (auto t : report.tasks) {
    out += " | " + std::string(corpus::display_name(t));
    rule += "|---:";
  }
  out += " | Total |\n" + rule + "|---:|\n";
  for (const auto& row : report.rows) {
    out += "| **" + row.label + "**";
    for (const auto& c : row.cells) {
      const std::string v = format_cell(c, false, row.difference);
      out += " | " + (v.empty() ? std::string("n/a") : (row.difference ? v : v + "%"));
    }
    out += " |\n";
  }
  out += "\nSeeds:";
  for (const auto& run : report.runs) out += " " + std::to_string(run.seed);
  out += "\n";

  char buf[160];
  if (report.kind == ExperimentKind::MtlVsStl || report.kind == ExperimentKind::VqateamCompare) {
    out += "\n| Seed | Arm | Converged (Nadam) | Converged (SGD) |\n|---:|---|---:|---:|\n";
    for (const auto& run : report.runs) {
      for (const auto& arm : run.arms) {
        auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string("-"); };
        out += "| " + std::to_string(run.seed) + " | " + arm.label + " | " + opt(arm.history.converged_nadam) + " | " +
               opt(arm.history.converged_sgd) + " |\n";
      }
    }
  }
  for (const auto& run : report.runs) {
    if (run.shared_info_delta) {
      std::snprintf(buf, sizeof buf, "\nSeed %llu: combined minus split total accuracy %+.4f points\n",
                    static_cast<unsigned long long>(run.seed), *run.shared_info_delta);
      out += buf;
    }
    if (run.isolation_mismatches) {
      std::snprintf(buf, sizeof buf, "\nSeed %llu: %zu slots differ between isolated and pad-filled evaluation\n",
                    static_cast<unsigned long long>(run.seed), *run.isolation_mismatches);
      out += buf;
    }
  }
  return out;
}

std::string convergence_csv(const ExperimentReport& report) {
  std::string out = "seed,arm,converged_nadam,converged_sgd,epochs,best_epoch\n";
  auto opt = [](const std::optional<std::size_t>& v) { return v ? std::to_string(*v) : std::string(); };
  for (const auto& run : report.runs) {
    for (const auto& arm : run.arms) {
      out += std::to_string(run.seed) + "," + csv_escape(arm.label) + "," + opt(arm.history.converged_nadam) + "," +
             opt(arm.history.converged_sgd) + "," + std::to_string(arm.history.epochs.size()) + "," +
             std::to_string(arm.history.best_epoch) + "\n";
    }
  }
  return out;
}

std::string manifest_json(const ExperimentReport& report, const ExperimentSpec& spec) {
  using nlohmann::json;
  const auto& t = spec.train;
  json j;
  j["kind"] = std::string(to_string(report.kind));
  j["corpus"] = report.corpus_name;
  j["tasks"] = corpus::task_set_string(report.tasks);
  j["seeds"] = spec.seeds;
  j["model"] = json::parse(models::config_to_json(spec.model));
  j["train"] = {{"batch_size", t.batch_size},
                {"max_epochs_nadam", t.max_epochs_nadam},
                {"max_epochs_sgd", t.max_epochs_sgd},
                {"patience", t.patience},
                {"min_delta", t.min_delta},
                {"nadam", {{"lr", t.nadam.lr}, {"beta1", t.nadam.beta1}, {"beta2", t.nadam.beta2}, {"eps", t.nadam.eps}}},
                {"sgd", {{"lr", t.sgd.lr}, {"momentum", t.sgd.momentum}}},
                {"validation_fraction", t.validation_fraction},
                {"monitor", t.monitor == Monitor::Validation ? "validation" : "training"}};
  j["embeddings"] = spec.embeddings ? json(spec.embeddings->string()) : json(nullptr);
  j["runs"] = json::array();
  for (const auto& run : report.runs) {
    json arms = json::array();
    for (const auto& arm : run.arms) {
      arms.push_back({{"label", arm.label},
                      {"variant", std::string(models::to_string(arm.variant))},
                      {"train_examples", arm.train_examples},
                      {"test_examples", arm.test_examples},
                      {"history", history_file_name(run.seed, arm.label)}});
    }
    j["runs"].push_back({{"seed", run.seed}, {"arms", arms}});
  }
  return j.dump(2) + "\n";
}

std::string history_file_name(std::uint64_t seed, const std::string& arm_label) {
  return "history_seed" + std::to_string(seed) + "_" + slug(arm_label) + ".tsv";
}

void write_report(const std::filesystem::path& dir, const ExperimentReport& report, const ExperimentSpec& spec) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("harness", "cannot create " + dir.string() + ": " + ec.message());
  auto put = [&](const std::string& name, const std::string& text) {
    const auto path = dir / name;
    std::FILE* f = std::fopen(path.string().c_str(), "wb");
    if (!f) throw IoError("harness", "cannot write " + path.string());
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
    if (std::fclose(f) != 0 || !ok) throw IoError("harness", "write failed for " + path.string());
  };
  put("table.csv", table_csv(report, false));
  put("table_raw.csv", table_csv(report, true));
  put("table.md", table_markdown(report));
  put("convergence.csv", convergence_csv(report));
  put("manifest.json", manifest_json(report, spec));
  for (const auto& run : report.runs) {
    for (const auto& arm : run.arms) put(history_file_name(run.seed, arm.label), history_tsv(arm.history));
  }
}

}  // namespace mtvqa::harness
