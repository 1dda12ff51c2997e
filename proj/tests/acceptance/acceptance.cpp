// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Real-corpus counts are checked only when the corpus
// locations are given through MTVQA_DAQUAR_TRAIN / MTVQA_COCOQA_TRAIN_DIR.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mtvqa/cli.hpp"
#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"
#include "support.hpp"

using namespace mtvqa;
using corpus::QuestionType;

namespace {

enum class Status { Pass, Fail, Skip };

struct Outcome {
  Status status = Status::Fail;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// 1. Finite-difference gradient suites.
Outcome gradients() {
  const auto t0 = Clock::now();
  auto cases = testing::operator_gradient_suite(100);
  const auto models = testing::model_gradient_suite(100);
  cases.insert(cases.end(), models.begin(), models.end());
  const double secs = seconds_since(t0);
  bool ok = secs < 120.0;
  double worst = 0.0;
  std::string worst_name, failed;
  for (const auto& c : cases) {
    ok = ok && c.passed && c.max_rel_error < 1e-4;
    if (!c.passed) failed += " " + c.name;
    if (c.max_rel_error >= worst) {
      worst = c.max_rel_error;
      worst_name = c.name + " " + c.worst;
    }
  }
  std::string d = std::to_string(cases.size()) + " suites x 100 instances, max rel error " + fmt("%.3g", worst) +
                  " (" + worst_name + "), " + fmt("%.1f", secs) + " s";
  if (!failed.empty()) d += "; failing:" + failed;
  return {ok ? Status::Pass : Status::Fail, d};
}

// 2. Keyword classifier on the reference questions plus the priority property.
Outcome classifier() {
  const auto& cfg = corpus::KeywordConfig::daquar_default();
  auto classify = [&](const char* q) { return corpus::classify_question(corpus::tokenize(q), cfg); };
  std::size_t wrong = 0;
  wrong += classify("how many orange balls are on the table") != QuestionType::Count;
  wrong += classify("what are on the wall on the left side of the green curtain but not behind the garbage bin") !=
           QuestionType::Position;
  wrong += classify("which object is more").has_value();
  wrong += classify("what is the largest red object") != QuestionType::Size;
  const std::size_t violations = testing::keyword_priority_violations(cfg, 1000, 20240601);
  return {wrong == 0 && violations == 0 ? Status::Pass : Status::Fail,
          std::to_string(4 - wrong) + "/4 reference questions correct, " + std::to_string(violations) +
              " priority violations in 1000 cases"};
}

// 3. Reformatting against independent oracles.
Outcome reformatting() {
  corpus::SyntheticSceneConfig sc;
  sc.num_images = 100;
  sc.seed = 3;
  const auto c = corpus::gen_synthetic_corpus(sc);
  const auto tasks = corpus::daquar_task_set();
  const auto groups = corpus::group_by_image(c.questions);
  const auto mt = corpus::reformat_multitask(groups, tasks);

  std::map<std::string, std::size_t> per_image;
  for (const auto& ex : mt) ++per_image[ex.image_id];
  std::size_t count_mismatch = 0, oracle_total = 0;
  for (const auto& g : groups) {
    const auto oracle = testing::enumerate_multitask(g, tasks);
    oracle_total += oracle.size();
    const auto it = per_image.find(g.image_id);
    if ((it == per_image.end() ? 0 : it->second) != oracle.size()) ++count_mismatch;
  }

  // Set union of questions from images with at least two present types,
  // taken straight from the labelled questions.
  std::set<corpus::SingleTaskExample> union_oracle;
  for (const auto& g : groups) {
    if (g.present_types(tasks) < 2) continue;
    for (auto t : tasks)
      for (const auto& q : g.questions(t)) union_oracle.insert({q.image_id, t, q.tokens, q.answer});
  }
  const auto flat = corpus::flatten_single_task(mt);
  const std::set<corpus::SingleTaskExample> flat_set(flat.begin(), flat.end());
  const bool flat_ok = flat.size() == flat_set.size() && flat_set == union_oracle;

  std::size_t filled = 0;
  for (const auto& ex : mt) filled += ex.filled_count();
  const auto iso = corpus::isolate_slots(mt);

  const bool ok = count_mismatch == 0 && oracle_total == mt.size() && flat_ok && iso.size() == filled;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(groups.size()) + " images, " + std::to_string(mt.size()) + " examples vs oracle " +
              std::to_string(oracle_total) + " (" + std::to_string(count_mismatch) + " images differ); flatten " +
              std::to_string(flat.size()) + " vs union " + std::to_string(union_oracle.size()) + "; isolated " +
              std::to_string(iso.size()) + " vs filled " + std::to_string(filled)};
}

bool is_positive_zero(double x) {
  std::uint64_t bits;
  std::memcpy(&bits, &x, sizeof bits);
  return bits == 0;
}

// 4. All-masked batch: zero loss and bit-exact zero gradients.
Outcome mask_exactness() {
  std::size_t nonzero = 0, checked = 0;
  double max_loss = 0.0;
  for (auto variant : {models::Variant::MtlSimple, models::Variant::StlSimple, models::Variant::VqateamStl,
                       models::Variant::VqateamMtl}) {
    models::ModelConfig cfg;
    cfg.variant = variant;
    cfg.answers = {"a", "b", "c", "d"};
    cfg.embed_dim = 6;
    cfg.max_len = 5;
    cfg.feature_dim = 7;
    textenc::Vocabulary vocab;
    for (const char* w : {"what", "colour", "many", "cup"}) vocab.add(w);
    models::Model m(cfg, vocab, 13);
    m.zero_grad();
    std::mt19937_64 rng(5);
    const std::size_t batch = 8;
    ad::Graph g;
    for (std::size_t b = 0; b < batch; ++b) {
      std::vector<float> image(cfg.feature_dim);
      for (auto& x : image) x = static_cast<float>(std::uniform_real_distribution<double>(-1, 1)(rng));
      std::vector<std::vector<int>> qs(cfg.slot_count(), std::vector<int>(cfg.max_len, 0));
      for (auto& q : qs)
        for (std::size_t t = 0; t < 3; ++t) q[t] = static_cast<int>(1 + rng() % 4);
      const std::vector<int> targets(cfg.slot_count(), 1);
      const std::vector<std::uint8_t> mask(cfg.slot_count(), 0);
      g.clear();
      const auto logits = m.forward(g, image, qs);
      const auto loss = models::multitask_loss(g, logits, targets, mask);
      const double l = g.value(loss)[0];
      if (!is_positive_zero(l)) ++nonzero;
      max_loss = std::max(max_loss, std::abs(l));
      g.backward(loss, 1.0 / static_cast<double>(batch));
    }
    for (const auto& p : m.parameters()) {
      for (double x : p.grad.values()) {
        ++checked;
        if (!is_positive_zero(x)) ++nonzero;
      }
    }
  }
  return {nonzero == 0 ? Status::Pass : Status::Fail,
          std::to_string(checked) + " gradient entries over 4 variants, " + std::to_string(nonzero) +
              " non-zero values, max |loss| " + fmt("%g", max_loss)};
}

// 5. Memorisation of a small noise-free corpus.
Outcome overfit() {
  corpus::SyntheticSceneConfig sc;
  sc.num_images = 64;
  sc.max_questions_per_type = 1;
  sc.noise_std = 0.0;
  sc.seed = 7;
  const auto c = corpus::gen_synthetic_corpus(sc);
  const auto tasks = corpus::daquar_task_set();
  const auto mt = corpus::reformat_multitask(corpus::group_by_image(c.questions), tasks);
  const auto enc = harness::build_encoders(c.questions);

  models::ModelConfig mc;
  mc.variant = models::Variant::MtlSimple;
  mc.tasks = tasks;
  mc.answers = enc.answers.labels();
  mc.feature_dim = c.features.dim();
  mc.embed_dim = 16;
  mc.max_len = 8;
  mc.filters_per_width = 16;
  mc.hidden_width = 64;
  mc.image_width = 32;
  const auto data = models::encode_multitask(mt, tasks, enc.vocab, enc.answers, mc.max_len);

  harness::TrainConfig tc;
  tc.monitor = harness::Monitor::Training;
  tc.batch_size = 8;
  tc.max_epochs_nadam = 450;
  tc.max_epochs_sgd = 50;
  models::Model m(mc, enc.vocab, 1);
  const auto t0 = Clock::now();
  const auto h = harness::train(m, data, c.features, tc);
  const double secs = seconds_since(t0);
  const double acc = harness::evaluate(m, data, c.features).total_accuracy().value_or(0.0);
  const bool ok = data.size() == 64 && acc >= 95.0 && h.epochs.size() <= 500 && secs < 300.0;
  return {ok ? Status::Pass : Status::Fail,
          std::to_string(data.size()) + " examples, training accuracy " + fmt("%.2f", acc) + "% after " +
              std::to_string(h.epochs.size()) + " epochs, " + fmt("%.1f", secs) + " s"};
}

// 6. Direction of the multi-task effect on a larger synthetic corpus.
Outcome direction() {
  corpus::SyntheticSceneConfig sc;
  sc.num_images = 1000;
  sc.seed = 11;
  const auto data = harness::synthetic_experiment_data(sc);
  harness::ExperimentSpec spec;
  spec.kind = harness::ExperimentKind::MtlVsStl;
  spec.model.embed_dim = 16;
  spec.model.max_len = 8;
  spec.model.filters_per_width = 16;
  spec.train.batch_size = 32;
  spec.train.max_epochs_nadam = 80;
  spec.train.max_epochs_sgd = 10;
  spec.seeds = {1, 2, 3};
  const auto t0 = Clock::now();
  const auto report = harness::run_experiment(spec, data);
  const double secs = seconds_since(t0);

  const double mtl = report.rows[0].cells.back().value_or(0.0);
  const double stl = report.rows[1].cells.back().value_or(0.0);
  std::size_t earlier = 0;
  std::string epochs;
  for (const auto& run : report.runs) {
    const auto m = run.arms[0].history.converged_nadam.value_or(0);
    const auto s = run.arms[1].history.converged_nadam.value_or(0);
    earlier += m <= s;
    epochs += " " + std::to_string(m) + "/" + std::to_string(s);
  }
  const bool ok = mtl >= stl && earlier >= 2 && secs < 1800.0;
  return {ok ? Status::Pass : Status::Fail,
          "total accuracy MTL " + fmt("%.2f", mtl) + "% vs STL " + fmt("%.2f", stl) +
              "%, convergence epoch MTL/STL per seed" + epochs + " (" + std::to_string(earlier) + "/3 MTL <= STL), " +
              fmt("%.1f", secs) + " s"};
}

// 7. Pad invariance of isolated slots and the combined-vs-split delta.
Outcome shared_information() {
  corpus::SyntheticSceneConfig sc;
  sc.num_images = 300;
  sc.seed = 17;
  const auto data = harness::synthetic_experiment_data(sc);
  harness::ExperimentSpec spec;
  spec.model.embed_dim = 16;
  spec.model.max_len = 8;
  spec.model.filters_per_width = 16;
  spec.train.batch_size = 32;
  spec.train.max_epochs_nadam = 30;
  spec.train.max_epochs_sgd = 5;
  spec.seeds = {1};

  spec.kind = harness::ExperimentKind::ArchitectureControl;
  const auto arch = harness::run_experiment(spec, data);
  const auto mismatches = arch.runs.front().isolation_mismatches;

  spec.kind = harness::ExperimentKind::SharedInfoControl;
  const auto shared = harness::run_experiment(spec, data);
  const auto delta = shared.runs.front().shared_info_delta;

  const bool ok = mismatches == std::size_t{0} && delta.has_value();
  return {ok ? Status::Pass : Status::Fail,
          "isolated-vs-combined mismatched slots " + (mismatches ? std::to_string(*mismatches) : std::string("n/a")) +
              ", combined minus split total accuracy " + (delta ? fmt("%+.2f", *delta) + " points" : "n/a")};
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

int run_cli_quietly(std::vector<std::string> args) {
  args.insert(args.begin(), "mtvqa");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream sink;
  auto* old = std::cout.rdbuf(sink.rdbuf());
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data());
  std::cout.rdbuf(old);
  return code;
}

// 8. Two identical end-to-end runs give byte-identical reports.
Outcome determinism() {
  const auto dir = testing::scratch_dir("acceptance_determinism");
  int codes = 0;
  for (const char* sub : {"a", "b"}) {
    codes += run_cli_quietly({"experiment", "mtl_vs_stl", "--synth-images", "120", "--seeds", "2", "--seed", "5",
                              "--set", "embed_dim=8", "--set", "filters_per_width=8", "--set", "max_len=8",
                              "--set", "max_epochs_nadam=5", "--set", "max_epochs_sgd=2", "--output-dir",
                              (dir / sub).string()});
  }
  std::size_t differing = 0, compared = 0;
  for (const char* f : {"table.csv", "table_raw.csv", "convergence.csv", "table.md", "manifest.json"}) {
    ++compared;
    const auto a = slurp(dir / "a" / f);
    if (a.empty() || a != slurp(dir / "b" / f)) ++differing;
  }
  return {codes == 0 && differing == 0 ? Status::Pass : Status::Fail,
          std::to_string(compared - differing) + "/" + std::to_string(compared) + " report files identical"};
}

// 9. Corpus counts on the real datasets, when available.
Outcome real_corpora() {
  const char* daquar = std::getenv("MTVQA_DAQUAR_TRAIN");
  const char* cocoqa = std::getenv("MTVQA_COCOQA_TRAIN_DIR");
  if (!daquar && !cocoqa) return {Status::Skip, "set MTVQA_DAQUAR_TRAIN and/or MTVQA_COCOQA_TRAIN_DIR to run"};
  bool ok = true;
  std::string d;
  if (daquar) {
    const auto raw = corpus::parse_daquar(daquar);
    const auto labeled = corpus::label_corpus(raw, corpus::KeywordConfig::daquar_default()).labeled;
    const auto mt = corpus::reformat_multitask(corpus::group_by_image(labeled), corpus::daquar_task_set());
    const auto stats = corpus::corpus_stats(mt);
    ok = ok && raw.size() == 6794 && stats.examples == 92288;
    d += "DAQUAR source " + std::to_string(raw.size()) + "/6794, multi-task " + std::to_string(stats.examples) +
         "/92288";
  } else {
    d += "DAQUAR not supplied";
  }
  if (cocoqa) {
    const auto labeled = corpus::parse_cocoqa(cocoqa);
    const auto mt = corpus::reformat_multitask(corpus::group_by_image(labeled), corpus::cocoqa_task_set());
    const auto stats = corpus::corpus_stats(mt);
    ok = ok && labeled.size() == 78736 && stats.examples == 240080;
    d += "; COCO-QA source " + std::to_string(labeled.size()) + "/78736, multi-task " +
         std::to_string(stats.examples) + "/240080";
  } else {
    d += "; COCO-QA not supplied";
  }
  return {ok ? Status::Pass : Status::Fail, d};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradients},
      {"classifier fidelity", classifier},
      {"reformatting oracle", reformatting},
      {"mask exactness", mask_exactness},
      {"overfit check", overfit},
      {"direction check", direction},
      {"shared-information mechanism", shared_information},
      {"determinism", determinism},
      {"real corpus counts", real_corpora},
  };
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {Status::Fail, std::string("exception: ") + e.what()};
    }
    const char* tag = o.status == Status::Pass ? "PASS" : o.status == Status::Skip ? "SKIP" : "FAIL";
    std::printf("%s criterion %zu (%s): %s\n", tag, i + 1, criteria[i].first, o.detail.c_str());
    std::fflush(stdout);
    all = all && o.status != Status::Fail;
  }
  return all ? 0 : 1;
}
