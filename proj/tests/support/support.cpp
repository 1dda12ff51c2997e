#include "support.hpp"

#include <algorithm>

#include "mtvqa/models.hpp"

namespace mtvqa::testing {

namespace {

using ad::Graph;
using ad::Parameter;
using ad::Tensor;
using ad::Var;

struct Instance {
  std::vector<Parameter> params;
  std::function<Var(Graph&, std::vector<Var>&)> body;
};

// Runs check_gradients over every parameter of `inst` and folds the
// result into `acc`.
void check(Instance& inst, GradCase& acc) {
  std::vector<Parameter*> ptrs;
  for (auto& p : inst.params) ptrs.push_back(&p);
  auto build = [&](Graph& g) {
    std::vector<Var> leaves;
    for (auto& p : inst.params) leaves.push_back(g.param(p));
    return inst.body(g, leaves);
  };
  const auto report = ad::check_gradients(ptrs, build);
  if (report.max_rel_error >= acc.max_rel_error) {
    acc.max_rel_error = report.max_rel_error;
    acc.worst = report.worst_parameter + "[" + std::to_string(report.worst_index) + "]";
  }
  acc.passed = acc.passed && report.passed;
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

template <class Make>
GradCase run_cases(const std::string& name, std::size_t instances, Make make) {
  GradCase acc{name, 0.0, "", true};
  for (std::size_t seed = 0; seed < instances; ++seed) {
    std::mt19937_64 rng(seed * 7919 + 17);
    Instance inst = make(rng);
    check(inst, acc);
  }
  return acc;
}

}  // namespace

Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale) {
  std::uniform_real_distribution<double> dist(-scale, scale);
  Tensor t({rows, cols});
  for (auto& v : t.values()) v = dist(rng);
  return t;
}

Var weighted_sum(Graph& g, Var x, const Tensor& weights) {
  const Tensor& xv = g.value(x);
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += xv[i] * weights[i];
  return g.make(Tensor({1, 1}, total), {x}, "weighted_sum", [x, weights](Graph& gr, Var self) {
    const double up = gr.grad(self)[0];
    Tensor& gx = gr.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += up * weights[i];
  });
}

std::vector<GradCase> operator_gradient_suite(std::size_t n) {
  std::vector<GradCase> out;

  out.push_back(run_cases("affine", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), in = pick(rng, 1, 5), o = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, r, in)}, {"W", random_tensor(rng, in, o)}, {"b", random_tensor(rng, 1, o)}};
    const Tensor proj = random_tensor(rng, r, o);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::affine(g, v[0], v[1], v[2]), proj); };
    return inst;
  }));

  out.push_back(run_cases("conv1d", n, [](std::mt19937_64& rng) {
    const auto width = pick(rng, 1, 3), t = pick(rng, width, 6), e = pick(rng, 1, 4), f = pick(rng, 1, 4);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, t, e)}, {"W", random_tensor(rng, width * e, f)}, {"b", random_tensor(rng, 1, f)}};
    const Tensor proj = random_tensor(rng, t - width + 1, f);
    inst.body = [proj, width](Graph& g, std::vector<Var>& v) {
      return weighted_sum(g, ad::conv1d(g, v[0], v[1], v[2], width), proj);
    };
    return inst;
  }));

  out.push_back(run_cases("max_over_time", n, [](std::mt19937_64& rng) {
    const auto t = pick(rng, 1, 6), f = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, t, f)}};
    const Tensor proj = random_tensor(rng, 1, f);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::max_over_time(g, v[0]), proj); };
    return inst;
  }));

  out.push_back(run_cases("tanh", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, r, c, 2.0)}};
    const Tensor proj = random_tensor(rng, r, c);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::tanh(g, v[0]), proj); };
    return inst;
  }));

  out.push_back(run_cases("sigmoid", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, r, c, 4.0)}};
    const Tensor proj = random_tensor(rng, r, c);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::sigmoid(g, v[0]), proj); };
    return inst;
  }));

  out.push_back(run_cases("add", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"a", random_tensor(rng, r, c)}, {"b", random_tensor(rng, r, c)}};
    const Tensor proj = random_tensor(rng, r, c);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::add(g, v[0], v[1]), proj); };
    return inst;
  }));

  out.push_back(run_cases("mul", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c = pick(rng, 1, 5);
    Instance inst;
    inst.params = {{"a", random_tensor(rng, r, c)}, {"b", random_tensor(rng, r, c)}};
    const Tensor proj = random_tensor(rng, r, c);
    // a * a exercises a node used twice by the same operator
    inst.body = [proj](Graph& g, std::vector<Var>& v) {
      return weighted_sum(g, ad::mul(g, ad::mul(g, v[0], v[1]), v[0]), proj);
    };
    return inst;
  }));

  out.push_back(run_cases("concat", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c1 = pick(rng, 1, 4), c2 = pick(rng, 1, 4);
    Instance inst;
    inst.params = {{"a", random_tensor(rng, r, c1)}, {"b", random_tensor(rng, r, c2)}};
    const Tensor proj = random_tensor(rng, r, c1 + c2 + c1);
    inst.body = [proj](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::concat(g, {v[0], v[1], v[0]}), proj); };
    return inst;
  }));

  out.push_back(run_cases("slice_cols", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 3), c = pick(rng, 2, 6);
    const auto begin = pick(rng, 0, c - 1), count = pick(rng, 1, c - begin);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, r, c)}};
    const Tensor proj = random_tensor(rng, r, count);
    inst.body = [proj, begin, count](Graph& g, std::vector<Var>& v) {
      return weighted_sum(g, ad::slice_cols(g, v[0], begin, count), proj);
    };
    return inst;
  }));

  out.push_back(run_cases("select_row", n, [](std::mt19937_64& rng) {
    const auto r = pick(rng, 1, 4), c = pick(rng, 1, 5), row = pick(rng, 0, r - 1);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, r, c)}};
    const Tensor proj = random_tensor(rng, 1, c);
    inst.body = [proj, row](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::select_row(g, v[0], row), proj); };
    return inst;
  }));

  out.push_back(run_cases("embedding", n, [](std::mt19937_64& rng) {
    // ids avoid the pad row, which is read but deliberately never trained
    const auto vocab = pick(rng, 2, 6), e = pick(rng, 1, 4), len = pick(rng, 1, 6);
    std::vector<int> ids(len);
    for (auto& id : ids) id = static_cast<int>(pick(rng, 1, vocab - 1));
    Instance inst;
    inst.params = {{"table", random_tensor(rng, vocab, e)}};
    const Tensor proj = random_tensor(rng, len, e);
    inst.body = [proj, ids](Graph& g, std::vector<Var>& v) { return weighted_sum(g, ad::embedding(g, v[0], ids), proj); };
    return inst;
  }));

  out.push_back(run_cases("softmax_cross_entropy_masked", n, [](std::mt19937_64& rng) {
    const auto heads = pick(rng, 1, 4), k = pick(rng, 2, 6);
    Instance inst;
    std::vector<int> targets;
    std::vector<std::uint8_t> mask;
    for (std::size_t h = 0; h < heads; ++h) {
      inst.params.push_back({"logits" + std::to_string(h), random_tensor(rng, 1, k, 3.0)});
      targets.push_back(static_cast<int>(pick(rng, 0, k - 1)));
      mask.push_back(h == 0 ? 1 : static_cast<std::uint8_t>(pick(rng, 0, 1)));
    }
    inst.body = [targets, mask](Graph& g, std::vector<Var>& v) {
      return ad::softmax_cross_entropy_masked(g, v, targets, mask);
    };
    return inst;
  }));

  out.push_back(run_cases("lstm_step", n, [](std::mt19937_64& rng) {
    const auto in = pick(rng, 1, 4), h = pick(rng, 1, 3);
    Instance inst;
    inst.params = {{"x", random_tensor(rng, 1, in)},
                   {"h", random_tensor(rng, 1, h)},
                   {"c", random_tensor(rng, 1, h)},
                   {"W", random_tensor(rng, in + h, 4 * h)},
                   {"b", random_tensor(rng, 1, 4 * h)}};
    const Tensor ph = random_tensor(rng, 1, h), pc = random_tensor(rng, 1, h);
    inst.body = [ph, pc](Graph& g, std::vector<Var>& v) {
      const ad::LstmWeights w{v[3], v[4]};
      // two steps so the recurrent path is exercised
      auto s = ad::lstm_step(g, v[0], {v[1], v[2]}, w);
      s = ad::lstm_step(g, v[0], s, w);
      return ad::add(g, weighted_sum(g, s.h, ph), weighted_sum(g, s.c, pc));
    };
    return inst;
  }));

  return out;
}

std::vector<GradCase> model_gradient_suite(std::size_t n) {
  using models::Variant;
  std::vector<GradCase> out;
  for (Variant variant : {Variant::MtlSimple, Variant::StlSimple, Variant::VqateamStl, Variant::VqateamMtl}) {
    GradCase acc{"model " + std::string(models::to_string(variant)), 0.0, "", true};
    for (std::size_t seed = 0; seed < n; ++seed) {
      std::mt19937_64 rng(seed * 104729 + 3);
      models::ModelConfig cfg;
      cfg.variant = variant;
      cfg.tasks = {corpus::QuestionType::Colour, corpus::QuestionType::Count};
      cfg.answers = {"a", "b", "c"};
      cfg.embed_dim = 2;
      cfg.max_len = 3;
      cfg.filter_widths = {1, 2};
      cfg.filters_per_width = 2;
      cfg.hidden_width = 3;
      cfg.feature_dim = 3;
      cfg.image_width = 2;
      cfg.lstm_layers = 2;
      cfg.lstm_width = 2;
      cfg.common_width = 2;
      cfg.classifier_widths = {3};
      textenc::Vocabulary vocab;
      for (const char* w : {"what", "colour", "many", "cup"}) vocab.add(w);
      models::Model model(cfg, vocab, seed);
      // Glorot initialisation keeps pre-activations small; widen the
      // weights so saturating regions are covered too.
      for (auto& p : model.parameters())
        for (auto& x : p.value.values()) x += std::uniform_real_distribution<double>(-0.5, 0.5)(rng);
      for (auto& x : model.parameter("embedding").value.row(0)) x = 0.0;  // pad row stays zero

      std::vector<float> image(cfg.feature_dim);
      for (auto& x : image) x = static_cast<float>(std::uniform_real_distribution<double>(-1, 1)(rng));
      // No pad ids: the pad row is read but never trained, so it has no
      // analytic gradient to compare.
      std::vector<std::vector<int>> questions(cfg.slot_count(), std::vector<int>(cfg.max_len));
      for (auto& q : questions)
        for (auto& id : q) id = static_cast<int>(pick(rng, 1, vocab.size() - 1));
      std::vector<int> targets;
      std::vector<std::uint8_t> mask;
      for (std::size_t s = 0; s < cfg.slot_count(); ++s) {
        targets.push_back(static_cast<int>(pick(rng, 0, cfg.answers.size() - 1)));
        mask.push_back(s == 0 ? 1 : static_cast<std::uint8_t>(pick(rng, 0, 1)));
      }
      std::vector<Parameter*> ptrs;
      for (auto& p : model.parameters()) ptrs.push_back(&p);
      auto build = [&](Graph& g) {
        const auto logits = model.forward(g, image, questions);
        return models::multitask_loss(g, logits, targets, mask);
      };
      const auto report = ad::check_gradients(ptrs, build);
      if (report.max_rel_error >= acc.max_rel_error) {
        acc.max_rel_error = report.max_rel_error;
        acc.worst = report.worst_parameter + "[" + std::to_string(report.worst_index) + "]";
      }
      acc.passed = acc.passed && report.passed;
    }
    out.push_back(acc);
  }
  return out;
}

std::vector<corpus::MultiTaskExample> enumerate_multitask(const corpus::ImageGroup& group,
                                                          const corpus::TaskSet& tasks) {
  std::vector<corpus::MultiTaskExample> out;
  // choice[k] == 0 picks nothing for tasks[k], choice[k] == j picks question j-1
  std::vector<std::size_t> choice(tasks.size(), 0);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == tasks.size()) {
      corpus::MultiTaskExample ex;
      ex.image_id = group.image_id;
      std::size_t filled = 0;
      for (std::size_t k = 0; k < tasks.size(); ++k) {
        const auto& qs = group.questions(tasks[k]);
        if (!qs.empty() && choice[k] == 0) return;  // a present type must be filled
        if (choice[k] == 0) continue;
        ex.slot(tasks[k]) = corpus::QaSlot{qs[choice[k] - 1].tokens, qs[choice[k] - 1].answer};
        ++filled;
      }
      if (filled >= 2) out.push_back(std::move(ex));
      return;
    }
    for (std::size_t c = 0; c <= group.questions(tasks[i]).size(); ++c) {
      choice[i] = c;
      rec(i + 1);
    }
  };
  rec(0);
  return out;
}

std::size_t keyword_priority_violations(const corpus::KeywordConfig& cfg, std::size_t cases, std::uint64_t seed) {
  static const std::vector<std::string> fillers = {"what", "is",    "the",   "a",     "of",   "there",
                                                   "are",  "cup",   "table", "object", "which", "does",
                                                   "thing", "have", "this",  "sofa"};
  std::mt19937_64 rng(seed);
  auto uniform = [&](std::size_t n) { return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng); };
  const auto& rules = cfg.rules();
  std::size_t violations = 0;
  for (std::size_t trial = 0; trial < cases; ++trial) {
    const std::size_t a = uniform(rules.size());
    std::size_t b = uniform(rules.size());
    while (b == a) b = uniform(rules.size());
    std::vector<std::string> tokens;
    for (std::size_t i = 0, n = uniform(6); i < n; ++i) tokens.push_back(fillers[uniform(fillers.size())]);
    for (std::size_t r : {a, b}) {
      const auto& kw = rules[r].keywords[uniform(rules[r].keywords.size())];
      const auto at = static_cast<std::ptrdiff_t>(uniform(tokens.size() + 1));
      tokens.insert(tokens.begin() + at, kw.begin(), kw.end());
    }
    if (corpus::classify_question(tokens, cfg) != rules[std::min(a, b)].type) ++violations;
  }
  return violations;
}

std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("mtvqa_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace mtvqa::testing
