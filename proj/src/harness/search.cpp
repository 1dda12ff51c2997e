#include <cmath>
#include <cstdio>
#include <random>

#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"

namespace mtvqa::harness {

void SearchSpace::validate() const {
  if (!std::isfinite(log10_lr_min) || !std::isfinite(log10_lr_max) || log10_lr_min > log10_lr_max) {
    throw ConfigError("harness", "learning-rate range is empty");
  }
  if (batch_sizes.empty() || hidden_widths.empty()) throw ConfigError("harness", "search space has an empty axis");
  for (auto b : batch_sizes)
    if (b == 0) throw ConfigError("harness", "batch sizes must be positive");
  for (auto h : hidden_widths)
    if (h == 0) throw ConfigError("harness", "hidden widths must be positive");
}

SearchResult search_hyperparams(const SearchSpace& space, std::size_t budget, std::uint64_t seed,
                                const SearchProblem& problem) {
  space.validate();
  if (budget < 1) throw ConfigError("harness", "search budget must be at least 1");
  if (!problem.features) throw ConfigError("harness", "search problem has no features");

  std::mt19937_64 rng(seed);
  auto pick = [&](const std::vector<std::size_t>& xs) {
    return xs[std::uniform_int_distribution<std::size_t>(0, xs.size() - 1)(rng)];
  };

  SearchResult result;
  double best = -1.0;
  for (std::size_t i = 0; i < budget; ++i) {
    Trial trial;
    trial.index = i;
    const double exponent = space.log10_lr_min == space.log10_lr_max
                                ? space.log10_lr_min
                                : std::uniform_real_distribution<double>(space.log10_lr_min, space.log10_lr_max)(rng);
    trial.nadam_lr = std::pow(10.0, exponent);
    trial.batch_size = pick(space.batch_sizes);
    trial.hidden_width = pick(space.hidden_widths);

    TrainConfig tc = problem.train;
    tc.nadam.lr = trial.nadam_lr;
    tc.batch_size = trial.batch_size;
    models::ModelConfig mc = problem.model;
    if (mc.variant == models::Variant::MtlSimple || mc.variant == models::Variant::StlSimple) {
      mc.hidden_width = trial.hidden_width;
    } else {
      mc.common_width = trial.hidden_width;
    }

    models::Model model(mc, problem.vocab, tc.seed);
    train(model, problem.train_subset, *problem.features, tc);
    trial.accuracy = evaluate(model, problem.holdout, *problem.features).total_accuracy().value_or(0.0);
    if (trial.accuracy > best) {
      best = trial.accuracy;
      result.best_index = i;
      result.best_train = tc;
      result.best_model = mc;
    }
    result.trials.push_back(trial);
  }
  return result;
}

std::string trials_csv(const SearchResult& result) {
  std::string out = "trial,nadam_lr,batch_size,hidden_width,accuracy,best\n";
  char buf[256];
  for (const auto& t : result.trials) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%zu,%zu,%.17g,%d\n", t.index, t.nadam_lr, t.batch_size, t.hidden_width,
                  t.accuracy, t.index == result.best_index ? 1 : 0);
    out += buf;
  }
  return out;
}

}  // namespace mtvqa::harness
