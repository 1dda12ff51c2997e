#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "mtvqa/autodiff/gradcheck.hpp"
#include "mtvqa/autodiff/graph.hpp"
#include "mtvqa/autodiff/ops.hpp"
#include "mtvqa/corpus/keywords.hpp"
#include "mtvqa/corpus/reformat.hpp"

namespace mtvqa::testing {

ad::Tensor random_tensor(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double scale = 1.0);

/// sum(x * weights) as a scalar node, so any tensor output can be
/// gradient-checked against a fixed random projection.
ad::Var weighted_sum(ad::Graph& g, ad::Var x, const ad::Tensor& weights);

/// One gradient-check outcome for a named case.
struct GradCase {
  std::string name;
  double max_rel_error = 0.0;
  std::string worst;
  bool passed = true;
};

/// 100 seeded random instances per differentiable operator.
std::vector<GradCase> operator_gradient_suite(std::size_t instances = 100);
/// Seeded random small configurations of every model variant.
std::vector<GradCase> model_gradient_suite(std::size_t instances = 100);

/// Every way of choosing one question per present type from one image, by
/// exhaustive enumeration (including "no question" for each type).
std::vector<corpus::MultiTaskExample> enumerate_multitask(const corpus::ImageGroup& group,
                                                          const corpus::TaskSet& tasks);

/// Generates `cases` token sequences each holding keywords of two different
/// types among neutral filler words and counts those not classified as the
/// higher-priority type.
std::size_t keyword_priority_violations(const corpus::KeywordConfig& cfg, std::size_t cases, std::uint64_t seed);

/// Fresh empty directory under the system temp dir.
std::filesystem::path scratch_dir(const std::string& name);

}  // namespace mtvqa::testing
