#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtvqa/corpus/features.hpp"
#include "mtvqa/corpus/types.hpp"

namespace mtvqa::corpus {

struct SyntheticSceneConfig {
  std::size_t num_images = 100;
  std::vector<std::string> nouns = {"cup", "book", "ball", "chair", "lamp", "vase"};
  std::vector<std::string> colours = {"red", "green", "blue", "yellow", "white", "black"};
  std::size_t grid = 3;  // positions form a grid x grid layout
  std::vector<std::string> sizes = {"small", "medium", "large"};
  std::size_t max_count = 4;
  std::size_t min_objects = 2;
  std::size_t max_objects = 4;
  double noise_std = 0.1;
  std::uint64_t seed = 1;
  /// Question types emitted; every image gets between min_types_per_image
  /// and |question_types| distinct types.
  TaskSet question_types = {QuestionType::Colour, QuestionType::Count, QuestionType::Position, QuestionType::Size};
  std::size_t min_types_per_image = 2;
  std::size_t max_questions_per_type = 2;
  std::string image_prefix = "img";
};

struct SyntheticCorpus {
  std::vector<LabeledQuestion> questions;
  FeatureStore features;
};

/// Samples scenes of distinct objects (noun, colour, grid cell, size,
/// multiplicity) and emits templated questions whose answers are read off
/// the scene:
///   colour   "what colour is the <noun>"   -> colour
///   count    "how many <noun> are there"   -> multiplicity
///   position "where is the <noun>"         -> grid cell name
///   size     "how big is the <noun>"       -> size
///   object   "what is at the <cell>"       -> noun
/// Features are per-noun indicator blocks [present, colour, cell, size,
/// count] plus N(0, noise_std) on every coordinate. Deterministic in `seed`.
SyntheticCorpus gen_synthetic_corpus(const SyntheticSceneConfig& cfg);

std::size_t synthetic_feature_dim(const SyntheticSceneConfig& cfg);
std::vector<std::string> synthetic_position_names(std::size_t grid);

}  // namespace mtvqa::corpus
