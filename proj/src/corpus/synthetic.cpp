#include "mtvqa/corpus/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

namespace {

void validate(const SyntheticSceneConfig& cfg) {
  auto fail = [](const std::string& what) { throw ConfigError("corpus", "synthetic config: " + what); };
  if (cfg.nouns.empty()) fail("nouns list is empty");
  if (cfg.colours.empty()) fail("colours list is empty");
  if (cfg.sizes.empty()) fail("sizes list is empty");
  if (cfg.grid == 0) fail("grid must be positive");
  if (cfg.max_count == 0) fail("max_count must be positive");
  if (!(cfg.noise_std >= 0.0) || !std::isfinite(cfg.noise_std)) fail("noise_std must be finite and >= 0");
  if (cfg.min_objects == 0 || cfg.max_objects < cfg.min_objects) fail("need 1 <= min_objects <= max_objects");
  if (cfg.max_objects > cfg.nouns.size() || cfg.max_objects > cfg.grid * cfg.grid)
    fail("max_objects exceeds the number of nouns or grid cells");
  if (cfg.question_types.empty()) fail("question_types is empty");
  validate_task_set(cfg.question_types, 1);
  if (cfg.min_types_per_image == 0 || cfg.min_types_per_image > cfg.question_types.size())
    fail("min_types_per_image must be in [1, |question_types|]");
  if (cfg.max_questions_per_type == 0) fail("max_questions_per_type must be positive");
}

struct SceneObject {
  std::size_t noun;
  std::size_t colour;
  std::size_t cell;
  std::size_t size;
  std::size_t count;  // 1..max_count
};

std::string image_name(const SyntheticSceneConfig& cfg, std::size_t i) {
  const std::size_t width = std::max<std::size_t>(4, std::to_string(cfg.num_images).size());
  std::string digits = std::to_string(i);
  return cfg.image_prefix + std::string(width - digits.size(), '0') + digits;
}

}  // namespace

std::vector<std::string> synthetic_position_names(std::size_t grid) {
  if (grid == 1) return {"center"};
  std::vector<std::string> rows, cols;
  if (grid == 2) {
    rows = {"top", "bottom"};
    cols = {"left", "right"};
  } else if (grid == 3) {
    rows = {"top", "middle", "bottom"};
    cols = {"left", "center", "right"};
  } else {
    for (std::size_t i = 0; i < grid; ++i) {
      rows.push_back("r" + std::to_string(i));
      cols.push_back("c" + std::to_string(i));
    }
  }
  std::vector<std::string> out;
  for (const auto& r : rows)
    for (const auto& c : cols) out.push_back(r + "-" + c);
  return out;
}

std::size_t synthetic_feature_dim(const SyntheticSceneConfig& cfg) {
  return cfg.nouns.size() * (1 + cfg.colours.size() + cfg.grid * cfg.grid + cfg.sizes.size() + cfg.max_count);
}

SyntheticCorpus gen_synthetic_corpus(const SyntheticSceneConfig& cfg) {
  validate(cfg);
  const auto cells = synthetic_position_names(cfg.grid);
  const std::size_t block = 1 + cfg.colours.size() + cells.size() + cfg.sizes.size() + cfg.max_count;
  const std::size_t dim = synthetic_feature_dim(cfg);

  SyntheticCorpus out;
  out.features = FeatureStore(dim);
  std::mt19937_64 rng(cfg.seed);
  auto uniform = [&rng](std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
  };
  std::normal_distribution<double> noise(0.0, cfg.noise_std > 0.0 ? cfg.noise_std : 1.0);

  std::vector<std::size_t> noun_order(cfg.nouns.size());
  std::vector<std::size_t> cell_order(cells.size());
  for (std::size_t i = 0; i < cfg.num_images; ++i) {
    const std::string id = image_name(cfg, i);
    const std::size_t k = uniform(cfg.min_objects, cfg.max_objects);
    std::iota(noun_order.begin(), noun_order.end(), 0);
    std::iota(cell_order.begin(), cell_order.end(), 0);
    std::shuffle(noun_order.begin(), noun_order.end(), rng);
    std::shuffle(cell_order.begin(), cell_order.end(), rng);

    std::vector<SceneObject> scene(k);
    std::vector<float> features(dim, 0.0f);
    for (std::size_t j = 0; j < k; ++j) {
      auto& o = scene[j];
      o.noun = noun_order[j];
      o.cell = cell_order[j];
      o.colour = uniform(0, cfg.colours.size() - 1);
      o.size = uniform(0, cfg.sizes.size() - 1);
      o.count = uniform(1, cfg.max_count);
      const std::size_t base = o.noun * block;
      features[base] = 1.0f;
      features[base + 1 + o.colour] = 1.0f;
      features[base + 1 + cfg.colours.size() + o.cell] = 1.0f;
      features[base + 1 + cfg.colours.size() + cells.size() + o.size] = 1.0f;
      features[base + 1 + cfg.colours.size() + cells.size() + cfg.sizes.size() + (o.count - 1)] = 1.0f;
    }
    if (cfg.noise_std > 0.0) {
      for (auto& f : features) f = static_cast<float>(f + noise(rng));
    }
    out.features.insert(id, std::move(features));

    // Which types this image gets, emitted in configured order.
    std::vector<std::size_t> type_order(cfg.question_types.size());
    std::iota(type_order.begin(), type_order.end(), 0);
    std::shuffle(type_order.begin(), type_order.end(), rng);
    type_order.resize(uniform(cfg.min_types_per_image, cfg.question_types.size()));
    std::sort(type_order.begin(), type_order.end());

    std::vector<std::size_t> object_order(k);
    for (auto ti : type_order) {
      const QuestionType type = cfg.question_types[ti];
      const std::size_t nq = uniform(1, std::min(cfg.max_questions_per_type, k));
      std::iota(object_order.begin(), object_order.end(), 0);
      std::shuffle(object_order.begin(), object_order.end(), rng);
      for (std::size_t q = 0; q < nq; ++q) {
        const auto& o = scene[object_order[q]];
        const std::string& noun = cfg.nouns[o.noun];
        std::string text, answer;
        switch (type) {
          case QuestionType::Colour:
            text = "what colour is the " + noun;
            answer = cfg.colours[o.colour];
            break;
          case QuestionType::Count:
            text = "how many " + noun + " are there";
            answer = std::to_string(o.count);
            break;
          case QuestionType::Position:
            text = "where is the " + noun;
            answer = cells[o.cell];
            break;
          case QuestionType::Size:
            text = "how big is the " + noun;
            answer = cfg.sizes[o.size];
            break;
          case QuestionType::Object:
            text = "what is at the " + cells[o.cell];
            answer = noun;
            break;
        }
        out.questions.push_back({id, tokenize(text), answer, type});
      }
    }
  }
  return out;
}

}  // namespace mtvqa::corpus
