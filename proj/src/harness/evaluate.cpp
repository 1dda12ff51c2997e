#include <algorithm>
#include <cmath>
#include <cstring>

#include "mtvqa/error.hpp"
#include "mtvqa/harness.hpp"

namespace mtvqa::harness {

double rounded_percent(std::size_t correct, std::size_t total) {
  if (total == 0) return 0.0;
  // tenths of a percent, halves up: floor((1000 c / t) + 1/2)
  const auto tenths = (2000 * static_cast<unsigned long long>(correct) + total) / (2 * static_cast<unsigned long long>(total));
  return static_cast<double>(tenths) / 10.0;
}

double round_half_up(double percent) {
  // the epsilon absorbs representation error in values such as 0.15
  return std::floor(percent * 10.0 + 0.5 + 1e-9) / 10.0;
}

std::optional<double> EvalReport::accuracy(corpus::QuestionType t) const {
  const auto& s = per_type[corpus::index_of(t)];
  if (s.total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(s.correct) / static_cast<double>(s.total);
}

std::optional<double> EvalReport::total_accuracy() const {
  if (overall.total == 0) return std::nullopt;
  return 100.0 * static_cast<double>(overall.correct) / static_cast<double>(overall.total);
}

std::optional<double> EvalReport::rounded(corpus::QuestionType t) const {
  const auto& s = per_type[corpus::index_of(t)];
  if (s.total == 0) return std::nullopt;
  return rounded_percent(s.correct, s.total);
}

std::optional<double> EvalReport::rounded_total() const {
  if (overall.total == 0) return std::nullopt;
  return rounded_percent(overall.correct, overall.total);
}

std::vector<int> predict(const models::Model& model, const models::EncodedExample& ex,
                         const corpus::FeatureStore& features) {
  const auto rows = model.logits(features.at(ex.image_id), ex.questions);
  std::vector<int> out(rows.size(), -1);
  for (std::size_t s = 0; s < rows.size(); ++s) {
    if (!ex.mask[s]) continue;
    out[s] = static_cast<int>(std::max_element(rows[s].begin(), rows[s].end()) - rows[s].begin());
  }
  return out;
}

EvalReport evaluate(const models::Model& model, const models::EncodedDataset& data,
                    const corpus::FeatureStore& features) {
  EvalReport report;
  for (const auto& ex : data) {
    if (std::none_of(ex.mask.begin(), ex.mask.end(), [](std::uint8_t m) { return m != 0; })) continue;
    const auto pred = predict(model, ex, features);
    for (std::size_t s = 0; s < pred.size(); ++s) {
      if (!ex.mask[s]) continue;
      const bool hit = ex.targets[s] >= 0 && pred[s] == ex.targets[s];
      auto& score = report.per_type[corpus::index_of(ex.types[s])];
      ++score.total;
      ++report.overall.total;
      if (hit) {
        ++score.correct;
        ++report.overall.correct;
      }
    }
  }
  return report;
}

double mean_loss(const models::Model& model, const models::EncodedDataset& data, const corpus::FeatureStore& features) {
  if (data.empty()) return 0.0;
  double total = 0.0;
  ad::Graph g;
  for (const auto& ex : data) {
    g.clear();
    const auto logits = model.forward(g, features.at(ex.image_id), ex.questions);
    std::vector<std::uint8_t> mask(ex.mask);
    for (std::size_t s = 0; s < mask.size(); ++s)
      if (ex.targets[s] < 0) mask[s] = 0;
    total += g.value(models::multitask_loss(g, logits, ex.targets, mask))[0];
  }
  return total / static_cast<double>(data.size());
}

Encoders build_encoders(const std::vector<corpus::LabeledQuestion>& train) {
  Encoders enc;
  for (const auto& q : train) {
    for (const auto& tok : q.tokens) enc.vocab.add(tok);
    enc.answers.add(q.answer);
  }
  return enc;
}

std::vector<corpus::MultiTaskExample> as_isolated(const std::vector<corpus::SingleTaskExample>& singles) {
  std::vector<corpus::MultiTaskExample> out;
  out.reserve(singles.size());
  for (const auto& s : singles) {
    corpus::MultiTaskExample ex;
    ex.image_id = s.image_id;
    ex.slot(s.qtype) = corpus::QaSlot{s.tokens, s.answer};
    out.push_back(std::move(ex));
  }
  return out;
}

std::size_t isolation_mismatches(const models::Model& model, const std::vector<corpus::MultiTaskExample>& test,
                                 const textenc::LabelSet& answers, const corpus::FeatureStore& features) {
  const auto& cfg = model.config();
  if (!models::is_multitask(cfg.variant)) {
    throw ConfigError("harness", "isolation check needs a multi-task model");
  }
  const auto isolated = corpus::isolate_slots(test);
  const auto encoded = models::encode_multitask(isolated, cfg.tasks, model.vocab(), answers, cfg.max_len);
  std::size_t mismatches = 0;
  for (std::size_t i = 0; i < isolated.size(); ++i) {
    const auto& ex = isolated[i];
    const auto image = features.at(ex.image_id);
    const auto via_pipeline = model.logits(image, encoded[i].questions);
    for (std::size_t s = 0; s < cfg.tasks.size(); ++s) {
      const auto& slot = ex.slot(cfg.tasks[s]);
      if (!slot) continue;
      std::vector<std::vector<int>> direct(cfg.tasks.size(), std::vector<int>(cfg.max_len, textenc::Vocabulary::kPad));
      direct[s] = textenc::encode(slot->tokens, model.vocab(), cfg.max_len);
      const auto reference = model.logits(image, direct);
      const auto& a = via_pipeline[s];
      const auto& b = reference[s];
      if (a.size() != b.size() || std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) ++mismatches;
    }
  }
  return mismatches;
}

}  // namespace mtvqa::harness
