#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

#include "mtvqa/corpus/types.hpp"

namespace mtvqa::corpus {

struct ImageGroup {
  std::string image_id;
  std::array<std::vector<LabeledQuestion>, kNumQuestionTypes> by_type;

  const std::vector<LabeledQuestion>& questions(QuestionType t) const { return by_type[index_of(t)]; }
  /// Number of types in `tasks` with at least one question.
  std::size_t present_types(const TaskSet& tasks) const;
};

/// One group per distinct image id, sorted by id; order within a type is
/// preserved and duplicates are kept.
std::vector<ImageGroup> group_by_image(const std::vector<LabeledQuestion>& qs);

/// Cartesian product over the task types present in each group (one
/// question per present type per example); absent types stay empty.
/// Groups with fewer than two present types produce nothing.
std::vector<MultiTaskExample> reformat_multitask(const std::vector<ImageGroup>& groups, const TaskSet& tasks);

/// Deduplicated filled slots, in first-occurrence order.
std::vector<SingleTaskExample> flatten_single_task(const std::vector<MultiTaskExample>& examples);

/// One copy per filled slot with every other slot emptied.
std::vector<MultiTaskExample> isolate_slots(const std::vector<MultiTaskExample>& examples);

struct CorpusStats {
  std::size_t examples = 0;
  std::array<std::size_t, kNumQuestionTypes> filled_per_type{};
  std::size_t qualifying_images = 0;
  std::size_t answer_vocabulary = 0;

  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

CorpusStats corpus_stats(const std::vector<MultiTaskExample>& examples);

}  // namespace mtvqa::corpus
