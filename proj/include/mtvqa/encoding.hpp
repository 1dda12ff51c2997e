#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtvqa/corpus/types.hpp"
#include "mtvqa/textenc.hpp"

namespace mtvqa::models {

/// Model-ready example: one id sequence, target and mask flag per slot.
/// Targets are -1 for masked slots and for answers outside the label set
/// (those can only be scored as wrong).
struct EncodedExample {
  std::string image_id;
  std::vector<std::vector<int>> questions;
  std::vector<int> targets;
  std::vector<std::uint8_t> mask;
  std::vector<corpus::QuestionType> types;

  friend bool operator==(const EncodedExample&, const EncodedExample&) = default;
};

using EncodedDataset = std::vector<EncodedExample>;

/// One slot per task, in task order; absent slots are all-pad.
EncodedDataset encode_multitask(const std::vector<corpus::MultiTaskExample>& examples, const corpus::TaskSet& tasks,
                                const textenc::Vocabulary& vocab, const textenc::LabelSet& answers,
                                std::size_t max_len);

/// One slot per example.
EncodedDataset encode_single(const std::vector<corpus::SingleTaskExample>& examples, const textenc::Vocabulary& vocab,
                             const textenc::LabelSet& answers, std::size_t max_len);

textenc::Vocabulary question_vocab(const std::vector<corpus::MultiTaskExample>& examples);
textenc::LabelSet answer_labels(const std::vector<corpus::MultiTaskExample>& examples);

}  // namespace mtvqa::models
