#include "mtvqa/encoding.hpp"

namespace mtvqa::models {

EncodedDataset encode_multitask(const std::vector<corpus::MultiTaskExample>& examples, const corpus::TaskSet& tasks,
                                const textenc::Vocabulary& vocab, const textenc::LabelSet& answers,
                                std::size_t max_len) {
  EncodedDataset out;
  out.reserve(examples.size());
  const std::vector<int> blank(max_len, textenc::Vocabulary::kPad);
  for (const auto& ex : examples) {
    EncodedExample e;
    e.image_id = ex.image_id;
    for (corpus::QuestionType t : tasks) {
      const auto& slot = ex.slot(t);
      e.types.push_back(t);
      if (slot) {
        e.questions.push_back(textenc::encode(slot->tokens, vocab, max_len));
        e.targets.push_back(answers.id(slot->answer));
        e.mask.push_back(1);
      } else {
        e.questions.push_back(blank);
        e.targets.push_back(-1);
        e.mask.push_back(0);
      }
    }
    out.push_back(std::move(e));
  }
  return out;
}

EncodedDataset encode_single(const std::vector<corpus::SingleTaskExample>& examples, const textenc::Vocabulary& vocab,
                             const textenc::LabelSet& answers, std::size_t max_len) {
  EncodedDataset out;
  out.reserve(examples.size());
  for (const auto& ex : examples) {
    EncodedExample e;
    e.image_id = ex.image_id;
    e.questions.push_back(textenc::encode(ex.tokens, vocab, max_len));
    e.targets.push_back(answers.id(ex.answer));
    e.mask.push_back(1);
    e.types.push_back(ex.qtype);
    out.push_back(std::move(e));
  }
  return out;
}

textenc::Vocabulary question_vocab(const std::vector<corpus::MultiTaskExample>& examples) {
  textenc::Vocabulary vocab;
  for (const auto& ex : examples)
    for (const auto& slot : ex.slots)
      if (slot)
        for (const auto& tok : slot->tokens) vocab.add(tok);
  return vocab;
}

textenc::LabelSet answer_labels(const std::vector<corpus::MultiTaskExample>& examples) {
  textenc::LabelSet labels;
  for (const auto& ex : examples)
    for (const auto& slot : ex.slots)
      if (slot) labels.add(slot->answer);
  return labels;
}

}  // namespace mtvqa::models
