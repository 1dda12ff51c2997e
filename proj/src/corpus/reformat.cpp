#include "mtvqa/corpus/reformat.hpp"

#include <map>
#include <set>

namespace mtvqa::corpus {

std::size_t ImageGroup::present_types(const TaskSet& tasks) const {
  std::size_t n = 0;
  for (auto t : tasks) n += by_type[index_of(t)].empty() ? 0 : 1;
  return n;
}

std::vector<ImageGroup> group_by_image(const std::vector<LabeledQuestion>& qs) {
  std::map<std::string, ImageGroup> groups;
  for (const auto& q : qs) {
    auto& g = groups[q.image_id];
    g.image_id = q.image_id;
    g.by_type[index_of(q.qtype)].push_back(q);
  }
  std::vector<ImageGroup> out;
  out.reserve(groups.size());
  for (auto& [id, g] : groups) out.push_back(std::move(g));
  return out;
}

std::vector<MultiTaskExample> reformat_multitask(const std::vector<ImageGroup>& groups, const TaskSet& tasks) {
  validate_task_set(tasks);
  std::vector<MultiTaskExample> out;
  for (const auto& g : groups) {
    std::vector<QuestionType> present;
    for (auto t : tasks) {
      if (!g.questions(t).empty()) present.push_back(t);
    }
    if (present.size() < 2) continue;

    // Odometer over one question index per present type; the last type varies fastest.
    std::vector<std::size_t> choice(present.size(), 0);
    bool done = false;
    while (!done) {
      MultiTaskExample ex;
      ex.image_id = g.image_id;
      for (std::size_t k = 0; k < present.size(); ++k) {
        const auto& q = g.questions(present[k])[choice[k]];
        ex.slot(present[k]) = QaSlot{q.tokens, q.answer};
      }
      out.push_back(std::move(ex));

      done = true;
      for (std::size_t k = present.size(); k-- > 0;) {
        if (++choice[k] < g.questions(present[k]).size()) {
          done = false;
          break;
        }
        choice[k] = 0;
      }
    }
  }
  return out;
}

std::vector<SingleTaskExample> flatten_single_task(const std::vector<MultiTaskExample>& examples) {
  std::set<SingleTaskExample> seen;
  std::vector<SingleTaskExample> out;
  for (const auto& ex : examples) {
    for (auto t : kAllQuestionTypes) {
      const auto& s = ex.slot(t);
      if (!s) continue;
      SingleTaskExample single{ex.image_id, t, s->tokens, s->answer};
      if (seen.insert(single).second) out.push_back(std::move(single));
    }
  }
  return out;
}

std::vector<MultiTaskExample> isolate_slots(const std::vector<MultiTaskExample>& examples) {
  std::vector<MultiTaskExample> out;
  for (const auto& ex : examples) {
    for (auto t : kAllQuestionTypes) {
      if (!ex.mask(t)) continue;
      MultiTaskExample one;
      one.image_id = ex.image_id;
      one.slot(t) = ex.slot(t);
      out.push_back(std::move(one));
    }
  }
  return out;
}

CorpusStats corpus_stats(const std::vector<MultiTaskExample>& examples) {
  CorpusStats s;
  std::set<std::string> images;
  std::set<std::string> answers;
  for (const auto& ex : examples) {
    ++s.examples;
    images.insert(ex.image_id);
    for (auto t : kAllQuestionTypes) {
      if (const auto& slot = ex.slot(t)) {
        ++s.filled_per_type[index_of(t)];
        answers.insert(slot->answer);
      }
    }
  }
  s.qualifying_images = images.size();
  s.answer_vocabulary = answers.size();
  return s;
}

}  // namespace mtvqa::corpus
