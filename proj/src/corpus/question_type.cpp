#include <algorithm>
#include <set>

#include "mtvqa/corpus/types.hpp"
#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

std::string_view to_string(QuestionType t) {
  switch (t) {
    case QuestionType::Object: return "object";
    case QuestionType::Colour: return "colour";
    case QuestionType::Count: return "count";
    case QuestionType::Position: return "position";
    case QuestionType::Size: return "size";
  }
  return "?";
}

std::string_view display_name(QuestionType t) {
  switch (t) {
    case QuestionType::Object: return "Object";
    case QuestionType::Colour: return "Colour";
    case QuestionType::Count: return "Count";
    case QuestionType::Position: return "Position";
    case QuestionType::Size: return "Size";
  }
  return "?";
}

std::optional<QuestionType> parse_question_type(std::string_view s) {
  for (auto t : kAllQuestionTypes) {
    if (s == to_string(t)) return t;
  }
  if (s == "color") return QuestionType::Colour;
  return std::nullopt;
}

void validate_task_set(const TaskSet& tasks, std::size_t min_size) {
  if (tasks.size() < min_size) {
    throw ConfigError("corpus", "task set needs at least " + std::to_string(min_size) + " types, got " +
                                    std::to_string(tasks.size()));
  }
  std::set<QuestionType> seen(tasks.begin(), tasks.end());
  if (seen.size() != tasks.size()) throw ConfigError("corpus", "task set has duplicate types");
}

TaskSet parse_task_set(std::string_view text) {
  TaskSet out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = text.substr(pos, comma - pos);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) {
      auto t = parse_question_type(item);
      if (!t) throw ConfigError("corpus", "unknown question type '" + std::string(item) + "'");
      out.push_back(*t);
    }
    pos = comma + 1;
  }
  return out;
}

std::string task_set_string(const TaskSet& tasks) {
  std::string out;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    if (i) out += ",";
    out += to_string(tasks[i]);
  }
  return out;
}

TaskSet daquar_task_set() {
  return {QuestionType::Colour, QuestionType::Count, QuestionType::Position, QuestionType::Size};
}

TaskSet cocoqa_task_set() {
  return {QuestionType::Object, QuestionType::Count, QuestionType::Colour, QuestionType::Position};
}

std::size_t MultiTaskExample::filled_count() const {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const auto& s) { return s.has_value(); }));
}

}  // namespace mtvqa::corpus
