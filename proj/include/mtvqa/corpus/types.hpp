#pragma once

#include <array>
#include <compare>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace mtvqa::corpus {

enum class QuestionType : std::uint8_t { Object, Colour, Count, Position, Size };

inline constexpr std::size_t kNumQuestionTypes = 5;
inline constexpr std::array<QuestionType, kNumQuestionTypes> kAllQuestionTypes = {
    QuestionType::Object, QuestionType::Colour, QuestionType::Count, QuestionType::Position, QuestionType::Size};

constexpr std::size_t index_of(QuestionType t) { return static_cast<std::size_t>(t); }

/// Lowercase name: "object", "colour", "count", "position", "size".
std::string_view to_string(QuestionType t);
/// Display name used in report tables ("Colour", ...).
std::string_view display_name(QuestionType t);
/// Accepts the lowercase names plus "color".
std::optional<QuestionType> parse_question_type(std::string_view s);

/// Ordered set of active task types; order fixes slot/head order.
using TaskSet = std::vector<QuestionType>;

/// Throws ConfigError if `tasks` has duplicates or fewer than `min_size` members.
void validate_task_set(const TaskSet& tasks, std::size_t min_size = 2);
TaskSet parse_task_set(std::string_view comma_separated);
std::string task_set_string(const TaskSet& tasks);

/// Colour, Count, Position, Size: the keyword classifier's types.
TaskSet daquar_task_set();
/// Object, Count, Colour, Position: COCO-QA's native labels.
TaskSet cocoqa_task_set();

struct RawQuestion {
  std::string image_id;
  std::vector<std::string> tokens;
  std::string answer;

  friend auto operator<=>(const RawQuestion&, const RawQuestion&) = default;
};

struct LabeledQuestion {
  std::string image_id;
  std::vector<std::string> tokens;
  std::string answer;
  QuestionType qtype = QuestionType::Object;

  friend auto operator<=>(const LabeledQuestion&, const LabeledQuestion&) = default;
};

struct SingleTaskExample {
  std::string image_id;
  QuestionType qtype = QuestionType::Object;
  std::vector<std::string> tokens;
  std::string answer;

  friend auto operator<=>(const SingleTaskExample&, const SingleTaskExample&) = default;
};

/// One question/answer pair placed in a multi-task slot.
struct QaSlot {
  std::vector<std::string> tokens;
  std::string answer;

  friend auto operator<=>(const QaSlot&, const QaSlot&) = default;
};

/// One image with at most one question per type. An empty slot is the
/// zero-vector placeholder; mask(t) is derived from slot presence so the two
/// can never disagree.
struct MultiTaskExample {
  std::string image_id;
  std::array<std::optional<QaSlot>, kNumQuestionTypes> slots;

  bool mask(QuestionType t) const { return slots[index_of(t)].has_value(); }
  std::size_t filled_count() const;
  const std::optional<QaSlot>& slot(QuestionType t) const { return slots[index_of(t)]; }
  std::optional<QaSlot>& slot(QuestionType t) { return slots[index_of(t)]; }

  friend bool operator==(const MultiTaskExample&, const MultiTaskExample&) = default;
};

/// Tokenizer shared by every parser: lowercase, split on whitespace, strip
/// leading/trailing punctuation from each token, drop tokens left empty.
std::vector<std::string> tokenize(std::string_view text);
std::string join_tokens(const std::vector<std::string>& tokens);

}  // namespace mtvqa::corpus
