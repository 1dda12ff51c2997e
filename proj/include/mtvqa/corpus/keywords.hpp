#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mtvqa/corpus/types.hpp"

namespace mtvqa::corpus {

/// A keyword is a run of one or more tokens ("how many" is two).
using Keyword = std::vector<std::string>;

struct KeywordRule {
  QuestionType type;
  std::vector<Keyword> keywords;
};

/// Ordered keyword lists; earlier rules win. File format, one rule per line:
///
///   <type>: w1, w2, multi word, ...
///   ignore: in the image#, ...
///
/// `ignore` phrases are blanked out before matching; the token `image#`
/// matches any `image<digits>` token. Blank lines and lines starting with
/// '#' are skipped.
class KeywordConfig {
 public:
  KeywordConfig() = default;
  KeywordConfig(std::vector<KeywordRule> rules, std::vector<Keyword> ignore = {});

  static KeywordConfig parse(std::string_view text);
  static KeywordConfig load(const std::filesystem::path& path);
  /// Built-in lists, priority size, count, position, colour.
  static const KeywordConfig& daquar_default();
  static std::string_view daquar_default_text();

  const std::vector<KeywordRule>& rules() const noexcept { return rules_; }
  const std::vector<Keyword>& ignore_phrases() const noexcept { return ignore_; }
  TaskSet priority() const;

 private:
  void validate() const;

  std::vector<KeywordRule> rules_;
  std::vector<Keyword> ignore_;
};

/// First type in priority order whose keywords occur in `tokens`, or
/// nullopt when nothing matches (the question is unclassifiable).
std::optional<QuestionType> classify_question(const std::vector<std::string>& tokens, const KeywordConfig& cfg);

struct LabelResult {
  std::vector<LabeledQuestion> labeled;
  std::vector<RawQuestion> rejected;
};

LabelResult label_corpus(const std::vector<RawQuestion>& raw, const KeywordConfig& cfg);

/// min(n, |labeled|) questions drawn without replacement, in corpus order,
/// for manual verification of the classifier.
std::vector<LabeledQuestion> audit_sample(const std::vector<LabeledQuestion>& labeled, std::size_t n,
                                          std::uint64_t seed);

}  // namespace mtvqa::corpus
