#include "mtvqa/corpus/keywords.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

namespace {

// Same content as data/keywords_daquar.txt.
constexpr std::string_view kDaquarDefault = R"KW(# Question-type keywords for DAQUAR. Line order is classification priority.
# `ignore` phrases are blanked before matching; image# matches image<digits>.
ignore: in the image#, in this image#, of the image#, on the image#, in image#, image#
size: largest, smallest, large, big, biggest, bigger, larger, small, smaller, size, sized, huge, tiny, tall, taller, tallest, short, shorter, shortest, long, longer, longest, wide, wider, widest, narrow, little, thin, thick
count: how many, count, counted, many, number, numbers, frequent, frequently, total, amount, quantity
position: on, in, between, left, right, behind, above, below, under, underneath, beneath, front, near, next, beside, top, bottom, inside, over, across, around, where, corner, middle, center, centre, along, against, opposite, close, adjacent, leftmost, rightmost
colour: color, colour, colors, colours, colored, coloured, red, orange, yellow, green, blue, purple, pink, brown, black, white, grey, gray, beige, golden, silver
)KW";

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<Keyword> parse_list(std::string_view list) {
  std::vector<Keyword> out;
  std::size_t pos = 0;
  while (pos <= list.size()) {
    auto comma = list.find(',', pos);
    if (comma == std::string_view::npos) comma = list.size();
    // Whitespace split only: keyword patterns may carry '#'.
    Keyword item;
    std::istringstream words{std::string(list.substr(pos, comma - pos))};
    for (std::string w; words >> w;) {
      for (auto& c : w) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      item.push_back(std::move(w));
    }
    if (!item.empty()) out.push_back(std::move(item));
    pos = comma + 1;
  }
  return out;
}

bool token_matches(const std::string& pattern, const std::string& tok) {
  if (pattern == "image#") {
    if (tok.size() <= 5 || tok.compare(0, 5, "image") != 0) return false;
    return std::all_of(tok.begin() + 5, tok.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); });
  }
  return pattern == tok;
}

bool run_matches(const std::vector<std::string>& tokens, const std::vector<bool>& blanked, std::size_t at,
                 const Keyword& kw) {
  if (at + kw.size() > tokens.size()) return false;
  for (std::size_t k = 0; k < kw.size(); ++k) {
    if (blanked[at + k] || !token_matches(kw[k], tokens[at + k])) return false;
  }
  return true;
}

}  // namespace

KeywordConfig::KeywordConfig(std::vector<KeywordRule> rules, std::vector<Keyword> ignore)
    : rules_(std::move(rules)), ignore_(std::move(ignore)) {
  validate();
}

void KeywordConfig::validate() const {
  std::map<Keyword, QuestionType> owner;
  std::vector<QuestionType> seen;
  for (const auto& rule : rules_) {
    if (std::find(seen.begin(), seen.end(), rule.type) != seen.end()) {
      throw ConfigError("corpus", "keyword config lists type '" + std::string(to_string(rule.type)) + "' twice");
    }
    seen.push_back(rule.type);
    for (const auto& kw : rule.keywords) {
      if (kw.empty()) throw ConfigError("corpus", "empty keyword");
      auto [it, inserted] = owner.emplace(kw, rule.type);
      if (!inserted && it->second != rule.type) {
        throw ConfigError("corpus", "keyword '" + join_tokens(kw) + "' belongs to both " +
                                        std::string(to_string(it->second)) + " and " +
                                        std::string(to_string(rule.type)));
      }
    }
  }
}

KeywordConfig KeywordConfig::parse(std::string_view text) {
  std::vector<KeywordRule> rules;
  std::vector<Keyword> ignore;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;
    auto colon = line.find(':');
    if (colon == std::string_view::npos) {
      throw FormatError("corpus", "keyword config line " + std::to_string(line_no) + ": expected '<type>: words'");
    }
    auto head = trim(line.substr(0, colon));
    auto list = parse_list(line.substr(colon + 1));
    if (head == "ignore") {
      ignore.insert(ignore.end(), list.begin(), list.end());
      continue;
    }
    auto type = parse_question_type(head);
    if (!type) {
      throw FormatError("corpus", "keyword config line " + std::to_string(line_no) + ": unknown type '" +
                                      std::string(head) + "'");
    }
    rules.push_back({*type, std::move(list)});
  }
  return KeywordConfig(std::move(rules), std::move(ignore));
}

KeywordConfig KeywordConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus", "cannot read keyword config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

const KeywordConfig& KeywordConfig::daquar_default() {
  static const KeywordConfig cfg = parse(kDaquarDefault);
  return cfg;
}

std::string_view KeywordConfig::daquar_default_text() { return kDaquarDefault; }

TaskSet KeywordConfig::priority() const {
  TaskSet out;
  for (const auto& r : rules_) out.push_back(r.type);
  return out;
}

std::optional<QuestionType> classify_question(const std::vector<std::string>& tokens, const KeywordConfig& cfg) {
  std::vector<bool> blanked(tokens.size(), false);
  for (const auto& phrase : cfg.ignore_phrases()) {
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (run_matches(tokens, blanked, i, phrase)) {
        for (std::size_t k = 0; k < phrase.size(); ++k) blanked[i + k] = true;
      }
    }
  }
  for (const auto& rule : cfg.rules()) {
    for (const auto& kw : rule.keywords) {
      for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (run_matches(tokens, blanked, i, kw)) return rule.type;
      }
    }
  }
  return std::nullopt;
}

LabelResult label_corpus(const std::vector<RawQuestion>& raw, const KeywordConfig& cfg) {
  LabelResult out;
  for (const auto& q : raw) {
    if (auto t = classify_question(q.tokens, cfg)) {
      out.labeled.push_back({q.image_id, q.tokens, q.answer, *t});
    } else {
      out.rejected.push_back(q);
    }
  }
  return out;
}

std::vector<LabeledQuestion> audit_sample(const std::vector<LabeledQuestion>& labeled, std::size_t n,
                                          std::uint64_t seed) {
  std::vector<std::size_t> idx(labeled.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::mt19937_64 rng(seed);
  std::shuffle(idx.begin(), idx.end(), rng);
  idx.resize(std::min(n, idx.size()));
  std::sort(idx.begin(), idx.end());
  std::vector<LabeledQuestion> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(labeled[i]);
  return out;
}

}  // namespace mtvqa::corpus
