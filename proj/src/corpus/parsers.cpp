#include "mtvqa/corpus/parsers.hpp"

#include <fstream>

#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

namespace {

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus", "cannot read " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool is_image_token(const std::string& tok) {
  if (tok.size() <= 5 || tok.compare(0, 5, "image") != 0) return false;
  for (std::size_t i = 5; i < tok.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(tok[i]))) return false;
  }
  return true;
}

std::string normalize_answer(std::string_view line) {
  std::string out;
  std::size_t pos = 0;
  while (pos <= line.size()) {
    auto comma = line.find(',', pos);
    if (comma == std::string_view::npos) comma = line.size();
    auto part = trim(line.substr(pos, comma - pos));
    if (!part.empty()) {
      if (!out.empty()) out += ',';
      out += part;
    }
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<RawQuestion> parse_daquar_lines(const std::vector<std::string>& lines) {
  std::vector<std::pair<std::size_t, std::string_view>> content;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    auto t = trim(lines[i]);
    if (!t.empty()) content.emplace_back(i + 1, t);
  }
  if (content.size() % 2 != 0) {
    throw FormatError("corpus", "daquar: question on line " + std::to_string(content.back().first) +
                                    " has no answer line (odd number of non-blank lines)");
  }
  std::vector<RawQuestion> out;
  out.reserve(content.size() / 2);
  for (std::size_t k = 0; k < content.size(); k += 2) {
    const auto [qline, qtext] = content[k];
    RawQuestion q;
    q.tokens = tokenize(qtext);
    std::size_t image_tokens = 0;
    for (const auto& tok : q.tokens) {
      if (is_image_token(tok)) {
        ++image_tokens;
        q.image_id = tok;
      }
    }
    if (image_tokens != 1) {
      throw FormatError("corpus", "daquar: line " + std::to_string(qline) + " has " + std::to_string(image_tokens) +
                                      " image<digits> tokens, expected exactly one");
    }
    q.answer = normalize_answer(content[k + 1].second);
    if (q.answer.empty()) {
      throw FormatError("corpus", "daquar: empty answer on line " + std::to_string(content[k + 1].first));
    }
    out.push_back(std::move(q));
  }
  return out;
}

std::vector<RawQuestion> parse_daquar(const std::filesystem::path& path) { return parse_daquar_lines(read_lines(path)); }

std::vector<LabeledQuestion> parse_cocoqa(const std::filesystem::path& dir) {
  const char* names[4] = {"questions.txt", "answers.txt", "img_ids.txt", "types.txt"};
  std::vector<std::string> files[4];
  for (int i = 0; i < 4; ++i) files[i] = read_lines(dir / names[i]);
  for (int i = 1; i < 4; ++i) {
    if (files[i].size() != files[0].size()) {
      throw FormatError("corpus", std::string("cocoqa: line counts differ: ") + names[0] + " has " +
                                      std::to_string(files[0].size()) + ", " + names[i] + " has " +
                                      std::to_string(files[i].size()));
    }
  }
  static constexpr QuestionType kCodes[4] = {QuestionType::Object, QuestionType::Count, QuestionType::Colour,
                                             QuestionType::Position};
  std::vector<LabeledQuestion> out;
  out.reserve(files[0].size());
  for (std::size_t i = 0; i < files[0].size(); ++i) {
    const auto line_no = std::to_string(i + 1);
    auto code = trim(files[3][i]);
    if (code.size() != 1 || code[0] < '0' || code[0] > '3') {
      throw FormatError("corpus", "cocoqa: unknown type code '" + std::string(code) + "' on line " + line_no +
                                      " of types.txt");
    }
    LabeledQuestion q;
    q.qtype = kCodes[code[0] - '0'];
    q.tokens = tokenize(files[0][i]);
    q.answer = std::string(trim(files[1][i]));
    q.image_id = std::string(trim(files[2][i]));
    if (q.tokens.empty() || q.answer.empty() || q.image_id.empty()) {
      throw FormatError("corpus", "cocoqa: empty field on line " + line_no);
    }
    out.push_back(std::move(q));
  }
  return out;
}

}  // namespace mtvqa::corpus
