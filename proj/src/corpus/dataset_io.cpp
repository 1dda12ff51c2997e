#include "mtvqa/corpus/dataset_io.hpp"

#include <algorithm>
#include <fstream>

#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

namespace {

constexpr std::string_view kLabeledHeader = "mtvqa-labeled v1";
constexpr std::string_view kSingleHeader = "mtvqa-single v1";
constexpr std::string_view kMultiHeader = "mtvqa-multitask v1";

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("corpus", "cannot write " + path.string());
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("corpus", "cannot read " + path.string());
  return in;
}

const std::string& field(const std::string& s) {
  if (s.find_first_of("\t\n") != std::string::npos) throw FormatError("corpus", "field contains tab or newline: '" + s + "'");
  return s;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    auto tab = line.find('\t', pos);
    if (tab == std::string::npos) {
      out.push_back(line.substr(pos));
      return out;
    }
    out.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
}

std::vector<std::string> split_spaces(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos < s.size()) {
    auto sp = s.find(' ', pos);
    if (sp == std::string::npos) sp = s.size();
    if (sp > pos) out.push_back(s.substr(pos, sp - pos));
    pos = sp + 1;
  }
  return out;
}

void expect_header(std::ifstream& in, std::string_view header, const std::filesystem::path& path, std::string& line) {
  if (!std::getline(in, line) || line.rfind(header, 0) != 0) {
    throw FormatError("corpus", path.string() + ": expected header '" + std::string(header) + "'");
  }
}

QuestionType parse_type_field(const std::string& s, const std::filesystem::path& path, std::size_t line_no) {
  auto t = parse_question_type(s);
  if (!t) throw FormatError("corpus", path.string() + " line " + std::to_string(line_no) + ": unknown type '" + s + "'");
  return *t;
}

template <class Row>
void write_rows(const std::filesystem::path& path, std::string_view header, const std::vector<Row>& rows) {
  auto out = open_out(path);
  out << header << "\n";
  for (const auto& r : rows) {
    out << field(r.image_id) << '\t' << to_string(r.qtype) << '\t' << field(join_tokens(r.tokens)) << '\t'
        << field(r.answer) << '\n';
  }
  if (!out) throw IoError("corpus", "write failed for " + path.string());
}

template <class Row>
std::vector<Row> read_rows(const std::filesystem::path& path, std::string_view header) {
  auto in = open_in(path);
  std::string line;
  expect_header(in, header, path, line);
  std::vector<Row> out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    if (f.size() != 4) {
      throw FormatError("corpus", path.string() + " line " + std::to_string(line_no) + ": expected 4 fields, got " +
                                      std::to_string(f.size()));
    }
    Row r;
    r.image_id = f[0];
    r.qtype = parse_type_field(f[1], path, line_no);
    r.tokens = split_spaces(f[2]);
    r.answer = f[3];
    if (r.image_id.empty() || r.tokens.empty() || r.answer.empty()) {
      throw FormatError("corpus", path.string() + " line " + std::to_string(line_no) + ": empty field");
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace

void write_labeled(const std::filesystem::path& path, const std::vector<LabeledQuestion>& qs) {
  write_rows(path, kLabeledHeader, qs);
}

std::vector<LabeledQuestion> read_labeled(const std::filesystem::path& path) {
  return read_rows<LabeledQuestion>(path, kLabeledHeader);
}

void write_single(const std::filesystem::path& path, const std::vector<SingleTaskExample>& xs) {
  write_rows(path, kSingleHeader, xs);
}

std::vector<SingleTaskExample> read_single(const std::filesystem::path& path) {
  return read_rows<SingleTaskExample>(path, kSingleHeader);
}

void write_multitask(const std::filesystem::path& path, const std::vector<MultiTaskExample>& xs, const TaskSet& tasks) {
  validate_task_set(tasks, 1);
  auto out = open_out(path);
  out << kMultiHeader << ' ' << task_set_string(tasks) << '\n';
  for (const auto& ex : xs) {
    std::string mask;
    for (auto t : tasks) mask += ex.mask(t) ? '1' : '0';
    if (std::count(mask.begin(), mask.end(), '1') != static_cast<long>(ex.filled_count())) {
      throw FormatError("corpus", "example for '" + ex.image_id + "' fills a slot outside the task set");
    }
    out << field(ex.image_id) << '\t' << mask;
    for (auto t : tasks) {
      const auto& s = ex.slot(t);
      out << '\t' << (s ? field(join_tokens(s->tokens)) : "") << '\t' << (s ? field(s->answer) : "");
    }
    out << '\n';
  }
  if (!out) throw IoError("corpus", "write failed for " + path.string());
}

MultiTaskFile read_multitask(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  expect_header(in, kMultiHeader, path, line);
  MultiTaskFile file;
  file.tasks = parse_task_set(line.size() > kMultiHeader.size() ? line.substr(kMultiHeader.size() + 1) : "");
  validate_task_set(file.tasks, 1);
  std::size_t line_no = 1;
  const std::size_t n = file.tasks.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = split_tabs(line);
    const auto where = path.string() + " line " + std::to_string(line_no);
    if (f.size() != 2 + 2 * n) {
      throw FormatError("corpus", where + ": expected " + std::to_string(2 + 2 * n) + " fields, got " +
                                      std::to_string(f.size()));
    }
    if (f[1].size() != n) throw FormatError("corpus", where + ": mask length does not match task set");
    MultiTaskExample ex;
    ex.image_id = f[0];
    for (std::size_t k = 0; k < n; ++k) {
      const bool flagged = f[1][k] == '1';
      if (!flagged && f[1][k] != '0') throw FormatError("corpus", where + ": mask must be 0/1");
      const bool present = !f[2 + 2 * k].empty();
      if (flagged != present || present == f[3 + 2 * k].empty()) {
        throw FormatError("corpus", where + ": mask disagrees with slot contents for " +
                                        std::string(to_string(file.tasks[k])));
      }
      if (present) ex.slot(file.tasks[k]) = QaSlot{split_spaces(f[2 + 2 * k]), f[3 + 2 * k]};
    }
    file.examples.push_back(std::move(ex));
  }
  return file;
}

void write_rejections(const std::filesystem::path& path, const std::vector<RawQuestion>& rejected,
                      const std::string& reason) {
  auto out = open_out(path);
  for (const auto& q : rejected) {
    out << reason << '\t' << field(q.image_id) << '\t' << field(join_tokens(q.tokens)) << '\t' << field(q.answer)
        << '\n';
  }
  if (!out) throw IoError("corpus", "write failed for " + path.string());
}

DatasetKind detect_dataset_kind(const std::filesystem::path& path) {
  auto in = open_in(path);
  std::string line;
  std::getline(in, line);
  if (line.rfind(kLabeledHeader, 0) == 0) return DatasetKind::Labeled;
  if (line.rfind(kSingleHeader, 0) == 0) return DatasetKind::Single;
  if (line.rfind(kMultiHeader, 0) == 0) return DatasetKind::MultiTask;
  return DatasetKind::Unknown;
}

}  // namespace mtvqa::corpus
