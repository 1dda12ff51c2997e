#pragma once

#include <filesystem>
#include <vector>

#include "mtvqa/corpus/types.hpp"

namespace mtvqa::corpus {

// Line-oriented TSV files. The first line names the schema and version;
// tokens are space-joined inside their field.
//
//   mtvqa-labeled v1         image_id  qtype  question  answer
//   mtvqa-single v1          image_id  qtype  question  answer
//   mtvqa-multitask v1 <tasks>
//                            image_id  mask  (question  answer) per task
//   rejection log            reason  image_id  question  answer

void write_labeled(const std::filesystem::path& path, const std::vector<LabeledQuestion>& qs);
std::vector<LabeledQuestion> read_labeled(const std::filesystem::path& path);

void write_single(const std::filesystem::path& path, const std::vector<SingleTaskExample>& xs);
std::vector<SingleTaskExample> read_single(const std::filesystem::path& path);

void write_multitask(const std::filesystem::path& path, const std::vector<MultiTaskExample>& xs,
                     const TaskSet& tasks);
struct MultiTaskFile {
  TaskSet tasks;
  std::vector<MultiTaskExample> examples;
};
MultiTaskFile read_multitask(const std::filesystem::path& path);

void write_rejections(const std::filesystem::path& path, const std::vector<RawQuestion>& rejected,
                      const std::string& reason = "unclassified");

/// Reads the first line of a dataset file to tell the schemas apart.
enum class DatasetKind { Labeled, Single, MultiTask, Unknown };
DatasetKind detect_dataset_kind(const std::filesystem::path& path);

}  // namespace mtvqa::corpus
