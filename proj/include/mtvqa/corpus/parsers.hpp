#pragma once

#include <filesystem>
#include <vector>

#include "mtvqa/corpus/types.hpp"

namespace mtvqa::corpus {

/// DAQUAR text: non-blank lines alternate question / answer. Each question
/// holds exactly one `image<digits>` token, which becomes the image id.
/// Multi-answer lines ("knife, fork") are kept as one comma-joined label.
std::vector<RawQuestion> parse_daquar(const std::filesystem::path& path);
std::vector<RawQuestion> parse_daquar_lines(const std::vector<std::string>& lines);

/// COCO-QA directory with parallel questions.txt, answers.txt, img_ids.txt
/// and types.txt. Type codes: 0 object, 1 count, 2 colour, 3 position.
std::vector<LabeledQuestion> parse_cocoqa(const std::filesystem::path& dir);

}  // namespace mtvqa::corpus
