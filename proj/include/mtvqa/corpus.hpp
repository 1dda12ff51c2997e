#pragma once

#include "mtvqa/corpus/dataset_io.hpp"
#include "mtvqa/corpus/features.hpp"
#include "mtvqa/corpus/keywords.hpp"
#include "mtvqa/corpus/parsers.hpp"
#include "mtvqa/corpus/reformat.hpp"
#include "mtvqa/corpus/synthetic.hpp"
#include "mtvqa/corpus/types.hpp"
