#include "mtvqa/corpus/features.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtvqa/error.hpp"

namespace mtvqa::corpus {

namespace {
constexpr char kBinaryMagic[8] = {'M', 'T', 'V', 'Q', 'A', 'F', 'B', '1'};

template <class T>
T get(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("corpus", "feature file truncated in " + where);
  return v;
}

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
}  // namespace

void FeatureStore::insert(const std::string& id, std::vector<float> values) {
  if (dim_ == 0) throw FormatError("corpus", "feature store has no dimension");
  if (values.size() != dim_) {
    throw FormatError("corpus", "feature record '" + id + "' has " + std::to_string(values.size()) +
                                    " values, expected " + std::to_string(dim_));
  }
  if (!entries_.emplace(id, std::move(values)).second) {
    throw FormatError("corpus", "duplicate feature record '" + id + "'");
  }
}

std::span<const float> FeatureStore::at(const std::string& id) const {
  auto it = entries_.find(id);
  if (it == entries_.end()) throw FormatError("corpus", "no features for image '" + id + "'");
  return it->second;
}

namespace {

FeatureStore load_text(std::ifstream& in, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("corpus", "feature file " + name + " is empty (dimension undefined)");
  std::size_t dim = 0;
  char tail = 0;
  if (std::sscanf(line.c_str(), "mtvqa-feat v1 %zu %c", &dim, &tail) != 1 || dim == 0) {
    throw FormatError("corpus", "feature file " + name + ": bad header '" + line + "'");
  }
  FeatureStore store(dim);
  std::size_t line_no = 1;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    const char* s = line.c_str();
    while (*s == ' ' || *s == '\t') ++s;
    if (*s == '\0' || *s == '\r') continue;
    const char* id_end = s;
    while (*id_end && *id_end != ' ' && *id_end != '\t') ++id_end;
    std::string id(s, id_end);
    values.clear();
    values.reserve(dim);
    const char* p = id_end;
    char* end = nullptr;
    for (;;) {
      float v = std::strtof(p, &end);
      if (end == p) break;
      values.push_back(v);
      p = end;
    }
    while (*p == ' ' || *p == '\t' || *p == '\r') ++p;
    if (*p != '\0') {
      throw FormatError("corpus", "feature record '" + id + "' (line " + std::to_string(line_no) +
                                      ") has a non-numeric value");
    }
    store.insert(id, values);
  }
  return store;
}

FeatureStore load_binary(std::ifstream& in) {
  char magic[8];
  in.read(magic, 8);
  const auto dim = get<std::uint64_t>(in, "header");
  const auto count = get<std::uint64_t>(in, "header");
  if (dim == 0) throw FormatError("corpus", "binary feature file has zero dimension");
  FeatureStore store(dim);
  for (std::uint64_t k = 0; k < count; ++k) {
    const auto len = get<std::uint32_t>(in, "record " + std::to_string(k));
    std::string id(len, '\0');
    if (!in.read(id.data(), len)) throw FormatError("corpus", "binary feature file truncated in record id");
    std::vector<float> values(dim);
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(dim * sizeof(float))))
      throw FormatError("corpus", "binary feature file truncated in record '" + id + "'");
    store.insert(id, std::move(values));
  }
  return store;
}

}  // namespace

FeatureStore load_features(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("corpus", "cannot read feature file " + path.string());
  char magic[8] = {};
  in.read(magic, 8);
  const bool binary = in.gcount() == 8 && std::memcmp(magic, kBinaryMagic, 8) == 0;
  in.clear();
  in.seekg(0);
  return binary ? load_binary(in) : load_text(in, path.string());
}

void save_features_text(const std::filesystem::path& path, const FeatureStore& store) {
  std::ofstream out(path);
  if (!out) throw IoError("corpus", "cannot write feature file " + path.string());
  out << "mtvqa-feat v1 " << store.dim() << "\n";
  char buf[32];
  for (const auto& [id, values] : store.entries()) {
    out << id;
    for (float v : values) {
      // %.9g round-trips float32 exactly.
      std::snprintf(buf, sizeof buf, " %.9g", static_cast<double>(v));
      out << buf;
    }
    out << "\n";
  }
  if (!out) throw IoError("corpus", "write failed for " + path.string());
}

void save_features_binary(const std::filesystem::path& path, const FeatureStore& store) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("corpus", "cannot write feature file " + path.string());
  out.write(kBinaryMagic, 8);
  put<std::uint64_t>(out, store.dim());
  put<std::uint64_t>(out, store.size());
  for (const auto& [id, values] : store.entries()) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(id.size()));
    out.write(id.data(), static_cast<std::streamsize>(id.size()));
    out.write(reinterpret_cast<const char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(float)));
  }
  if (!out) throw IoError("corpus", "write failed for " + path.string());
}

}  // namespace mtvqa::corpus
