#include "mtvqa/autodiff/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "mtvqa/error.hpp"

namespace mtvqa::ad {

namespace {

constexpr char kBinaryMagic[8] = {'M', 'T', 'V', 'Q', 'A', 'C', 'K', 'B'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in, const std::string& where) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw FormatError("autodiff", "checkpoint truncated in " + where);
  return v;
}

std::string read_bytes(std::istream& in, std::uint64_t n, const std::string& where) {
  if (n > (1ull << 32)) throw FormatError("autodiff", "checkpoint: implausible length in " + where);
  std::string s(n, '\0');
  if (n && !in.read(s.data(), static_cast<std::streamsize>(n)))
    throw FormatError("autodiff", "checkpoint truncated in " + where);
  return s;
}

void save_text(std::ofstream& out, const Checkpoint& ckpt) {
  out << "mtvqa-ckpt v1 text\n";
  out << "meta " << ckpt.meta << "\n";
  out << "params " << ckpt.params.size() << "\n";
  char buf[32];
  for (const auto& p : ckpt.params) {
    out << "param " << p.name << " " << p.value.rank();
    for (auto d : p.value.shape()) out << " " << d;
    out << "\n";
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.17g", p.value[i]);
      if (i) out << ' ';
      out << buf;
    }
    out << "\n";
  }
}

void save_binary(std::ofstream& out, const Checkpoint& ckpt) {
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  put<std::uint32_t>(out, kVersion);
  put<std::uint64_t>(out, ckpt.meta.size());
  out.write(ckpt.meta.data(), static_cast<std::streamsize>(ckpt.meta.size()));
  put<std::uint64_t>(out, ckpt.params.size());
  for (const auto& p : ckpt.params) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.name.size()));
    out.write(p.name.data(), static_cast<std::streamsize>(p.name.size()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.value.rank()));
    for (auto d : p.value.shape()) put<std::uint64_t>(out, d);
    out.write(reinterpret_cast<const char*>(p.value.values().data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
}

Checkpoint load_text(std::ifstream& in) {
  Checkpoint ckpt;
  std::string line;
  std::getline(in, line);
  if (line != "mtvqa-ckpt v1 text") throw FormatError("autodiff", "checkpoint: bad header '" + line + "'");
  std::getline(in, line);
  if (line.rfind("meta ", 0) != 0 && line != "meta") throw FormatError("autodiff", "checkpoint: missing meta line");
  ckpt.meta = line.size() > 5 ? line.substr(5) : "";
  std::getline(in, line);
  std::size_t count = 0;
  if (std::sscanf(line.c_str(), "params %zu", &count) != 1) throw FormatError("autodiff", "checkpoint: missing params line");
  for (std::size_t k = 0; k < count; ++k) {
    if (!std::getline(in, line)) throw FormatError("autodiff", "checkpoint truncated at parameter " + std::to_string(k));
    std::istringstream hs(line);
    std::string tag, name;
    std::size_t rank = 0;
    hs >> tag >> name >> rank;
    if (tag != "param" || !hs) throw FormatError("autodiff", "checkpoint: bad parameter header '" + line + "'");
    Shape shape(rank);
    for (auto& d : shape) hs >> d;
    if (!hs) throw FormatError("autodiff", "checkpoint: bad shape for '" + name + "'");
    if (!std::getline(in, line)) throw FormatError("autodiff", "checkpoint: missing values for '" + name + "'");
    std::vector<double> values;
    values.reserve(shape_size(shape));
    const char* s = line.c_str();
    char* end = nullptr;
    for (;;) {
      double v = std::strtod(s, &end);
      if (end == s) break;
      values.push_back(v);
      s = end;
    }
    if (values.size() != shape_size(shape)) {
      throw FormatError("autodiff", "checkpoint: '" + name + "' has " + std::to_string(values.size()) +
                                        " values for shape " + shape_string(shape));
    }
    ckpt.params.emplace_back(name, Tensor(shape, std::move(values)));
  }
  return ckpt;
}

Checkpoint load_binary(std::ifstream& in) {
  Checkpoint ckpt;
  char magic[8];
  in.read(magic, 8);
  if (get<std::uint32_t>(in, "version") != kVersion) throw FormatError("autodiff", "checkpoint: unsupported version");
  ckpt.meta = read_bytes(in, get<std::uint64_t>(in, "meta length"), "meta");
  const auto count = get<std::uint64_t>(in, "parameter count");
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = read_bytes(in, get<std::uint32_t>(in, "name length"), "name");
    const auto rank = get<std::uint32_t>(in, "rank of " + name);
    Shape shape(rank);
    for (auto& d : shape) d = get<std::uint64_t>(in, "shape of " + name);
    std::vector<double> values(shape_size(shape));
    if (!in.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
      throw FormatError("autodiff", "checkpoint truncated in values of " + name);
    ckpt.params.emplace_back(std::move(name), Tensor(shape, std::move(values)));
  }
  return ckpt;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, CheckpointFormat format) {
  if (ckpt.meta.find('\n') != std::string::npos) throw FormatError("autodiff", "checkpoint meta must be one line");
  for (const auto& p : ckpt.params) {
    if (p.name.empty() || p.name.find_first_of(" \t\n") != std::string::npos)
      throw FormatError("autodiff", "checkpoint: invalid parameter name '" + p.name + "'");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("autodiff", "cannot write checkpoint " + path.string());
  if (format == CheckpointFormat::Text) {
    save_text(out, ckpt);
  } else {
    save_binary(out, ckpt);
  }
  if (!out) throw IoError("autodiff", "write failed for checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("autodiff", "cannot read checkpoint " + path.string());
  char magic[8] = {};
  in.read(magic, 8);
  in.clear();
  in.seekg(0);
  if (std::memcmp(magic, kBinaryMagic, 8) == 0) return load_binary(in);
  return load_text(in);
}

}  // namespace mtvqa::ad
