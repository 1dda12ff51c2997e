#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace mtvqa::corpus {

/// Image id -> flattened feature vector of uniform length. Values are held
/// in single precision; a 512x14x14 conv map is 100,352 floats per image.
class FeatureStore {
 public:
  FeatureStore() = default;
  explicit FeatureStore(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool contains(const std::string& id) const { return entries_.count(id) != 0; }

  /// Throws FormatError on a length mismatch.
  void insert(const std::string& id, std::vector<float> values);
  /// Throws FormatError naming the id when absent.
  std::span<const float> at(const std::string& id) const;

  const std::map<std::string, std::vector<float>>& entries() const noexcept { return entries_; }

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<float>> entries_;
};

/// Text: header `mtvqa-feat v1 <dim>`, then `<image_id> <f1> ... <fdim>`.
/// Binary: "MTVQAFB1", u64 dim, u64 count, then per record u32 id length,
/// id bytes, dim float32 values (host byte order). load_features detects
/// which one it is reading.
FeatureStore load_features(const std::filesystem::path& path);
void save_features_text(const std::filesystem::path& path, const FeatureStore& store);
void save_features_binary(const std::filesystem::path& path, const FeatureStore& store);

}  // namespace mtvqa::corpus
