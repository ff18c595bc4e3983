#ifndef FANET_MASK_STORE_HPP
#define FANET_MASK_STORE_HPP

#include "fanet/image.hpp"
#include "fanet/mask.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <stdexcept>
#include <string>

namespace fanet {

class StaleEpochError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-sample feedback masks, kept RLE-compressed and stamped with the epoch
/// that produced them.
///
/// Reads may run concurrently. Writes to distinct ids may also run
/// concurrently; writes to the same id must be serialised by the caller.
class MaskStore {
 public:
  struct Entry {
    RleMask rle;
    int epoch = 0;
  };

  MaskStore();
  MaskStore(MaskStore&&) noexcept;
  MaskStore& operator=(MaskStore&&) noexcept;
  ~MaskStore();

  /// Throws StaleEpochError if `epoch` is older than the stored stamp.
  void put(const std::string& sample_id, const BinaryMask& mask, int epoch);

  std::optional<BinaryMask> find(const std::string& sample_id) const;
  std::optional<int> epoch_of(const std::string& sample_id) const;

  /// Stored mask, or the Otsu mask of `image` when the id has no entry yet.
  BinaryMask get(const std::string& sample_id, const Image& image) const;

  bool contains(const std::string& sample_id) const;
  std::size_t size() const;
  /// Bytes held by run lists, excluding ids and headers.
  std::size_t run_bytes() const;
  std::map<std::string, Entry> snapshot() const;

  /// Rewrites the whole store atomically (write to a sibling file, then rename).
  void save(const std::filesystem::path& path) const;
  static MaskStore load(const std::filesystem::path& path);

 private:
  std::unique_ptr<std::shared_mutex> mutex_;
  std::map<std::string, Entry> entries_;
};

}  // namespace fanet

#endif  // FANET_MASK_STORE_HPP
