#include "fanet/mask_store.hpp"

#include "binary_io.hpp"
#include "fanet/otsu.hpp"

#include <fstream>
#include <mutex>

namespace fanet {

namespace {
constexpr char kMagic[9] = "FANETRLE";
constexpr std::uint32_t kVersion = 1;
}  // namespace

MaskStore::MaskStore() : mutex_(std::make_unique<std::shared_mutex>()) {}
MaskStore::MaskStore(MaskStore&& other) noexcept
    : mutex_(std::make_unique<std::shared_mutex>()), entries_(std::move(other.entries_)) {}
MaskStore& MaskStore::operator=(MaskStore&& other) noexcept {
  entries_ = std::move(other.entries_);
  return *this;
}
MaskStore::~MaskStore() = default;

void MaskStore::put(const std::string& sample_id, const BinaryMask& mask, int epoch) {
  RleMask rle = rle_encode(mask);
  std::unique_lock lock(*mutex_);
  auto [it, inserted] = entries_.try_emplace(sample_id, Entry{});
  if (!inserted && epoch < it->second.epoch) {
    throw StaleEpochError("mask for '" + sample_id + "' is at epoch " + std::to_string(it->second.epoch) +
                          ", refusing write from epoch " + std::to_string(epoch));
  }
  it->second = Entry{std::move(rle), epoch};
}

std::optional<BinaryMask> MaskStore::find(const std::string& sample_id) const {
  std::shared_lock lock(*mutex_);
  auto it = entries_.find(sample_id);
  if (it == entries_.end()) return std::nullopt;
  return rle_decode(it->second.rle);
}

std::optional<int> MaskStore::epoch_of(const std::string& sample_id) const {
  std::shared_lock lock(*mutex_);
  auto it = entries_.find(sample_id);
  if (it == entries_.end()) return std::nullopt;
  return it->second.epoch;
}

BinaryMask MaskStore::get(const std::string& sample_id, const Image& image) const {
  if (auto mask = find(sample_id)) return *std::move(mask);
  return otsu_mask(image);
}

bool MaskStore::contains(const std::string& sample_id) const {
  std::shared_lock lock(*mutex_);
  return entries_.count(sample_id) != 0;
}

std::size_t MaskStore::size() const {
  std::shared_lock lock(*mutex_);
  return entries_.size();
}

std::size_t MaskStore::run_bytes() const {
  std::shared_lock lock(*mutex_);
  std::size_t bytes = 0;
  for (const auto& [id, entry] : entries_) bytes += entry.rle.runs.size() * sizeof(std::uint32_t);
  return bytes;
}

std::map<std::string, MaskStore::Entry> MaskStore::snapshot() const {
  std::shared_lock lock(*mutex_);
  return entries_;
}

void MaskStore::save(const std::filesystem::path& path) const {
  namespace bio = binary_io;
  const auto tmp = std::filesystem::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    std::shared_lock lock(*mutex_);
    out.write(kMagic, 8);
    bio::put<std::uint32_t>(out, kVersion);
    bio::put<std::uint64_t>(out, entries_.size());
    for (const auto& [id, entry] : entries_) {
      bio::put_string(out, id);
      bio::put<std::int32_t>(out, entry.epoch);
      bio::put<std::uint32_t>(out, static_cast<std::uint32_t>(entry.rle.height));
      bio::put<std::uint32_t>(out, static_cast<std::uint32_t>(entry.rle.width));
      bio::put<std::uint32_t>(out, static_cast<std::uint32_t>(entry.rle.runs.size()));
      out.write(reinterpret_cast<const char*>(entry.rle.runs.data()),
                static_cast<std::streamsize>(entry.rle.runs.size() * sizeof(std::uint32_t)));
    }
    if (!out) throw std::runtime_error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

MaskStore MaskStore::load(const std::filesystem::path& path) {
  namespace bio = binary_io;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mask store " + path.string());
  bio::expect_magic(in, kMagic);
  const auto version = bio::get<std::uint32_t>(in);
  if (version != kVersion) throw bio::FormatError("unsupported mask store version " + std::to_string(version));
  const auto count = bio::get<std::uint64_t>(in);
  MaskStore store;
  for (std::uint64_t i = 0; i < count; ++i) {
    std::string id = bio::get_string(in);
    Entry entry;
    entry.epoch = bio::get<std::int32_t>(in);
    entry.rle.height = bio::get<std::uint32_t>(in);
    entry.rle.width = bio::get<std::uint32_t>(in);
    const auto n_runs = bio::get<std::uint32_t>(in);
    if (n_runs > static_cast<std::uint64_t>(entry.rle.height * entry.rle.width) + 1) {
      throw bio::FormatError("run count out of range for '" + id + "'");
    }
    entry.rle.runs.resize(n_runs);
    if (!in.read(reinterpret_cast<char*>(entry.rle.runs.data()), n_runs * sizeof(std::uint32_t))) {
      throw bio::FormatError("truncated run list for '" + id + "'");
    }
    entry.rle.validate();
    if (!store.entries_.emplace(std::move(id), std::move(entry)).second) {
      throw bio::FormatError("duplicate sample id in mask store");
    }
  }
  return store;
}

}  // namespace fanet
