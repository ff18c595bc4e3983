#ifndef FANET_DATA_HPP
#define FANET_DATA_HPP

#include "fanet/image.hpp"
#include "fanet/mask.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fanet {

class ManifestError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Split { train, val, test };
std::string to_string(Split split);
Split parse_split(const std::string& text);

struct SampleRecord {
  std::string sample_id;
  Split split = Split::train;
  std::filesystem::path image;  // absolute, or relative to DatasetManifest::root
  std::filesystem::path mask;
  bool operator==(const SampleRecord&) const = default;
};

/// Text format, one record per line:
///
///     # fanet-manifest v1
///     name<TAB>Kvasir-SEG
///     target_size<TAB>512
///     <sample_id><TAB><train|val|test><TAB><image path><TAB><mask path>
///
/// Blank lines and further '#' lines are ignored. Paths are relative to the
/// manifest's directory unless absolute.
struct DatasetManifest {
  std::string name;
  int target_size = 256;
  std::vector<SampleRecord> records;
  std::filesystem::path root;

  std::size_t count(Split split) const;
  const SampleRecord& find(const std::string& sample_id) const;
  std::vector<std::string> ids(Split split) const;
  bool operator==(const DatasetManifest& other) const {
    return name == other.name && target_size == other.target_size && records == other.records;
  }
};

/// Published split sizes of the benchmark datasets: training images before
/// augmentation, after augmentation, and test images.
struct KnownDataset {
  const char* name;
  int train;
  int train_augmented;
  int test;
  int target_size;
  bool assert_counts;
};
std::optional<KnownDataset> known_dataset(const std::string& name);

/// Throws ManifestError on an empty manifest, duplicate ids, missing files
/// (when `check_files`) or split sizes that contradict a known dataset.
void validate_manifest(const DatasetManifest& manifest, bool check_files = true);
DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root);
DatasetManifest load_manifest(const std::filesystem::path& path);
/// Writes paths relative to the manifest's directory where possible.
void write_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

struct Sample {
  std::string id;
  Image image;
  BinaryMask mask;
};

/// Image resized bilinearly and mask by nearest neighbour to target_size².
Sample load_sample(const DatasetManifest& manifest, const std::string& sample_id);
std::vector<Sample> load_split(const DatasetManifest& manifest, Split split);

/// Deterministic held-out subset: a seeded shuffle, of which the first
/// round(fraction * n) samples (at least one when n > 1) are removed.
std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> samples, double fraction,
                                                                     std::uint64_t seed);

// -------------------------------------------------------------- synthetic

struct Ellipse {
  double cy = 0, cx = 0;  // centre, pixel units with pixel (y, x) centred at (y + 0.5, x + 0.5)
  double ry = 1, rx = 1;  // semi-axes
  double angle = 0;       // radians
  float intensity = 1;

  bool contains(double y, double x) const;
};

struct SyntheticSpec {
  int count = 100;
  int test_count = 0;  // the last test_count samples form the test split
  int size = 64;
  int channels = 3;
  int min_blobs = 1, max_blobs = 4;
  double noise = 0.08;
  std::uint64_t seed = 0;

  void validate() const;
};

struct SyntheticSample {
  Sample sample;
  Split split = Split::train;
  std::vector<Ellipse> blobs;
};

/// Noisy backgrounds with a smooth intensity gradient plus 1-4 bright
/// ellipses; the mask is the union of ellipses sampled at pixel centres.
std::vector<SyntheticSample> generate_synthetic_samples(const SyntheticSpec& spec);

/// Writes the samples as PNG files under `directory` together with
/// `manifest.tsv`, and returns the manifest.
DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& directory);

}  // namespace fanet

#endif  // FANET_DATA_HPP
