#include "fanet/data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

namespace fanet {

namespace {

constexpr const char* kManifestHeader = "# fanet-manifest v1";

// Pre-augmentation training and test counts; EM leaves three images
// unaccounted for, so its counts are informational only.
constexpr KnownDataset kKnownDatasets[] = {
    {"Kvasir-SEG", 880, 16720, 120, 512, true},
    {"CVC-ClinicDB", 490, 14210, 61, 256, true},
    {"2018 Data Science Bowl", 335, 10720, 134, 256, true},
    {"ISIC 2018", 1815, 39930, 259, 512, true},
    {"EM", 24, 384, 3, 512, false},
    {"DRIVE", 20, 640, 20, 512, true},
    {"CHASE-DB1", 20, 640, 8, 512, true},
};

std::string normalize_name(const std::string& name) {
  std::string out;
  for (unsigned char c : name)
    if (std::isalnum(c)) out += static_cast<char>(std::tolower(c));
  return out;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto tab = line.find('\t', start);
    fields.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return fields;
}

std::filesystem::path resolve(const DatasetManifest& m, const std::filesystem::path& p) {
  return p.is_absolute() || m.root.empty() ? p : m.root / p;
}

}  // namespace

std::string to_string(Split split) {
  switch (split) {
    case Split::train:
      return "train";
    case Split::val:
      return "val";
    case Split::test:
      return "test";
  }
  return "?";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  throw ManifestError("unknown split '" + text + "' (expected train, val or test)");
}

std::size_t DatasetManifest::count(Split split) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const SampleRecord& r) { return r.split == split; }));
}

const SampleRecord& DatasetManifest::find(const std::string& sample_id) const {
  for (const auto& r : records)
    if (r.sample_id == sample_id) return r;
  throw ManifestError("sample '" + sample_id + "' not in manifest '" + name + "'");
}

std::vector<std::string> DatasetManifest::ids(Split split) const {
  std::vector<std::string> out;
  for (const auto& r : records)
    if (r.split == split) out.push_back(r.sample_id);
  return out;
}

std::optional<KnownDataset> known_dataset(const std::string& name) {
  const std::string key = normalize_name(name);
  for (const auto& d : kKnownDatasets)
    if (normalize_name(d.name) == key) return d;
  if (key == "dsb2018" || key == "datasciencebowl2018") return kKnownDatasets[2];
  if (key == "isic2018lesionboundarysegmentation") return kKnownDatasets[3];
  return std::nullopt;
}

void validate_manifest(const DatasetManifest& m, bool check_files) {
  if (m.records.empty()) throw ManifestError("manifest '" + m.name + "' has no samples");
  if (m.target_size <= 0) throw ManifestError("target_size must be positive");
  std::set<std::string> seen;
  for (const auto& r : m.records) {
    if (r.sample_id.empty()) throw ManifestError("empty sample_id");
    if (!seen.insert(r.sample_id).second) throw ManifestError("duplicate sample_id '" + r.sample_id + "'");
    if (!check_files) continue;
    for (const auto& p : {r.image, r.mask}) {
      if (!std::filesystem::is_regular_file(resolve(m, p))) {
        throw ManifestError("sample '" + r.sample_id + "': missing file " + resolve(m, p).string());
      }
    }
  }
  const auto known = known_dataset(m.name);
  if (!known || !known->assert_counts) return;
  const auto train = static_cast<int>(m.count(Split::train));
  const auto test = static_cast<int>(m.count(Split::test));
  if ((train != known->train && train != known->train_augmented) || test != known->test) {
    throw ManifestError(std::string(known->name) + " expects " + std::to_string(known->train) + " (or " +
                        std::to_string(known->train_augmented) + " augmented) train and " +
                        std::to_string(known->test) + " test samples, manifest has " + std::to_string(train) + "/" +
                        std::to_string(test));
  }
}

DatasetManifest parse_manifest(const std::string& text, const std::filesystem::path& root) {
  DatasetManifest m;
  m.root = root;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != kManifestHeader) throw ManifestError("missing '" + std::string(kManifestHeader) + "' header");
      header = true;
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    const auto f = split_tabs(line);
    const std::string where = "manifest line " + std::to_string(line_no) + ": ";
    if (f[0] == "name" && f.size() == 2) {
      m.name = f[1];
    } else if (f[0] == "target_size" && f.size() == 2) {
      try {
        m.target_size = std::stoi(f[1]);
      } catch (const std::exception&) {
        throw ManifestError(where + "bad target_size '" + f[1] + "'");
      }
    } else if (f.size() == 4) {
      m.records.push_back({f[0], parse_split(f[1]), f[2], f[3]});
    } else {
      throw ManifestError(where + "expected 4 tab-separated fields, got " + std::to_string(f.size()));
    }
  }
  if (!header) throw ManifestError("empty manifest");
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ManifestError("cannot open manifest " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  DatasetManifest m = parse_manifest(text.str(), path.parent_path());
  validate_manifest(m);
  return m;
}

void write_manifest(const std::filesystem::path& path, const DatasetManifest& m) {
  const auto dir = std::filesystem::absolute(path).lexically_normal().parent_path();
  auto rel = [&](const std::filesystem::path& p) {
    return std::filesystem::absolute(resolve(m, p)).lexically_normal().lexically_relative(dir).generic_string();
  };
  std::ofstream out(path);
  if (!out) throw ManifestError("cannot write manifest " + path.string());
  out << kManifestHeader << '\n' << "name\t" << m.name << '\n' << "target_size\t" << m.target_size << '\n';
  for (const auto& r : m.records) {
    out << r.sample_id << '\t' << to_string(r.split) << '\t' << rel(r.image) << '\t' << rel(r.mask) << '\n';
  }
  if (!out) throw ManifestError("failed writing manifest " + path.string());
}

Sample load_sample(const DatasetManifest& manifest, const std::string& sample_id) {
  const SampleRecord& r = manifest.find(sample_id);
  const Index size = manifest.target_size;
  Sample s{r.sample_id, read_image(resolve(manifest, r.image)), read_mask(resolve(manifest, r.mask))};
  s.image = resize_bilinear(s.image, size, size);
  s.mask = resize_nearest(s.mask, size, size);
  return s;
}

std::vector<Sample> load_split(const DatasetManifest& manifest, Split split) {
  std::vector<Sample> out;
  for (const auto& id : manifest.ids(split)) out.push_back(load_sample(manifest, id));
  return out;
}

std::pair<std::vector<Sample>, std::vector<Sample>> split_validation(std::vector<Sample> samples, double fraction,
                                                                     std::uint64_t seed) {
  if (fraction < 0 || fraction >= 1) throw std::invalid_argument("validation fraction must be in [0, 1)");
  const std::size_t n = samples.size();
  std::size_t held = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
  if (fraction > 0 && n > 1) held = std::clamp<std::size_t>(held, 1, n - 1);
  if (held == 0) return {std::move(samples), {}};
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<bool> is_val(n, false);
  for (std::size_t i = 0; i < held; ++i) is_val[order[i]] = true;
  std::vector<Sample> train, val;
  for (std::size_t i = 0; i < n; ++i) (is_val[i] ? val : train).push_back(std::move(samples[i]));
  return {std::move(train), std::move(val)};
}

// -------------------------------------------------------------- synthetic

bool Ellipse::contains(double y, double x) const {
  const double c = std::cos(angle), s = std::sin(angle);
  const double dy = y - cy, dx = x - cx;
  const double u = c * dx + s * dy;   // along the x semi-axis
  const double v = -s * dx + c * dy;  // along the y semi-axis
  return (u * u) / (rx * rx) + (v * v) / (ry * ry) <= 1.0;
}

void SyntheticSpec::validate() const {
  if (count < 1) throw std::invalid_argument("synthetic count must be >= 1");
  if (test_count < 0 || test_count > count) throw std::invalid_argument("synthetic test_count out of range");
  if (size < 8) throw std::invalid_argument("synthetic size must be >= 8");
  if (channels != 1 && channels != 3) throw std::invalid_argument("synthetic channels must be 1 or 3");
  if (min_blobs < 1 || max_blobs < min_blobs) throw std::invalid_argument("need 1 <= min_blobs <= max_blobs");
  if (noise < 0) throw std::invalid_argument("synthetic noise must be >= 0");
}

std::vector<SyntheticSample> generate_synthetic_samples(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_int_distribution<int> blob_count(spec.min_blobs, spec.max_blobs);
  const Index n = spec.size;
  const double rmin = std::max(3.0, 0.06 * n), rmax = std::max(rmin + 1.0, 0.22 * n);

  std::vector<SyntheticSample> out;
  out.reserve(spec.count);
  for (int i = 0; i < spec.count; ++i) {
    SyntheticSample s;
    s.split = i >= spec.count - spec.test_count ? Split::test : Split::train;
    char id[32];
    std::snprintf(id, sizeof id, "synth_%05d", i);
    s.sample.id = id;

    const int blobs = blob_count(rng);
    for (int b = 0; b < blobs; ++b) {
      Ellipse e;
      e.ry = rmin + (rmax - rmin) * unit(rng);
      e.rx = rmin + (rmax - rmin) * unit(rng);
      e.cy = e.ry * 0.5 + (n - e.ry) * unit(rng);
      e.cx = e.rx * 0.5 + (n - e.rx) * unit(rng);
      e.angle = M_PI * unit(rng);
      e.intensity = static_cast<float>(0.6 + 0.35 * unit(rng));
      s.blobs.push_back(e);
    }

    // Background: a dim linear gradient in a random direction.
    const double base = 0.1 + 0.15 * unit(rng), gy = 0.15 * (unit(rng) - 0.5), gx = 0.15 * (unit(rng) - 0.5);
    std::vector<double> tint(spec.channels);
    for (auto& t : tint) t = 0.85 + 0.3 * unit(rng);

    s.sample.image = Image::zeros(spec.channels, n, n);
    MaskArray mask = MaskArray::Zero(n, n);
    for (Index y = 0; y < n; ++y) {
      for (Index x = 0; x < n; ++x) {
        const double py = y + 0.5, px = x + 0.5;
        double v = base + gy * (py / n) + gx * (px / n);
        for (const auto& e : s.blobs) {
          if (e.contains(py, px)) {
            v = std::max(v, static_cast<double>(e.intensity));
            mask(y, x) = 1;
          }
        }
        for (int c = 0; c < spec.channels; ++c) {
          const double noisy = v * tint[c] + spec.noise * gauss(rng);
          s.sample.image.channels[c](y, x) = static_cast<float>(std::clamp(noisy, 0.0, 1.0));
        }
      }
    }
    s.sample.mask = BinaryMask(std::move(mask));
    out.push_back(std::move(s));
  }
  return out;
}

DatasetManifest generate_synthetic(const SyntheticSpec& spec, const std::filesystem::path& directory) {
  namespace fs = std::filesystem;
  const auto samples = generate_synthetic_samples(spec);
  fs::create_directories(directory / "images");
  fs::create_directories(directory / "masks");
  DatasetManifest m;
  m.name = "synthetic-blobs";
  m.target_size = spec.size;
  m.root = directory;
  for (const auto& s : samples) {
    const fs::path image = fs::path("images") / (s.sample.id + ".png");
    const fs::path mask = fs::path("masks") / (s.sample.id + ".png");
    write_image(directory / image, s.sample.image);
    write_mask(directory / mask, s.sample.mask);
    m.records.push_back({s.sample.id, s.split, image, mask});
  }
  write_manifest(directory / "manifest.tsv", m);
  return m;
}

}  // namespace fanet
