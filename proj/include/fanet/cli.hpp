#ifndef FANET_CLI_HPP
#define FANET_CLI_HPP

#include "fanet/config.hpp"
#include "fanet/training.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace fanet::cli {

enum ExitCode : int { kSuccess = 0, kConfigError = 2, kRuntimeError = 3 };

/// Entry point shared by the `fanet` binary and the tests. `args` excludes
/// the program name. Artifacts go to files under --out; `out` receives help
/// text and `err` progress and diagnostics.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads FANET_DEVICE; only "cpu" (or unset) is accepted.
void check_device();

struct DataSplits {
  std::vector<Sample> train, val, test;
};

/// Train/val/test samples for the configured dataset. A missing val split is
/// carved out of train with `train.val_fraction`; augmentation applies to
/// train only.
DataSplits load_data(const AppConfig& config);

FitResult cmd_train(const AppConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

struct InferRequest {
  std::filesystem::path checkpoint;
  std::vector<std::filesystem::path> images;  // empty: the configured dataset's test split
  std::optional<Ablation> ablation;           // run the checkpoint as this variant
  Index size = 0;                             // resize `images` to size x size when positive
  bool save_iterations = false;
  bool overlay = false;
};
void cmd_infer(const AppConfig& config, const InferRequest& request, const std::filesystem::path& out_dir,
               std::ostream& log);

void cmd_eval(const AppConfig& config, const std::filesystem::path& checkpoint, const std::optional<Ablation>& ablation,
              const std::filesystem::path& out_dir, std::ostream& log);

/// Writes the stored mask of `sample_id` as a 0/255 PNG and returns its path.
std::filesystem::path export_stored_mask(const std::filesystem::path& store, const std::string& sample_id,
                                         const std::filesystem::path& out_dir);

/// Trains B1, B3 and B4 (B2 reuses the B4 weights without feedback at
/// inference) and evaluates all four on the test split.
ReportTable cmd_ablate(const AppConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

DatasetManifest cmd_synth_gen(const AppConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Sample ids may contain '/' or '#'; this keeps them usable as file names.
std::string file_stem(const std::string& sample_id);

}  // namespace fanet::cli

#endif  // FANET_CLI_HPP
