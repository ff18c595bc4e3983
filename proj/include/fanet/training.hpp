#ifndef FANET_TRAINING_HPP
#define FANET_TRAINING_HPP

#include "fanet/data.hpp"
#include "fanet/fanet.hpp"
#include "fanet/mask_store.hpp"
#include "fanet/optim.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace fanet {

struct TrainConfig {
  int epochs = 100;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 8;
  int plateau_patience = 5;
  double plateau_factor = 0.1;
  double plateau_min_lr = 1e-7;
  double plateau_threshold = 1e-4;
  double dice_smooth = 1.0;
  std::uint64_t seed = 0;
  /// Share of the training split held out when the dataset has no val split.
  double val_fraction = 0.1;
  /// Offline augmentation recipes per training sample (1 = none).
  int augment_variants = 1;
  bool shuffle = true;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0;
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double learning_rate = 0;
  double seconds = 0;
};

/// Observation points for the feedback loop: the mask each sample consumed
/// during an epoch and the binarised prediction stored for it afterwards.
struct TrainHooks {
  std::function<void(int epoch, const std::string& sample_id, const BinaryMask& consumed)> on_consume;
  std::function<void(int epoch, const std::string& sample_id, const BinaryMask& produced)> on_produce;
  std::function<void(const EpochRecord& record)> on_epoch_end;
};

struct TrainState {
  TrainState(TrainConfig train, NetworkConfig network);

  TrainConfig config;
  FanetModel<float> model;
  Adam<float> optimizer;
  PlateauScheduler scheduler;
  MaskStore store;      // training samples
  MaskStore val_store;  // validation samples, fed by evaluation-mode predictions
  std::mt19937_64 rng;
  int epoch = 0;  // next epoch to run
  double learning_rate;
  std::vector<EpochRecord> history;
};

/// One optimisation pass. Every sample consumes its stored mask from the
/// previous epoch (Otsu mask when absent); the binarised predictions of the
/// pass are written to the store, stamped with this epoch, once the pass
/// ends. Returns the sample-weighted mean loss.
double train_epoch(TrainState& state, const std::vector<Sample>& samples, const TrainHooks& hooks = {});

/// Mean loss in evaluation mode; the validation store is updated with this
/// epoch's predictions.
double validation_loss(TrainState& state, const std::vector<Sample>& samples);

struct FitOptions {
  std::filesystem::path out_dir;  // empty: nothing is written
  TrainHooks hooks;
  nlohmann::json metadata = nlohmann::json::object();  // stored in every checkpoint
  std::ostream* progress = nullptr;
};

struct FitResult {
  std::vector<EpochRecord> history;
  int best_epoch = -1;
  double best_loss = std::numeric_limits<double>::infinity();
  std::filesystem::path best_checkpoint, final_checkpoint, log_path, store_path;
};

/// Runs the remaining epochs of `state`. The plateau scheduler and the best
/// checkpoint follow the validation loss, or the training loss when `val` is
/// empty. Throws std::invalid_argument for an empty training set.
FitResult fit(TrainState& state, const std::vector<Sample>& train, const std::vector<Sample>& val,
              const FitOptions& options = {});

/// Header and one line per epoch, as written to train_log.csv.
std::string training_log_header();
std::string training_log_line(const EpochRecord& record);

/// Stacks images into an N x C x H x W batch; all must share one size.
Tensor4<float> images_to_tensor(const std::vector<const Image*>& images);

}  // namespace fanet

#endif  // FANET_TRAINING_HPP
