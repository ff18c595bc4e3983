#include "fanet/training.hpp"

#include "fanet/checkpoint.hpp"
#include "fanet/loss.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace fanet {

namespace {

struct Batch {
  std::vector<const Sample*> samples;
  Tensor4<float> images;
  Tensor4<float> targets;
  std::vector<BinaryMask> prev;
};

Batch make_batch(const std::vector<Sample>& data, const std::vector<std::size_t>& order, std::size_t begin,
                 std::size_t end) {
  Batch b;
  std::vector<const Image*> images;
  std::vector<BinaryMask> targets;
  for (std::size_t i = begin; i < end; ++i) {
    const Sample& s = data[order[i]];
    b.samples.push_back(&s);
    images.push_back(&s.image);
    targets.push_back(s.mask);
  }
  b.images = images_to_tensor(images);
  b.targets = masks_to_tensor<float>(targets);
  return b;
}

void gather_feedback(Batch& b, const MaskStore& store, bool feedback, int epoch, const TrainHooks* hooks) {
  if (!feedback) return;
  for (const Sample* s : b.samples) {
    b.prev.push_back(store.get(s->id, s->image));
    if (hooks && hooks->on_consume) hooks->on_consume(epoch, s->id, b.prev.back());
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train.epochs must be >= 1");
  if (!(learning_rate > 0)) throw std::invalid_argument("train.learning_rate must be > 0");
  if (batch_size < 1) throw std::invalid_argument("train.batch_size must be >= 1");
  if (!(dice_smooth > 0)) throw std::invalid_argument("train.dice_smooth must be > 0");
  if (plateau_patience < 0) throw std::invalid_argument("train.plateau_patience must be >= 0");
  if (!(plateau_factor > 0 && plateau_factor < 1)) throw std::invalid_argument("train.plateau_factor must be in (0, 1)");
  if (val_fraction < 0 || val_fraction >= 1) throw std::invalid_argument("train.val_fraction must be in [0, 1)");
  if (augment_variants < 1) throw std::invalid_argument("train.augment_variants must be >= 1");
}

TrainState::TrainState(TrainConfig train, NetworkConfig network)
    : config((train.validate(), train)),
      model(std::move(network), train.seed),
      optimizer(AdamOptions{train.learning_rate, train.beta1, train.beta2, train.adam_eps}),
      scheduler(PlateauOptions{train.plateau_factor, train.plateau_patience, train.plateau_min_lr,
                               train.plateau_threshold}),
      rng(train.seed ^ 0x9e3779b97f4a7c15ull),
      learning_rate(train.learning_rate) {}

Tensor4<float> images_to_tensor(const std::vector<const Image*>& images) {
  if (images.empty()) throw std::invalid_argument("images_to_tensor: empty batch");
  const Image& first = *images.front();
  Tensor4<float> out(static_cast<Index>(images.size()), first.channel_count(), first.height(), first.width());
  for (Index n = 0; n < out.batch(); ++n) {
    const Image& im = *images[n];
    if (im.channel_count() != first.channel_count() || im.height() != first.height() || im.width() != first.width()) {
      throw ShapeError("images_to_tensor: batch mixes image sizes");
    }
    for (Index c = 0; c < out.channels(); ++c) {
      out.sample(n).row(c) = Eigen::Map<const Eigen::RowVectorXf>(im.channels[c].data(), out.height() * out.width());
    }
  }
  return out;
}

double train_epoch(TrainState& state, const std::vector<Sample>& samples, const TrainHooks& hooks) {
  if (samples.empty()) throw std::invalid_argument("train_epoch: no samples");
  const int epoch = state.epoch;
  const NetworkConfig& net = state.model.config();
  const bool feedback = net.uses_feedback();
  const auto batch = static_cast<std::size_t>(state.config.batch_size);

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  if (state.config.shuffle) std::shuffle(order.begin(), order.end(), state.rng);

  state.optimizer.set_learning_rate(state.learning_rate);
  const auto params = state.model.trainable_parameters();
  std::vector<std::pair<std::string, BinaryMask>> produced;
  produced.reserve(samples.size());
  double loss_sum = 0;

  for (std::size_t begin = 0; begin < order.size(); begin += batch) {
    Batch b = make_batch(samples, order, begin, std::min(order.size(), begin + batch));
    gather_feedback(b, state.store, feedback, epoch, &hooks);

    state.model.zero_grad();
    const Tensor4<float> pred = state.model.forward(b.images, b.prev, nn::Pass::training());
    const auto loss = combined_loss(pred, b.targets, state.config.dice_smooth, true);
    if (!std::isfinite(loss.total)) throw std::runtime_error("non-finite training loss at epoch " + std::to_string(epoch));
    state.model.backward(loss.grad);
    state.optimizer.step(params);
    loss_sum += loss.total * static_cast<double>(b.samples.size());

    if (feedback) {
      auto masks = nn::binarize_maps(pred, net.binarize_threshold);
      for (std::size_t i = 0; i < masks.size(); ++i) produced.emplace_back(b.samples[i]->id, std::move(masks[i]));
    }
  }

  // Stores are written once per epoch, after every sample has consumed its
  // previous mask.
  for (const auto& [id, mask] : produced) {
    state.store.put(id, mask, epoch);
    if (hooks.on_produce) hooks.on_produce(epoch, id, mask);
  }
  return loss_sum / static_cast<double>(samples.size());
}

double validation_loss(TrainState& state, const std::vector<Sample>& samples) {
  if (samples.empty()) return std::numeric_limits<double>::quiet_NaN();
  const NetworkConfig& net = state.model.config();
  const bool feedback = net.uses_feedback();
  const auto batch = static_cast<std::size_t>(state.config.batch_size);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  std::vector<std::pair<std::string, BinaryMask>> produced;
  double loss_sum = 0;
  for (std::size_t begin = 0; begin < order.size(); begin += batch) {
    Batch b = make_batch(samples, order, begin, std::min(order.size(), begin + batch));
    gather_feedback(b, state.val_store, feedback, state.epoch, nullptr);
    const Tensor4<float> pred = state.model.forward(b.images, b.prev, nn::Pass::inference());
    loss_sum += combined_loss(pred, b.targets, state.config.dice_smooth).total * static_cast<double>(b.samples.size());
    if (feedback) {
      auto masks = nn::binarize_maps(pred, net.binarize_threshold);
      for (std::size_t i = 0; i < masks.size(); ++i) produced.emplace_back(b.samples[i]->id, std::move(masks[i]));
    }
  }
  for (const auto& [id, mask] : produced) state.val_store.put(id, mask, state.epoch);
  return loss_sum / static_cast<double>(samples.size());
}

std::string training_log_header() { return "epoch,train_loss,val_loss,lr,epoch_time"; }

std::string training_log_line(const EpochRecord& r) {
  char buf[160];
  std::snprintf(buf, sizeof buf, "%d,%.9g,%.9g,%.9g,%.3f", r.epoch, r.train_loss, r.val_loss, r.learning_rate,
                r.seconds);
  return buf;
}

FitResult fit(TrainState& state, const std::vector<Sample>& train, const std::vector<Sample>& val,
              const FitOptions& options) {
  if (train.empty()) throw std::invalid_argument("fit: the training set is empty");
  FitResult result;
  std::ofstream log;
  const bool write = !options.out_dir.empty();
  if (write) {
    std::filesystem::create_directories(options.out_dir);
    result.log_path = options.out_dir / "train_log.csv";
    result.best_checkpoint = options.out_dir / "best.ckpt";
    result.final_checkpoint = options.out_dir / "final.ckpt";
    result.store_path = options.out_dir / "masks.rle";
    log.open(result.log_path);
    if (!log) throw std::runtime_error("cannot write " + result.log_path.string());
    log << training_log_header() << '\n';
  }
  auto checkpoint = [&](const std::filesystem::path& path, const EpochRecord& r) {
    nlohmann::json meta = options.metadata;
    meta["epoch"] = r.epoch;
    meta["train_loss"] = r.train_loss;
    if (std::isfinite(r.val_loss)) meta["val_loss"] = r.val_loss;
    meta["seed"] = state.config.seed;
    write_checkpoint(path, make_checkpoint(state.model, meta));
  };

  while (state.epoch < state.config.epochs) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord r;
    r.epoch = state.epoch;
    r.learning_rate = state.learning_rate;
    r.train_loss = train_epoch(state, train, options.hooks);
    r.val_loss = validation_loss(state, val);
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    const double monitored = val.empty() ? r.train_loss : r.val_loss;
    state.learning_rate = state.scheduler.step(monitored, state.learning_rate);
    state.history.push_back(r);
    if (monitored < result.best_loss) {
      result.best_loss = monitored;
      result.best_epoch = r.epoch;
      if (write) checkpoint(result.best_checkpoint, r);
    }
    if (write) log << training_log_line(r) << '\n' << std::flush;
    if (options.progress) {
      *options.progress << "epoch " << r.epoch + 1 << "/" << state.config.epochs << "  train " << r.train_loss
                        << "  val " << r.val_loss << "  lr " << r.learning_rate << "  " << r.seconds << "s\n";
    }
    if (options.hooks.on_epoch_end) options.hooks.on_epoch_end(r);
    ++state.epoch;
  }
  if (write) {
    checkpoint(result.final_checkpoint, state.history.back());
    state.store.save(result.store_path);
  }
  result.history = state.history;
  return result;
}

}  // namespace fanet
