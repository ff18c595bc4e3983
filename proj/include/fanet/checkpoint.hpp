#ifndef FANET_CHECKPOINT_HPP
#define FANET_CHECKPOINT_HPP

#include "fanet/fanet.hpp"

#include <json.hpp>

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

namespace fanet {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Binary container: "FANETCKP", format version, the network config and a
/// free-form metadata document (both JSON), then named tensors with their
/// logical shapes. Values are stored as float32.
struct Checkpoint {
  struct Tensor {
    std::string name;
    std::vector<Index> shape;
    std::vector<float> values;
  };

  NetworkConfig network;
  nlohmann::json metadata = nlohmann::json::object();
  std::vector<Tensor> tensors;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

template <typename Scalar>
Checkpoint make_checkpoint(FanetModel<Scalar>& model, nlohmann::json metadata = nlohmann::json::object());

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint read_checkpoint(const std::filesystem::path& path);

/// Copies every stored array into `model`. Throws CheckpointError if the
/// checkpoint was written for a different network config or its tensors do
/// not line up with the model's names and shapes.
template <typename Scalar>
void load_weights(FanetModel<Scalar>& model, const Checkpoint& checkpoint);

/// Builds the model the checkpoint describes and loads its weights.
FanetModel<float> load_model(const Checkpoint& checkpoint);

/// Fields that change the set of stored arrays. Inference-only switches are
/// ignored so that one trained model can be evaluated under both.
bool same_architecture(const NetworkConfig& a, const NetworkConfig& b);

}  // namespace fanet

#endif  // FANET_CHECKPOINT_HPP
