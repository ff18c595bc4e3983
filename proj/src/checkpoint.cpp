#include "fanet/checkpoint.hpp"

#include "binary_io.hpp"
#include "fanet/config.hpp"

#include <fstream>

namespace fanet {

namespace io = binary_io;

namespace {

constexpr char kMagic[9] = "FANETCKP";

}  // namespace

bool same_architecture(const NetworkConfig& a, const NetworkConfig& b) {
  NetworkConfig x = a, y = b;
  x.feedback_at_inference = y.feedback_at_inference = true;
  x.binarize_threshold = y.binarize_threshold = 0.5;
  return x == y;
}

template <typename Scalar>
Checkpoint make_checkpoint(FanetModel<Scalar>& model, nlohmann::json metadata) {
  Checkpoint ckpt;
  ckpt.network = model.config();
  ckpt.metadata = std::move(metadata);
  for (auto* p : model.parameters()) {
    Checkpoint::Tensor t{p->name, p->shape, std::vector<float>(static_cast<std::size_t>(p->size()))};
    for (Index i = 0; i < p->size(); ++i) t.values[i] = static_cast<float>(p->value.data()[i]);
    ckpt.tensors.push_back(std::move(t));
  }
  return ckpt;
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
    out.write(kMagic, 8);
    io::put<std::uint32_t>(out, kCheckpointVersion);
    io::put_string(out, to_json(ckpt.network).dump());
    io::put_string(out, ckpt.metadata.dump());
    io::put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
    for (const auto& t : ckpt.tensors) {
      io::put_string(out, t.name);
      io::put<std::uint32_t>(out, static_cast<std::uint32_t>(t.shape.size()));
      for (Index d : t.shape) io::put<std::int64_t>(out, d);
      io::put<std::uint64_t>(out, t.values.size());
      out.write(reinterpret_cast<const char*>(t.values.data()),
                static_cast<std::streamsize>(t.values.size() * sizeof(float)));
    }
    if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
  try {
    io::expect_magic(in, kMagic);
    const auto version = io::get<std::uint32_t>(in);
    if (version != kCheckpointVersion) {
      throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ckpt;
    ckpt.network = network_config_from_json(nlohmann::json::parse(io::get_string(in)));
    ckpt.metadata = nlohmann::json::parse(io::get_string(in));
    const auto count = io::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < count; ++i) {
      Checkpoint::Tensor t;
      t.name = io::get_string(in, 4096);
      const auto rank = io::get<std::uint32_t>(in);
      if (rank > 8) throw CheckpointError("tensor '" + t.name + "' has implausible rank");
      Index expected = 1;
      for (std::uint32_t d = 0; d < rank; ++d) {
        t.shape.push_back(io::get<std::int64_t>(in));
        expected *= t.shape.back();
      }
      const auto size = io::get<std::uint64_t>(in);
      if (static_cast<Index>(size) != expected) throw CheckpointError("tensor '" + t.name + "' size disagrees with shape");
      t.values.resize(size);
      if (!in.read(reinterpret_cast<char*>(t.values.data()), static_cast<std::streamsize>(size * sizeof(float)))) {
        throw CheckpointError("truncated checkpoint " + path.string());
      }
      ckpt.tensors.push_back(std::move(t));
    }
    return ckpt;
  } catch (const io::FormatError& e) {
    throw CheckpointError(path.string() + ": " + e.what());
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(path.string() + ": bad embedded config: " + e.what());
  } catch (const ConfigError& e) {
    throw CheckpointError(path.string() + ": bad embedded config: " + e.what());
  }
}

template <typename Scalar>
void load_weights(FanetModel<Scalar>& model, const Checkpoint& ckpt) {
  if (!same_architecture(model.config(), ckpt.network)) {
    throw CheckpointError("checkpoint was written for a different network config: " + to_json(ckpt.network).dump() +
                          " vs model " + to_json(model.config()).dump());
  }
  const auto params = model.parameters();
  if (params.size() != ckpt.tensors.size()) {
    throw CheckpointError("checkpoint holds " + std::to_string(ckpt.tensors.size()) + " arrays, model expects " +
                          std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = *params[i];
    const auto& t = ckpt.tensors[i];
    if (p.name != t.name || p.shape != t.shape) {
      throw CheckpointError("checkpoint array '" + t.name + "' does not match model array '" + p.name + "'");
    }
    for (Index j = 0; j < p.size(); ++j) p.value.data()[j] = static_cast<Scalar>(t.values[j]);
  }
}

FanetModel<float> load_model(const Checkpoint& ckpt) {
  FanetModel<float> model(ckpt.network);
  load_weights(model, ckpt);
  return model;
}

template Checkpoint make_checkpoint(FanetModel<float>&, nlohmann::json);
template Checkpoint make_checkpoint(FanetModel<double>&, nlohmann::json);
template void load_weights(FanetModel<float>&, const Checkpoint&);
template void load_weights(FanetModel<double>&, const Checkpoint&);

}  // namespace fanet
