#include "fanet/cli.hpp"

#include "fanet/augment.hpp"
#include "fanet/checkpoint.hpp"
#include "fanet/image.hpp"
#include "fanet/inference.hpp"
#include "fanet/mask_store.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>

namespace fanet::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

void write_json(const fs::path& path, const nlohmann::json& doc) { open_output(path) << doc.dump(2) << '\n'; }

std::vector<Sample> test_split(const AppConfig& config) {
  if (!config.data.manifest.empty()) return load_split(load_manifest(config.data.manifest), Split::test);
  std::vector<Sample> out;
  for (auto& s : generate_synthetic_samples(config.data.synthetic))
    if (s.split == Split::test) out.push_back(std::move(s.sample));
  return out;
}

// The checkpoint's network, switched to another ablation when one was asked
// for; load_weights rejects a switch that changes the stored arrays.
FanetModel<float> model_from_checkpoint(const fs::path& path, const std::optional<Ablation>& ablation) {
  const Checkpoint ckpt = read_checkpoint(path);
  NetworkConfig network = ckpt.network;
  if (ablation) network = NetworkConfig::for_ablation(*ablation, network);
  FanetModel<float> model(network);
  load_weights(model, ckpt);
  return model;
}

std::vector<const Image*> image_pointers(const std::vector<Sample>& samples) {
  std::vector<const Image*> out;
  for (const auto& s : samples) out.push_back(&s.image);
  return out;
}

std::vector<const BinaryMask*> mask_pointers(const std::vector<Sample>& samples) {
  std::vector<const BinaryMask*> out;
  for (const auto& s : samples) out.push_back(&s.mask);
  return out;
}

std::vector<BinaryMask> target_masks(const std::vector<Sample>& samples) {
  std::vector<BinaryMask> out;
  for (const auto& s : samples) out.push_back(s.mask);
  return out;
}

std::vector<RefinementTrace> predict_all(FanetModel<float>& model, const std::vector<Sample>& samples,
                                         const InferenceOptions& options, bool with_truth, int batch = 8) {
  std::vector<RefinementTrace> traces;
  for (std::size_t begin = 0; begin < samples.size(); begin += batch) {
    const std::size_t end = std::min(samples.size(), begin + batch);
    const std::vector<Sample> chunk(samples.begin() + begin, samples.begin() + end);
    auto part = iterative_predict_batch(model, image_pointers(chunk), options,
                                        with_truth ? mask_pointers(chunk) : std::vector<const BinaryMask*>{});
    for (auto& t : part) traces.push_back(std::move(t));
  }
  return traces;
}

std::vector<BinaryMask> final_masks(const std::vector<RefinementTrace>& traces) {
  std::vector<BinaryMask> out;
  for (const auto& t : traces) out.push_back(t.final_mask());
  return out;
}

ReportRow report_row(const std::string& method, const DatasetReport& report) {
  return {method, report.summary, report.miou, {}};
}

// The input image beside a copy with the mask tinted red.
Image overlay(const Image& image, const BinaryMask& mask) {
  const Index h = image.height(), w = image.width();
  Image out = Image::zeros(3, h, 2 * w);
  for (int c = 0; c < 3; ++c) {
    const Plane& src = image.channels[std::min<std::size_t>(c, image.channels.size() - 1)];
    out.channels[c].leftCols(w) = src;
    out.channels[c].rightCols(w) = src;
  }
  for (Index y = 0; y < h; ++y)
    for (Index x = 0; x < w; ++x)
      if (mask(y, x)) {
        out.channels[0](y, w + x) = 0.5f * out.channels[0](y, w + x) + 0.5f;
        out.channels[1](y, w + x) *= 0.5f;
        out.channels[2](y, w + x) *= 0.5f;
      }
  return out;
}

}  // namespace

void check_device() {
  const char* device = std::getenv("FANET_DEVICE");
  if (device && *device && std::string(device) != "cpu") {
    throw ConfigError(std::string("FANET_DEVICE=") + device + " is not available; this build runs on cpu only");
  }
}

std::string file_stem(const std::string& sample_id) {
  std::string out = sample_id;
  for (char& c : out)
    if (c == '/' || c == '\\' || c == '#' || c == ':' || c == ' ') c = '_';
  return out;
}

DataSplits load_data(const AppConfig& config) {
  DataSplits d;
  if (!config.data.manifest.empty()) {
    const DatasetManifest manifest = load_manifest(config.data.manifest);
    d.train = load_split(manifest, Split::train);
    d.val = load_split(manifest, Split::val);
    d.test = load_split(manifest, Split::test);
  } else {
    for (auto& s : generate_synthetic_samples(config.data.synthetic)) {
      (s.split == Split::test ? d.test : d.train).push_back(std::move(s.sample));
    }
  }
  if (d.val.empty() && config.train.val_fraction > 0 && d.train.size() > 1) {
    std::tie(d.train, d.val) = split_validation(std::move(d.train), config.train.val_fraction, config.train.seed);
  }
  if (config.train.augment_variants > 1) d.train = augment_dataset(d.train, config.train.augment_variants, config.train.seed);
  if (d.train.empty()) throw ConfigError("the dataset has no training samples");
  return d;
}

FitResult cmd_train(const AppConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DataSplits data = load_data(config);
  fs::create_directories(out_dir);
  write_json(out_dir / "config.json", to_json(config));
  log << "training " << (config.network.ablation() ? to_string(*config.network.ablation()) : "custom") << " on "
      << data.train.size() << " samples (" << data.val.size() << " held out), "
      << count_parameters(config.network) << " parameters\n";
  TrainState state(config.train, config.network);
  FitOptions options;
  options.out_dir = out_dir;
  options.metadata = {{"config", to_json(config)}};
  options.progress = &log;
  return fit(state, data.train, data.val, options);
}

void cmd_infer(const AppConfig& config, const InferRequest& request, const fs::path& out_dir, std::ostream& log) {
  FanetModel<float> model = model_from_checkpoint(request.checkpoint, request.ablation);
  std::vector<Sample> samples;
  const bool with_truth = request.images.empty();
  if (with_truth) {
    samples = test_split(config);
  } else {
    for (const auto& path : request.images) {
      Image image = read_image(path);
      if (request.size > 0) image = resize_bilinear(image, request.size, request.size);
      samples.push_back({path.stem().string(), std::move(image), {}});
    }
  }
  if (samples.empty()) throw ConfigError("no images to run inference on");

  const auto traces = predict_all(model, samples, config.inference, with_truth, 1);
  fs::create_directories(out_dir / "masks");
  std::ofstream trace_csv = open_output(out_dir / "trace.csv");
  trace_csv << "image,iteration,foreground,changed" << (with_truth ? ",F1" : "") << '\n';
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::string stem = file_stem(samples[i].id);
    const auto& trace = traces[i];
    write_mask(out_dir / "masks" / (stem + ".png"), trace.final_mask());
    if (request.save_iterations) {
      fs::create_directories(out_dir / "iterations" / stem);
      for (std::size_t t = 0; t < trace.size(); ++t) {
        char name[32];
        std::snprintf(name, sizeof name, "iter_%02zu.png", t);
        write_mask(out_dir / "iterations" / stem / name, trace.masks[t]);
      }
    }
    if (request.overlay) {
      fs::create_directories(out_dir / "overlays");
      write_image(out_dir / "overlays" / (stem + ".png"), overlay(samples[i].image, trace.final_mask()));
    }
    for (std::size_t t = 0; t < trace.size(); ++t) {
      const BinaryMask& before = t == 0 ? trace.initial : trace.masks[t - 1];
      trace_csv << samples[i].id << ',' << t << ',' << trace.masks[t].count() << ','
                << (trace.masks[t].values() != before.values()).count();
      if (with_truth) trace_csv << ',' << format_metric(trace.metrics[t].f1);
      trace_csv << '\n';
    }
  }
  if (with_truth) {
    std::ofstream curve = open_output(out_dir / "iterations.csv");
    write_trace_csv(curve, iteration_reports(traces, target_masks(samples), config.eval));
  }
  log << "wrote " << samples.size() << " masks to " << (out_dir / "masks").string() << '\n';
}

void cmd_eval(const AppConfig& config, const fs::path& checkpoint, const std::optional<Ablation>& ablation,
              const fs::path& out_dir, std::ostream& log) {
  FanetModel<float> model = model_from_checkpoint(checkpoint, ablation);
  const std::vector<Sample> samples = test_split(config);
  if (samples.empty()) throw ConfigError("the dataset has no test samples");
  log << "evaluating " << samples.size() << " images over " << config.inference.iterations << " iterations\n";
  const auto traces = predict_all(model, samples, config.inference, true);
  const auto per_iteration = iteration_reports(traces, target_masks(samples), config.eval);

  fs::create_directories(out_dir);
  std::ofstream curve = open_output(out_dir / "iterations.csv");
  write_trace_csv(curve, per_iteration);

  // The final iteration is the prediction; the best iteration is selected
  // with the ground truth and is reported for comparison only.
  std::size_t best = 0;
  for (std::size_t t = 1; t < per_iteration.size(); ++t)
    if (per_iteration[t].summary.f1 > per_iteration[best].summary.f1) best = t;
  ReportTable table;
  table.extra_columns = {"iteration"};
  table.rows.push_back(report_row("final", per_iteration.back()));
  table.rows.back().extra = {std::to_string(per_iteration.size() - 1)};
  table.rows.push_back(report_row("best", per_iteration[best]));
  table.rows.back().extra = {std::to_string(best)};
  std::ofstream csv = open_output(out_dir / "report.csv");
  write_report_csv(csv, table);
  std::ofstream md = open_output(out_dir / "report.md");
  write_report_markdown(md, table);

  std::vector<std::string> ids;
  for (const auto& s : samples) ids.push_back(s.id);
  std::ofstream per_image = open_output(out_dir / "per_image.csv");
  write_per_image_csv(per_image, ids, per_iteration.back());
  log << "F1 " << format_metric(per_iteration.back().summary.f1) << "  mIoU " << format_metric(per_iteration.back().miou)
      << '\n';
}

fs::path export_stored_mask(const fs::path& store_path, const std::string& sample_id, const fs::path& out_dir) {
  const MaskStore store = MaskStore::load(store_path);
  const auto mask = store.find(sample_id);
  if (!mask) throw ConfigError("no mask stored for '" + sample_id + "' in " + store_path.string());
  fs::create_directories(out_dir);
  const fs::path path = out_dir / (file_stem(sample_id) + ".png");
  write_mask(path, *mask);
  return path;
}

ReportTable cmd_ablate(const AppConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DataSplits data = load_data(config);
  if (data.test.empty()) throw ConfigError("the dataset has no test samples");
  fs::create_directories(out_dir);
  write_json(out_dir / "config.json", to_json(config));
  const std::vector<BinaryMask> targets = target_masks(data.test);

  ReportTable table;
  table.extra_columns = {"params", "images_per_s"};
  std::optional<Checkpoint> b4_weights;
  for (const Ablation variant : {Ablation::B1, Ablation::B3, Ablation::B4, Ablation::B2}) {
    const std::string name = to_string(variant);
    const NetworkConfig network = NetworkConfig::for_ablation(variant, config.network);
    FanetModel<float> model(network);
    if (variant == Ablation::B2) {
      load_weights(model, *b4_weights);
    } else {
      log << "[" << name << "] training\n";
      TrainState state(config.train, network);
      FitOptions options;
      options.out_dir = out_dir / name;
      options.metadata = {{"config", to_json(config)}, {"ablation", name}};
      options.progress = &log;
      fit(state, data.train, data.val, options);
      load_weights(model, make_checkpoint(state.model));
      if (variant == Ablation::B4) b4_weights = make_checkpoint(state.model);
    }
    const auto start = std::chrono::steady_clock::now();
    const auto traces = predict_all(model, data.test, config.inference, false);
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const DatasetReport report = evaluate_dataset(final_masks(traces), targets, config.eval);
    ReportRow row = report_row(name, report);
    char rate[32];
    std::snprintf(rate, sizeof rate, "%.2f", static_cast<double>(data.test.size()) / std::max(seconds, 1e-9));
    row.extra = {std::to_string(model.parameter_count()), rate};
    log << "[" << name << "] F1 " << format_metric(report.summary.f1) << '\n';
    table.rows.push_back(std::move(row));
  }
  std::sort(table.rows.begin(), table.rows.end(), [](const auto& a, const auto& b) { return a.method < b.method; });
  std::ofstream csv = open_output(out_dir / "ablation.csv");
  write_report_csv(csv, table);
  std::ofstream md = open_output(out_dir / "ablation.md");
  write_report_markdown(md, table);
  return table;
}

DatasetManifest cmd_synth_gen(const AppConfig& config, const fs::path& out_dir, std::ostream& log) {
  const DatasetManifest manifest = generate_synthetic(config.data.synthetic, out_dir);
  log << "wrote " << manifest.records.size() << " samples and " << (out_dir / "manifest.tsv").string() << '\n';
  return manifest;
}

// ------------------------------------------------------------------ run

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feedback attention network for binary segmentation", "fanet"};
  app.require_subcommand(1);
  app.footer(
      "Overrides use dotted config paths, e.g. --set train.epochs=5 --set network.base_widths=16,32,64,128.\n"
      "FANET_DEVICE selects the compute device; only 'cpu' is available.\n"
      "Exit codes: 0 success, 2 usage or configuration error, 3 runtime error.");

  std::string config_path, out_dir, ablation, dataset, checkpoint, mask_store, export_id;
  std::vector<std::string> overrides, images;
  std::uint64_t seed = 0;
  int iterations = 10;
  Index image_size = 0;
  bool save_iterations = false, overlay_images = false;

  auto common = [&](CLI::App* cmd, bool needs_out = true) {
    cmd->add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);
    cmd->add_option("--set", overrides, "Override a config key, section.key=value (repeatable)");
    auto* out_opt = cmd->add_option("--out", out_dir, "Output directory; every artifact is written below it");
    if (needs_out) out_opt->required();
    cmd->add_option("--dataset", dataset, "Manifest path, or 'synthetic' for the built-in generator");
    cmd->add_option("--ablation", ablation, "Network variant")->check(CLI::IsMember({"B1", "B2", "B3", "B4"}));
  };
  auto* train = app.add_subcommand("train", "Train a model; writes checkpoints, train_log.csv and masks.rle");
  common(train);
  train->add_option("--seed", seed, "Training seed (train.seed)");
  auto* infer = app.add_subcommand("infer", "Iterative refinement on images or the dataset's test split");
  common(infer);
  infer->add_option("--checkpoint", checkpoint, "Trained checkpoint")->required()->check(CLI::ExistingFile);
  infer->add_option("--iterations", iterations, "Refinement iterations (default 10)")->check(CLI::PositiveNumber);
  infer->add_option("--image", images, "Input image (repeatable); default: the test split")->check(CLI::ExistingFile);
  infer->add_option("--size", image_size, "Resize --image inputs to this square size")->check(CLI::PositiveNumber);
  infer->add_flag("--save-iterations", save_iterations, "Write the mask of every iteration");
  infer->add_flag("--overlay", overlay_images, "Write image and mask side by side");
  auto* eval = app.add_subcommand("eval", "Metrics on the test split at every iteration");
  common(eval);
  eval->add_option("--checkpoint", checkpoint, "Trained checkpoint")->check(CLI::ExistingFile);
  eval->add_option("--iterations", iterations, "Refinement iterations (default 10)")->check(CLI::PositiveNumber);
  eval->add_option("--mask-store", mask_store, "Debug: mask store written by train")->check(CLI::ExistingFile);
  eval->add_option("--export-mask", export_id, "Debug: export this sample's stored mask as PNG")->needs("--mask-store");
  auto* ablate = app.add_subcommand("ablate", "Train and compare B1-B4");
  common(ablate);
  ablate->add_option("--seed", seed, "Training seed (train.seed)");
  ablate->add_option("--iterations", iterations, "Refinement iterations (default 10)")->check(CLI::PositiveNumber);
  auto* synth = app.add_subcommand("synth-gen", "Write a synthetic dataset with its manifest");
  common(synth);
  synth->add_option("--seed", seed, "Generator seed (data.synthetic.seed)");

  std::vector<std::string> argv_storage{"fanet"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& a : argv_storage) argv.push_back(a.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kConfigError;
  }

  try {
    check_device();
    std::vector<std::string> sets;
    if (!dataset.empty()) {
      // Written as JSON strings so that paths with commas stay intact.
      sets.push_back("data.manifest=" + nlohmann::json(dataset == "synthetic" ? "" : dataset).dump());
    }
    const auto* cmd = app.get_subcommands().front();
    auto given = [cmd](const char* name) {
      const auto* opt = cmd->get_option_no_throw(name);
      return opt && opt->count() > 0;
    };
    if (given("--seed")) {
      sets.push_back((cmd == synth ? "data.synthetic.seed=" : "train.seed=") + std::to_string(seed));
    }
    if (given("--iterations")) sets.push_back("inference.iterations=" + std::to_string(iterations));
    sets.insert(sets.end(), overrides.begin(), overrides.end());
    AppConfig config = load_app_config(config_path.empty() ? std::nullopt : std::optional<fs::path>(config_path), sets);
    std::optional<Ablation> variant;
    if (!ablation.empty()) {
      variant = parse_ablation(ablation);
      config.network = NetworkConfig::for_ablation(*variant, config.network);
    }

    if (cmd == train) {
      cmd_train(config, out_dir, err);
    } else if (cmd == infer) {
      InferRequest request{checkpoint, {}, variant, image_size, save_iterations, overlay_images};
      for (const auto& i : images) request.images.emplace_back(i);
      cmd_infer(config, request, out_dir, err);
    } else if (cmd == eval) {
      if (!mask_store.empty()) {
        if (export_id.empty()) throw ConfigError("--mask-store needs --export-mask");
        err << "wrote " << export_stored_mask(mask_store, export_id, out_dir).string() << '\n';
      } else {
        if (checkpoint.empty()) throw ConfigError("eval needs --checkpoint");
        cmd_eval(config, checkpoint, variant, out_dir, err);
      }
    } else if (cmd == ablate) {
      cmd_ablate(config, out_dir, err);
    } else if (cmd == synth) {
      cmd_synth_gen(config, out_dir, err);
    }
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const ManifestError& e) {
    err << "dataset error: " << e.what() << '\n';
    return kConfigError;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::invalid_argument& e) {
    err << "invalid input: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntimeError;
  }
  return kSuccess;
}

}  // namespace fanet::cli
