// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any fails. `--only 1,4,7` runs a subset.

#include "fanet/checkpoint.hpp"
#include "fanet/cli.hpp"
#include "fanet/inference.hpp"
#include "fanet/loss.hpp"
#include "fanet/mask.hpp"
#include "fanet/metrics.hpp"
#include "fanet/otsu.hpp"
#include "fanet/training.hpp"
#include "support/gradcheck.hpp"
#include "support/oracles.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

using namespace fanet;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) { return std::chrono::duration<double>(Clock::now() - start).count(); }

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, double a, double b = 0, double c = 0, double d = 0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, format, a, b, c, d);
  return buf;
}

// ------------------------------------------------------------------ 1

Outcome rle_round_trip() {
  const auto start = Clock::now();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  const Index sizes[] = {16, 64, 512};
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const Index n = sizes[i % 3];
    BinaryMask m(n, n);
    switch (i % 4) {
      case 0:  // i.i.d. pixels, any density including empty and full
        m = oracle::random_mask(n, n, rng, i % 40 == 0 ? 0.0 : i % 40 == 4 ? 1.0 : density(rng));
        break;
      case 1: {  // rectangles, long runs
        std::uniform_int_distribution<Index> pos(0, n - 1);
        for (int r = 0; r < 5; ++r) {
          const Index y0 = pos(rng), x0 = pos(rng), y1 = pos(rng), x1 = pos(rng);
          for (Index y = std::min(y0, y1); y <= std::max(y0, y1); ++y)
            for (Index x = std::min(x0, x1); x <= std::max(x0, x1); ++x) m.set(y, x, true);
        }
        break;
      }
      case 2:
        m = oracle::random_mask(n, n, rng, 0.02);
        break;
      default:
        m = oracle::random_mask(n, n, rng, 0.98);
        break;
    }
    const RleMask rle = rle_encode(m);
    if (rle_decode(rle) != m) ++failures;
  }
  const double secs = seconds_since(start);
  return {failures == 0 && secs < 10.0,
          fmt("1000 masks, %.0f mismatches, %.2f s (limit 10 s)", failures, secs)};
}

// ------------------------------------------------------------------ 2

Outcome otsu_oracle() {
  const auto start = Clock::now();
  std::mt19937_64 rng(202);
  int failures = 0, images = 0;
  auto check = [&](const Eigen::ArrayXXd& image) {
    ++images;
    const int k = oracle::exhaustive_otsu(image);
    const OtsuResult r = otsu_threshold(image);
    const double expected = k < 0 ? image.maxCoeff() : k + 0.5;
    bool ok = r.threshold == expected;
    for (Index y = 0; y < image.rows(); ++y)
      for (Index x = 0; x < image.cols(); ++x) ok = ok && r.mask(y, x) == (image(y, x) > r.threshold ? 1 : 0);
    if (!ok) ++failures;
  };
  std::uniform_int_distribution<int> dim(8, 96);
  for (int i = 0; i < 100; ++i) {
    const Index h = dim(rng), w = dim(rng);
    Eigen::ArrayXXd image(h, w);
    // Alternate uniform noise with narrow-range and bimodal images.
    const int lo = i % 3 == 1 ? 100 : 0, hi = i % 3 == 1 ? 108 : 255;
    std::uniform_int_distribution<int> value(lo, hi), dark(0, 60), bright(180, 255);
    std::bernoulli_distribution coin(0.3);
    for (Index p = 0; p < image.size(); ++p) image(p) = i % 3 == 2 ? (coin(rng) ? bright(rng) : dark(rng)) : value(rng);
    check(image);
  }
  // Tie: every boundary between two levels separates them equally; the smallest wins.
  Eigen::ArrayXXd two(4, 4);
  two << 0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255, 0, 255;
  check(two);
  const bool tie_ok = otsu_threshold(two).threshold == 0.5;
  const double secs = seconds_since(start);
  return {failures == 0 && tie_ok && secs < 30.0,
          fmt("%.0f images, %.0f mismatches, tie -> %.1f, %.2f s (limit 30 s)", images, failures,
              otsu_threshold(two).threshold, secs)};
}

// ------------------------------------------------------------------ 3

Outcome mixpool_identities() {
  const auto start = Clock::now();
  std::mt19937_64 rng(303);
  bool ones_ok = true, zero_ok = true;
  double worst = 0;
  for (bool feature_branch : {true, false}) {
    nn::MixPoolBlock<double> mix("m", 5, feature_branch, rng);
    mix.keep_intermediates = true;
    oracle::randomize_bn(mix.attention_conv.bn, rng);
    oracle::randomize_bn(mix.attended_branch.bn, rng);
    if (feature_branch) oracle::randomize_bn(mix.feature_branch->bn, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const Tensor4<double> f = oracle::random_tensor<double>({2, 5, 8, 8}, rng);
      mix.forward(f, std::vector<BinaryMask>(2, BinaryMask::ones(32, 32)), nn::Pass::inference());
      ones_ok = ones_ok && (mix.intermediates().attended.values() == f.values()).all();

      const std::vector<BinaryMask> prev{oracle::random_mask(32, 32, rng, 0.04), oracle::random_mask(32, 32, rng, 0.04)};
      const Tensor4<double> out = mix.forward(f, prev, nn::Pass::inference());
      const Tensor4<double> expected = oracle::mixpool_inference(mix, f, prev);
      if (out.shape() != expected.shape()) return {false, "random case: shape mismatch"};
      for (Index i = 0; i < out.size(); ++i)
        worst = std::max(worst, oracle::relative_error(out.data()[i], expected.data()[i], 1e-12));
    }
    // Empty union: no previous foreground and a generator that never fires.
    const auto saved = mix.attention_logit.bias.value;
    mix.attention_logit.weight.value.setZero();
    mix.attention_logit.bias.value.setConstant(-20.0);
    const Tensor4<double> f = oracle::random_tensor<double>({2, 5, 8, 8}, rng);
    mix.forward(f, std::vector<BinaryMask>(2, BinaryMask::zeros(32, 32)), nn::Pass::inference());
    zero_ok = zero_ok && mix.intermediates().attended.values().abs().maxCoeff() == 0.0;
    mix.attention_logit.bias.value = saved;
  }
  const double secs = seconds_since(start);
  return {ones_ok && zero_ok && worst <= 1e-6 && secs < 60.0,
          std::string("ones ") + (ones_ok ? "exact" : "DIFFER") + ", empty union " + (zero_ok ? "zero" : "NONZERO") +
              fmt(", random max rel err %.2e (limit 1e-6), %.2f s", worst, secs)};
}

// ------------------------------------------------------------------ 4

Outcome gradient_check() {
  const auto start = Clock::now();
  NetworkConfig config;
  config.base_widths = {4, 8, 16, 32};
  config.se_reduction = 4;
  std::mt19937_64 rng(404);
  FanetModel<double> model(config, 404);
  const Tensor4<double> image = oracle::random_tensor<double>({2, 3, 32, 32}, rng, 0.0, 1.0);
  const std::vector<BinaryMask> prev{oracle::random_mask(32, 32, rng, 0.3), oracle::random_mask(32, 32, rng, 0.3)};
  const Tensor4<double> target =
      masks_to_tensor<double>({oracle::random_mask(32, 32, rng, 0.3), oracle::random_mask(32, 32, rng, 0.3)});
  const auto report = oracle::gradcheck_model(model, image, prev, target, 200, 405);
  std::set<std::string> tensors;
  for (const auto& e : report.entries) tensors.insert(e.name);
  const double secs = seconds_since(start);
  return {report.max_rel_error <= 1e-3 && report.entries.size() >= 200 && secs < 300.0,
          fmt("%.0f parameters from %.0f tensors, max rel err %.2e (limit 1e-3), %.1f s", report.entries.size(),
              tensors.size(), report.max_rel_error, secs) +
              fmt(", %.0f draws redrawn at a hard gate", report.resampled)};
}

// ------------------------------------------------------------------ 5

Outcome metric_oracle() {
  std::mt19937_64 rng(505);
  std::uniform_int_distribution<Index> dim(1, 40);
  std::uniform_real_distribution<double> density(0.0, 1.0);
  int failures = 0;
  for (int i = 0; i < 1000; ++i) {
    const Index h = dim(rng), w = dim(rng);
    const double dp = i % 50 == 0 ? 0.0 : density(rng), dt = i % 70 == 0 ? 0.0 : density(rng);
    const BinaryMask p = oracle::random_mask(h, w, rng, dp), t = oracle::random_mask(h, w, rng, dt);
    const MetricSuite a = metric_suite(confusion(p, t)), b = oracle::naive_metrics(p, t);
    if (!(a.f1 == b.f1 && a.iou == b.iou && a.precision == b.precision && a.recall == b.recall &&
          a.specificity == b.specificity && a.accuracy == b.accuracy && a.f2 == b.f2))
      ++failures;
  }
  const BinaryMask target = oracle::random_mask(8, 8, rng);
  const MetricSuite perfect = metric_suite(confusion(target, target));
  bool hand = perfect.f1 == 1 && perfect.iou == 1 && perfect.precision == 1 && perfect.recall == 1 &&
              perfect.specificity == 1 && perfect.accuracy == 1 && perfect.f2 == 1;
  BinaryMask half(4, 4);
  for (Index x = 0; x < 4; ++x) half.set(0, x, true), half.set(1, x, true);
  const MetricSuite h = metric_suite(confusion(BinaryMask::ones(4, 4), half));
  hand = hand && h.precision == 0.5 && h.recall == 1.0 && std::abs(h.f1 - 2.0 / 3.0) < 1e-15;
  return {failures == 0 && hand, fmt("1000 pairs, %.0f mismatches; ", failures) +
                                     (hand ? "hand cases pass" : "hand cases FAIL") +
                                     fmt(" (half coverage: P %.4f R %.4f F1 %.4f)", h.precision, h.recall, h.f1)};
}

// ------------------------------------------------------------------ 6

Outcome feedback_contract() {
  SyntheticSpec spec;
  spec.count = 20;
  spec.size = 32;
  spec.seed = 606;
  std::vector<Sample> data;
  for (auto& s : generate_synthetic_samples(spec)) data.push_back(std::move(s.sample));
  NetworkConfig net;
  net.base_widths = {8, 16, 32, 64};
  net.se_reduction = 4;
  TrainConfig train;
  train.epochs = 3;
  train.batch_size = 4;
  train.learning_rate = 1e-3;
  train.seed = 606;
  TrainState state(train, net);

  std::map<std::pair<int, std::string>, BinaryMask> produced;
  int checked = 0, mismatches = 0, otsu_ok = 0;
  TrainHooks hooks;
  hooks.on_consume = [&](int epoch, const std::string& id, const BinaryMask& consumed) {
    if (epoch == 0) {
      for (const auto& s : data)
        if (s.id == id && consumed == otsu_mask(s.image)) ++otsu_ok;
      return;
    }
    ++checked;
    const auto it = produced.find({epoch - 1, id});
    if (it == produced.end() || it->second != consumed) ++mismatches;
  };
  hooks.on_produce = [&](int epoch, const std::string& id, const BinaryMask& mask) { produced[{epoch, id}] = mask; };
  FitOptions options;
  options.hooks = hooks;
  fit(state, data, {}, options);
  const bool pass = checked == 40 && mismatches == 0 && otsu_ok == 20 && produced.size() == 60;
  return {pass, fmt("%.0f consumptions at epochs 1-2, %.0f mismatches; epoch 0 used the Otsu seed for %.0f/20", checked,
                    mismatches, otsu_ok)};
}

// ------------------------------------------------------------------ 7, 8

struct DeskRun {
  double b4_final = 0, b4_iter1 = 0, b4_iter5 = 0, b2_final = 0, b1_final = 0;
  std::vector<double> b4_losses;
};

struct DeskScale {
  std::vector<DeskRun> runs;
  double seconds = 0;
  std::optional<FanetModel<float>> b4_model;  // seed 0
  std::vector<Sample> test;
};

DeskScale& desk_scale() {
  static std::optional<DeskScale> cached;
  if (cached) return *cached;
  cached.emplace();
  DeskScale& d = *cached;
  const auto start = Clock::now();

  SyntheticSpec spec;
  spec.count = 250;
  spec.test_count = 50;
  spec.size = 64;
  spec.seed = 7;
  std::vector<Sample> train;
  for (auto& s : generate_synthetic_samples(spec)) (s.split == Split::test ? d.test : train).push_back(std::move(s.sample));

  NetworkConfig base;
  base.base_widths = {16, 32, 64, 128};
  std::vector<const Image*> images;
  std::vector<const BinaryMask*> truth;
  std::vector<BinaryMask> targets;
  for (const auto& s : d.test) {
    images.push_back(&s.image);
    truth.push_back(&s.mask);
    targets.push_back(s.mask);
  }
  auto evaluate = [&](FanetModel<float>& model) {
    InferenceOptions options;
    options.iterations = 10;
    std::vector<RefinementTrace> traces;
    for (std::size_t b = 0; b < images.size(); b += 10) {
      const std::vector<const Image*> im(images.begin() + b, images.begin() + b + 10);
      const std::vector<const BinaryMask*> gt(truth.begin() + b, truth.begin() + b + 10);
      for (auto& t : iterative_predict_batch(model, im, options, gt)) traces.push_back(std::move(t));
    }
    return iteration_reports(traces, targets);
  };

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    DeskRun run;
    TrainConfig tc;
    tc.epochs = 30;
    tc.batch_size = 8;
    tc.learning_rate = 1e-3;
    tc.seed = seed;
    for (Ablation variant : {Ablation::B4, Ablation::B1}) {
      TrainState state(tc, NetworkConfig::for_ablation(variant, base));
      const auto t0 = Clock::now();
      const FitResult fitted = fit(state, train, {});
      std::cerr << "  seed " << seed << " " << to_string(variant) << ": trained in " << fmt("%.0f s", seconds_since(t0))
                << std::flush;
      const auto reports = evaluate(state.model);
      std::cerr << fmt(", final F1 %.4f\n", reports.back().summary.f1) << std::flush;
      if (variant == Ablation::B1) {
        run.b1_final = reports.back().summary.f1;
        continue;
      }
      run.b4_final = reports.back().summary.f1;
      run.b4_iter1 = reports[0].summary.f1;
      run.b4_iter5 = reports[4].summary.f1;
      for (const auto& r : fitted.history) run.b4_losses.push_back(r.train_loss);
      FanetModel<float> b2(NetworkConfig::for_ablation(Ablation::B2, base));
      load_weights(b2, make_checkpoint(state.model));
      run.b2_final = evaluate(b2).back().summary.f1;
      if (seed == 0) d.b4_model.emplace(std::move(state.model));
    }
    d.runs.push_back(run);
  }
  d.seconds = seconds_since(start);
  return d;
}

Outcome desk_scale_end_to_end() {
  const DeskScale& d = desk_scale();
  double min_b4 = 1, mean_b4 = 0, mean_b1 = 0, mean_it1 = 0, mean_it5 = 0, mean_b2 = 0;
  for (const auto& r : d.runs) {
    min_b4 = std::min(min_b4, r.b4_final);
    mean_b4 += r.b4_final / 3;
    mean_b1 += r.b1_final / 3;
    mean_it1 += r.b4_iter1 / 3;
    mean_it5 += r.b4_iter5 / 3;
    mean_b2 += r.b2_final / 3;
  }
  bool falling = true;
  for (const auto& r : d.runs)
    for (int e = 1; e < 5; ++e) falling = falling && r.b4_losses[e] < r.b4_losses[e - 1];

  const bool a = min_b4 >= 0.90, b = mean_it5 >= mean_it1 - 0.01, c = mean_b4 >= mean_b1 - 0.02;
  const bool runtime = d.seconds <= 900.0;
  std::ostringstream detail;
  detail << "(a) " << (a ? "ok" : "FAIL") << fmt(" B4 F1 min %.4f over seeds (>= 0.90); ", min_b4) << "(b) "
         << (b ? "ok" : "FAIL") << fmt(" iter5 %.4f vs iter1 %.4f; ", mean_it5, mean_it1) << "(c) "
         << (c ? "ok" : "FAIL") << fmt(" B4 %.4f vs B1 %.4f; ", mean_b4, mean_b1) << "runtime "
         << (runtime ? "ok" : "FAIL") << fmt(" %.0f s (limit 900 s); ", d.seconds)
         << fmt("info: B2 %.4f, ", mean_b2) << "loss falls over epochs 1-5: " << (falling ? "yes" : "no");
  return {a && b && c && runtime, detail.str()};
}

Outcome fixed_point_absorption() {
  DeskScale& d = desk_scale();
  FanetModel<float>& model = *d.b4_model;
  InferenceOptions options;
  options.iterations = 10;
  int fixed = 0, violations = 0;
  for (const auto& s : d.test) {
    const auto trace = iterative_predict(model, s.image, options);
    if (!trace.converged_at) continue;
    ++fixed;
    const int t = *trace.converged_at;
    for (std::size_t u = t + 1; u < trace.size(); ++u)
      if (trace.masks[u] != trace.masks[t]) ++violations;
    // Feed the fixed point back in directly, several times over.
    const Tensor4<float> x = images_to_tensor({&s.image});
    BinaryMask feed = trace.masks[t];
    for (int k = 0; k < 5; ++k) {
      const Tensor4<float> p = model.forward(x, {feed}, nn::Pass::inference());
      const BinaryMask next = binarize(Eigen::Map<const Plane>(p.sample_data(0), p.height(), p.width()));
      if (next != trace.masks[t]) ++violations;
      feed = next;
    }
  }
  return {fixed > 0 && violations == 0,
          fmt("%.0f of %.0f test images reached a fixed point within 10 iterations, %.0f later iterations differed",
              fixed, d.test.size(), violations)};
}

// ------------------------------------------------------------------ 9

Outcome parameter_accounting() {
  const Index b1 = count_parameters(NetworkConfig::for_ablation(Ablation::B1));
  const Index b4 = count_parameters(NetworkConfig{});
  FanetModel<float> built(NetworkConfig{});
  const double published = 7.72e6;
  const double deviation = (static_cast<double>(b4) - published) / published;
  const bool pass = b1 < b4 && std::abs(deviation) <= 0.25 && built.parameter_count() == b4;
  return {pass, fmt("B1 %.0f < B4 %.0f; B4 vs 7.72M: %+.1f%% (limit +-25%%)", static_cast<double>(b1),
                    static_cast<double>(b4), 100 * deviation)};
}

// ------------------------------------------------------------------ 10

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

// The log minus its wall-clock column.
std::vector<std::string> log_without_time(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> rows;
  for (std::string line; std::getline(in, line);) rows.push_back(line.substr(0, line.rfind(',')));
  return rows;
}

Outcome training_determinism() {
  const fs::path root = fs::current_path() / "acceptance_determinism";
  fs::remove_all(root);
  const std::vector<std::string> common = {
      "--set", "network.base_widths=8,16,32,64", "--set", "network.se_reduction=4", "--set", "data.synthetic.count=40",
      "--set", "data.synthetic.size=32",         "--set", "train.epochs=4",         "--set", "train.batch_size=8",
      "--set", "train.learning_rate=0.001",      "--seed", "11"};
  std::ostringstream sink;
  for (const char* run : {"a", "b"}) {
    std::vector<std::string> args{"train", "--out", (root / run).string()};
    args.insert(args.end(), common.begin(), common.end());
    if (const int code = cli::run(args, sink, sink); code != 0) return {false, "train exited with " + std::to_string(code)};
  }
  const auto a = log_without_time(root / "a" / "train_log.csv"), b = log_without_time(root / "b" / "train_log.csv");
  const bool logs = a == b && a.size() == 5;
  const bool weights = slurp(root / "a" / "final.ckpt") == slurp(root / "b" / "final.ckpt");
  const bool stores = slurp(root / "a" / "masks.rle") == slurp(root / "b" / "masks.rle");
  fs::remove_all(root);
  return {logs, fmt("%.0f log rows ", a.size()) + (logs ? "identical" : "DIFFER") +
                    " (epoch, train_loss, val_loss, lr; epoch_time is wall clock); checkpoints " +
                    (weights ? "identical" : "differ") + ", mask stores " + (stores ? "identical" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) != "--only") continue;
    std::stringstream list(argv[i + 1]);
    for (std::string item; std::getline(list, item, ',');) only.insert(std::stoi(item));
  }
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"RLE round trip", rle_round_trip},
      {"Otsu matches exhaustive search", otsu_oracle},
      {"MixPool identities", mixpool_identities},
      {"network gradient check", gradient_check},
      {"metric oracle", metric_oracle},
      {"feedback contract", feedback_contract},
      {"desk-scale end-to-end", desk_scale_end_to_end},
      {"fixed-point absorption", fixed_point_absorption},
      {"parameter accounting", parameter_accounting},
      {"training determinism", training_determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << id << ". " << criteria[i].first << ": " << o.detail << std::endl;
  }
  std::cout << (failed ? std::to_string(failed) + " criteria failed" : "all criteria passed") << std::endl;
  return failed ? 1 : 0;
}
