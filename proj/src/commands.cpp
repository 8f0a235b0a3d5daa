#include "lau/commands.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>

#include "lau/config.hpp"
#include "lau/gradcheck.hpp"
#include "lau/io.hpp"
#include "lau/samplers.hpp"

namespace lau {

namespace {

std::string fmt(double v, int digits = 8) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

std::ofstream open_text(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path.string() + " for writing");
  return os;
}

std::string metrics_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + m.split + "," + fmt(m.loss) + "," + fmt(m.pixacc) + "," +
         fmt(m.miou) + "," + fmt(m.speckle);
}

const EpochMetrics& final_val(const std::vector<EpochMetrics>& history) {
  for (auto it = history.rbegin(); it != history.rend(); ++it) {
    if (it->split == "val") return *it;
  }
  throw ConfigError("training produced no validation metrics");
}

}  // namespace

int cmd_gradcheck(const GradcheckCommand& cmd, std::ostream& log) {
  GradcheckSuiteOptions opt;
  opt.seed = cmd.seed;
  opt.h = cmd.h;
  opt.cases = cmd.cases;
  const auto entries = run_gradcheck_suite(opt);
  auto os = open_text(cmd.out);
  os << kGradcheckHeader << "\n";
  long failures = 0;
  for (const auto& e : entries) {
    os << e.report.subject << "," << e.report.cases << "," << fmt_g(e.report.max_rel_err) << ","
       << e.report.failures << "\n";
    log << e.report.subject << ": cases=" << e.report.cases << " max_rel_err="
        << fmt_g(e.report.max_rel_err) << " (tol " << fmt_g(e.tolerance)
        << ") roundoff_limited=" << e.report.roundoff_limited << " failures=" << e.report.failures
        << "\n";
    failures += e.report.failures;
  }
  if (!os) throw IoError("failed writing " + cmd.out.string());
  return failures == 0 ? 0 : 1;
}

int cmd_demo(const DemoCommand& cmd, std::ostream& log) {
  Tensor4 input;
  if (cmd.input) {
    input = load_tensor(*cmd.input);
  } else {
    input = gen_sample(SynthParams{cmd.seed}, 0).features;
  }
  const int k = cmd.ratio;
  if (k < 1) throw ConfigError("ratio: must be >= 1");
  Tensor4 output;
  if (cmd.upsampler == "bilinear") {
    output = bilinear_upsample(input, k);
  } else if (cmd.upsampler == "lau") {
    OffsetField off(input.n(), 1, input.h() * k, input.w() * k);
    if (cmd.offsets) off = OffsetField::from_interleaved(load_tensor(*cmd.offsets));
    output = lau_forward(input, off, k);
  } else if (cmd.upsampler == "pixelshuffle") {
    output = pixel_shuffle(input, k);
  } else if (cmd.upsampler.rfind("corner-", 0) == 0) {
    output = corner_upsample(input, k, parse_corner(cmd.upsampler.substr(7)));
  } else {
    throw ConfigError("upsampler: expected bilinear, lau, pixelshuffle or corner-XX");
  }
  std::filesystem::path before = cmd.out;
  before.replace_filename(cmd.out.stem().string() + "_input.ppm");
  if (cmd.out.has_parent_path()) std::filesystem::create_directories(cmd.out.parent_path());
  save_ppm(before, argmax_labels(input));
  save_ppm(cmd.out, argmax_labels(output));
  if (cmd.tensor_out) save_tensor(*cmd.tensor_out, output);
  log << cmd.upsampler << " x" << k << ": " << to_string(input.shape()) << " -> "
      << to_string(output.shape()) << "\n";
  return 0;
}

TrainResult run_training(const TrainConfig& config, const std::filesystem::path& out_dir) {
  config.validate();
  std::filesystem::create_directories(out_dir);
  {
    auto os = open_text(out_dir / "config.json");
    os << to_json(config).dump(2) << "\n";
  }
  auto metrics = open_text(out_dir / "metrics.csv");
  metrics << kMetricsHeader << "\n";
  const SynthParams params = config.synth();
  const auto train_set = gen_dataset(params, config.train_count, 0);
  const auto val_set =
      gen_dataset(params, config.val_count, static_cast<std::uint64_t>(config.train_count));
  TrainResult result = train(config, train_set, val_set, [&](const EpochMetrics& m) {
    metrics << metrics_row(m) << "\n";
    metrics.flush();
  });
  save_checkpoint(out_dir / "checkpoint.bin", result.net);
  const EvalResult eval = evaluate(result.net, config.pipeline(), val_set, config.batch);
  const int shown = std::min(4, config.val_count);
  for (int i = 0; i < shown; ++i) {
    char name[48];
    std::snprintf(name, sizeof(name), "val_pred_%03d.ppm", i);
    save_ppm(out_dir / name, eval.predictions, i);
    std::snprintf(name, sizeof(name), "val_gt_%03d.ppm", i);
    save_ppm(out_dir / name, val_set[static_cast<std::size_t>(i)].labels, 0);
  }
  return result;
}

int cmd_train(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
              std::ostream& log) {
  const TrainConfig config = load_config(config_path);
  const TrainResult result = run_training(config, out_dir);
  const EpochMetrics& last = final_val(result.history);
  log << "final val: miou=" << fmt(last.miou, 4) << " pixacc=" << fmt(last.pixacc, 4)
      << " speckle=" << fmt(last.speckle, 4) << "\n";
  return 0;
}

int cmd_sweep(const SweepCommand& cmd, std::ostream& log) {
  if (cmd.param != "lambda" && cmd.param != "ratio") {
    throw ConfigError("param: expected lambda or ratio, got '" + cmd.param + "'");
  }
  if (cmd.values.empty()) throw ConfigError("values: at least one value required");
  const TrainConfig base = cmd.config ? load_config(*cmd.config) : TrainConfig{};
  const std::vector<std::uint64_t> seeds =
      cmd.seeds.empty() ? std::vector<std::uint64_t>{base.seed} : cmd.seeds;

  struct Row {
    double value;
    std::uint64_t seed;
    std::string line;
  };
  std::vector<Row> rows;
  std::vector<Row> errors;
  for (const auto& token : cmd.values) {
    double value = 0.0;
    std::string shown;
    try {
      std::size_t used = 0;
      value = std::stod(token, &used);
      if (used != token.size()) throw std::invalid_argument(token);
    } catch (const std::exception&) {
      for (auto seed : seeds) {
        errors.push_back({0.0, seed, cmd.param + "," + token + "," + std::to_string(seed) +
                                         ",not a number"});
      }
      continue;
    }
    for (auto seed : seeds) {
      TrainConfig cfg = base;
      cfg.seed = seed;
      try {
        if (cmd.param == "lambda") {
          cfg.lambda = value;
          shown = fmt_g(value);
        } else {
          if (value != std::floor(value)) throw ConfigError("lau_ratio: must be an integer");
          cfg.lau_ratio = static_cast<int>(value);
          shown = std::to_string(cfg.lau_ratio);
        }
        cfg.validate();
        const auto dir = cmd.out / "runs" / (cmd.param + "_" + shown + "_seed" + std::to_string(seed));
        const TrainResult result = run_training(cfg, dir);
        const EpochMetrics& last = final_val(result.history);
        rows.push_back({value, seed,
                        cmd.param + "," + shown + "," + std::to_string(seed) + "," +
                            fmt(last.miou) + "," + fmt(last.pixacc)});
        log << cmd.param << "=" << shown << " seed=" << seed << ": miou=" << fmt(last.miou, 4)
            << "\n";
      } catch (const std::exception& e) {
        if (shown.empty()) shown = token;
        errors.push_back({value, seed, cmd.param + "," + shown + "," + std::to_string(seed) + "," +
                                           std::string(e.what())});
        log << cmd.param << "=" << shown << " seed=" << seed << ": error: " << e.what() << "\n";
      }
    }
  }
  auto by_key = [](const Row& a, const Row& b) {
    return a.value != b.value ? a.value < b.value : a.seed < b.seed;
  };
  std::stable_sort(rows.begin(), rows.end(), by_key);
  std::stable_sort(errors.begin(), errors.end(), by_key);
  auto os = open_text(cmd.out / "sweep.csv");
  os << kSweepHeader << "\n";
  for (const auto& r : rows) os << r.line << "\n";
  auto es = open_text(cmd.out / "sweep_errors.csv");
  es << "param,value,seed,error\n";
  for (const auto& r : errors) {
    std::string line = r.line;
    std::replace(line.begin() + static_cast<std::ptrdiff_t>(std::min(line.size(), cmd.param.size() + 1)),
                 line.end(), '\n', ' ');
    es << line << "\n";
  }
  return errors.empty() ? 0 : 1;
}

}  // namespace lau
