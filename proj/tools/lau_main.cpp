#include <cstdint>
#include <exception>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lau/commands.hpp"
#include "lau/error.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Location-aware upsampling toolkit"};
  app.require_subcommand(1);

  lau::GradcheckCommand gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference checks of every backward pass");
  gradcheck->set_help_flag("--help", "print this help message and exit");
  gradcheck->add_option("--seed", gc.seed, "random seed");
  gradcheck->add_option("--h", gc.h, "central-difference step");
  gradcheck->add_option("--cases", gc.cases, "random cases per subject")->check(CLI::PositiveNumber);
  gradcheck->add_option("--out", gc.out, "CSV report path");

  lau::DemoCommand dm;
  std::string demo_in, demo_off, demo_tensor;
  auto* demo = app.add_subcommand("demo", "upsample one score tensor and write argmax PPMs");
  demo->add_option("--upsampler", dm.upsampler, "bilinear | lau | pixelshuffle | corner-ff|cf|fc|cc");
  demo->add_option("--ratio", dm.ratio, "upsampling ratio k")->check(CLI::PositiveNumber);
  demo->add_option("--in", demo_in, "input tensor dump (default: synthetic sample)");
  demo->add_option("--offsets", demo_off, "interleaved offset tensor dump for lau");
  demo->add_option("--tensor-out", demo_tensor, "also dump the upsampled tensor");
  demo->add_option("--out", dm.out, "output PPM path");
  demo->add_option("--seed", dm.seed, "seed of the synthetic sample");

  std::string train_config;
  std::string train_out = "run";
  auto* train = app.add_subcommand("train", "train one configuration");
  train->add_option("--config", train_config, "JSON config")->required();
  train->add_option("--out", train_out, "output directory");

  lau::SweepCommand sw;
  std::string sweep_config;
  auto* sweep = app.add_subcommand("sweep", "train over a grid of lambda or ratio values");
  sweep->add_option("--param", sw.param, "lambda | ratio")->required();
  sweep->add_option("--values", sw.values, "values to sweep")->required()->delimiter(',');
  sweep->add_option("--seeds", sw.seeds, "seeds (default: config seed)")->delimiter(',');
  sweep->add_option("--config", sweep_config, "base JSON config");
  sweep->add_option("--out", sw.out, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gradcheck) return lau::cmd_gradcheck(gc, std::cout);
    if (*demo) {
      if (!demo_in.empty()) dm.input = demo_in;
      if (!demo_off.empty()) dm.offsets = demo_off;
      if (!demo_tensor.empty()) dm.tensor_out = demo_tensor;
      return lau::cmd_demo(dm, std::cout);
    }
    if (*train) return lau::cmd_train(train_config, train_out, std::cout);
    if (*sweep) {
      if (!sweep_config.empty()) sw.config = sweep_config;
      return lau::cmd_sweep(sw, std::cout);
    }
  } catch (const lau::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
