// Acceptance run: one PASS/FAIL line per criterion, exit code 0 iff all pass.
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "lau/commands.hpp"
#include "lau/gradcheck.hpp"
#include "lau/losses.hpp"
#include "lau/optim.hpp"
#include "lau/rng.hpp"
#include "lau/samplers.hpp"
#include "lau/synth.hpp"
#include "lau/train.hpp"

namespace fs = std::filesystem;
using namespace lau;

namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool ok = true;
  std::string detail;
};

int failures = 0;

void report(int id, const std::string& title, double limit_s, const std::function<Outcome()>& body) {
  const auto t0 = Clock::now();
  Outcome out;
  try {
    out = body();
  } catch (const std::exception& e) {
    out = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  if (limit_s > 0 && secs > limit_s) {
    out.ok = false;
    out.detail += " (over time limit)";
  }
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.2fs", secs);
  std::printf("criterion %2d %s: %s [%s] %s\n", id, out.ok ? "PASS" : "FAIL", title.c_str(), buf,
              out.detail.c_str());
  std::fflush(stdout);
  if (!out.ok) ++failures;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

Tensor4 random_tensor(const Shape4& s, Rng& rng) {
  Tensor4 t(s);
  for (std::size_t i = 0; i < t.size(); ++i) t.raw()[i] = rng.uniform(-1.0, 1.0);
  return t;
}

Outcome degeneration() {
  Rng rng(101);
  const int ks[4] = {1, 2, 4, 8};
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 4), rng.uniform_int(1, 7),
                   rng.uniform_int(1, 7)};
    const int k = ks[i % 4];
    const int m = rng.uniform() < 0.5 ? 1 : s.c;
    const Tensor4 u = random_tensor(s, rng);
    const OffsetField zero(s.n, m, s.h * k, s.w * k);
    const Eigen::VectorXd d = lau_forward(u, zero, k).data() - bilinear_upsample(u, k).data();
    worst = std::max(worst, d.cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, "max abs diff " + num(worst)};
}

Outcome lau_gradients() {
  GradcheckSuiteOptions opt;
  opt.seed = 2;
  opt.h = 1e-6;
  opt.cases = 100;
  opt.network_cases = 0;
  for (const SuiteEntry& e : run_gradcheck_suite(opt)) {
    if (e.report.subject != "lau_backward") continue;
    const bool ok = e.report.cases >= 100 && e.report.failures == 0 && e.report.max_rel_err <= 1e-5;
    return {ok, std::to_string(e.report.cases) + " configs, max rel err " + num(e.report.max_rel_err) +
                    ", " + std::to_string(e.report.roundoff_limited) + " roundoff-limited of " +
                    std::to_string(e.report.checked)};
  }
  return {false, "lau_backward missing from suite"};
}

Outcome pixel_shuffle_check() {
  Rng rng(103);
  long shapes = 0;
  for (int k = 1; k <= 3; ++k) {
    for (int n = 1; n <= 2; ++n) {
      for (int c = k * k; c <= 18; c += k * k) {
        for (int h = 1; h <= 3; ++h) {
          for (int w = 1; w <= 3; ++w) {
            const Tensor4 u = random_tensor({n, c, h, w}, rng);
            const Tensor4 v = pixel_shuffle(u, k);
            if (pixel_unshuffle(v, k).data() != u.data()) return {false, "round trip mismatch"};
            if (v.shape() != Shape4{n, c / (k * k), h * k, w * k}) return {false, "bad shape"};
            for (int b = 0; b < n; ++b)
              for (int g = 0; g < c / (k * k); ++g)
                for (int y = 0; y < h * k; ++y)
                  for (int x = 0; x < w * k; ++x) {
                    double acc = 0.0;
                    for (int ci = 0; ci < c; ++ci)
                      for (int j = 0; j < h; ++j)
                        for (int i = 0; i < w; ++i) {
                          const bool hit = ci == g * k * k + k * (y % k) + (x % k) && j == y / k &&
                                           i == x / k;
                          acc += hit ? u(b, ci, j, i) : 0.0;
                        }
                    if (acc != v(b, g, y, x)) return {false, "kernel oracle mismatch"};
                  }
            ++shapes;
          }
        }
      }
    }
  }
  return {true, std::to_string(shapes) + " shapes exact"};
}

Outcome corner_check() {
  Rng rng(104);
  int clipped = 0;
  for (int t = 0; t < 50; ++t) {
    const Shape4 s{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(1, 5),
                   rng.uniform_int(1, 5)};
    const int k = rng.uniform_int(2, 4);
    const Corner corner = kCandidateCorners[static_cast<std::size_t>(t % 4)];
    const Tensor4 u = random_tensor(s, rng);
    const Tensor4 v = corner_upsample(u, k, corner);
    auto pick = [k](int out, Rounding r) { return r == Rounding::kFloor ? out / k : (out + k - 1) / k; };
    for (int b = 0; b < s.n; ++b)
      for (int c = 0; c < s.c; ++c)
        for (int y = 0; y < s.h * k; ++y)
          for (int x = 0; x < s.w * k; ++x) {
            const int sx = std::min(pick(x, corner.x), s.w - 1);
            const int sy = std::min(pick(y, corner.y), s.h - 1);
            if (sx != pick(x, corner.x) || sy != pick(y, corner.y)) ++clipped;
            double acc = 0.0;
            for (int j = 0; j < s.h; ++j)
              for (int i = 0; i < s.w; ++i) acc += (i == sx && j == sy) ? u(b, c, j, i) : 0.0;
            if (acc != v(b, c, y, x)) return {false, "indicator oracle mismatch"};
          }
  }
  return {clipped > 0, "50 instances exact, " + std::to_string(clipped) + " clipped samples"};
}

double huber(double d) { return std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5; }

Outcome losses_check() {
  Rng rng(105);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    CandidateSet cs;
    const int n = rng.uniform_int(1, 2), h = rng.uniform_int(1, 4), w = rng.uniform_int(1, 4);
    for (int i = 0; i < kNumCandidates; ++i) {
      cs.losses[static_cast<std::size_t>(i)] = LossMap(n, h, w);
      cs.coords[static_cast<std::size_t>(i)] = CoordinateMap(n, h, w);
      for (Eigen::Index p = 0; p < cs.losses[0].size(); ++p) {
        cs.losses[static_cast<std::size_t>(i)].values[p] =
            t % 2 ? rng.uniform_int(0, 3) * 0.5 : rng.uniform(0.0, 3.0);
        cs.coords[static_cast<std::size_t>(i)].px[p] = rng.uniform(-0.5, 5.0);
        cs.coords[static_cast<std::size_t>(i)].py[p] = rng.uniform(-0.5, 5.0);
      }
    }
    const double lambda = rng.uniform(0.0, 1.0), gamma = rng.uniform(0.0, 1.0);
    const LossMap off = offset_guided_loss(cs.losses[0], cs.losses[1], lambda);
    const LossMap reg = regression_loss(cs, gamma, lambda);
    for (Eigen::Index p = 0; p < off.size(); ++p) {
      const double l = cs.losses[0].values[p];
      const double want_off = l < cs.losses[1].values[p] ? l : (1.0 + lambda) * l;
      worst = std::max(worst, std::abs(off.values[p] - want_off));
      std::size_t best = 0;
      bool own = true;
      for (std::size_t i = 1; i < kNumCandidates; ++i) {
        if (cs.losses[i].values[p] < cs.losses[best].values[p]) best = i;
        own = own && l <= cs.losses[i].values[p];
      }
      const double want_reg =
          gamma * (huber(cs.coords[best].px[p] - cs.coords[0].px[p]) +
                   huber(cs.coords[best].py[p] - cs.coords[0].py[p])) +
          (own ? 1.0 : 1.0 + lambda) * l;
      worst = std::max(worst, std::abs(reg.values[p] - want_reg));
    }
  }
  // Constructed ties: for every subset of tied minima, the first index wins.
  for (int mask = 1; mask < (1 << kNumCandidates); ++mask) {
    CandidateSet cs;
    for (int i = 0; i < kNumCandidates; ++i) {
      cs.losses[static_cast<std::size_t>(i)] = LossMap(1, 1, 1, (mask >> i) & 1 ? 0.25 : 0.75);
      cs.coords[static_cast<std::size_t>(i)] = CoordinateMap(1, 1, 1);
      cs.coords[static_cast<std::size_t>(i)].px[0] = i;
      cs.coords[static_cast<std::size_t>(i)].py[0] = -i;
    }
    int first = 0;
    while (!((mask >> first) & 1)) ++first;
    if (select_candidate(cs)[0] != first || select_theta_opt(cs).px[0] != first) {
      return {false, "tie order broken for mask " + std::to_string(mask)};
    }
  }
  return {worst <= 1e-12, "max abs diff " + num(worst) + ", 31 tie patterns ok"};
}

Outcome network_gradients() {
  GradcheckSuiteOptions opt;
  opt.seed = 6;
  opt.h = 1e-6;
  opt.cases = 1;
  opt.network_cases = 1;
  std::string detail;
  bool ok = true;
  int subjects = 0;
  for (const SuiteEntry& e : run_gradcheck_suite(opt)) {
    if (e.report.subject.rfind("network_", 0) != 0) continue;
    ++subjects;
    ok = ok && e.report.cases > 0 && e.report.failures == 0 && e.report.max_rel_err <= 1e-4;
    detail += e.report.subject + " " + num(e.report.max_rel_err) + " over " +
              std::to_string(e.report.checked) + " params; ";
  }
  return {ok && subjects == 3, detail};
}

fs::path work_dir() {
  const fs::path dir = fs::path(LAU_TEST_TMP) / "acceptance";
  fs::create_directories(dir);
  return dir;
}

Outcome training_direction() {
  double lau_sum = 0.0, bil_sum = 0.0, slowest = 0.0;
  std::string detail;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    for (bool lau_run : {true, false}) {
      TrainConfig cfg;
      cfg.seed = seed;
      if (!lau_run) {
        cfg.upsampler = UpsamplerKind::kBilinear;
        cfg.loss = LossKind::kCe;
      }
      const auto t0 = Clock::now();
      const TrainResult r = train(cfg);
      slowest = std::max(slowest, std::chrono::duration<double>(Clock::now() - t0).count());
      const double m = r.history.back().miou;
      (lau_run ? lau_sum : bil_sum) += m;
      detail += (lau_run ? "s" + std::to_string(seed) + " lau " : " bil ") + num(m) + (lau_run ? "" : "; ");
    }
  }
  const bool ok = lau_sum >= bil_sum && slowest <= 300.0;
  return {ok, "mean lau " + num(lau_sum / 5) + " vs bilinear " + num(bil_sum / 5) + ", slowest run " +
                  num(slowest) + "s; " + detail};
}

Outcome sweep_plumbing() {
  const fs::path out = work_dir() / "sweep";
  fs::remove_all(out);
  SweepCommand cmd;
  cmd.param = "lambda";
  cmd.values = {"0", "0.1", "0.2", "0.3", "0.4"};
  cmd.seeds = {0};
  cmd.out = out;
  std::ostringstream log;
  const int code = cmd_sweep(cmd, log);
  std::ifstream is(out / "sweep.csv");
  std::vector<std::string> rows;
  for (std::string line; std::getline(is, line);) rows.push_back(line);
  const std::vector<std::string> want = {"0", "0.1", "0.2", "0.3", "0.4"};
  bool ok = code == 0 && rows.size() == 6 && rows[0] == kSweepHeader;
  for (std::size_t i = 0; ok && i < want.size(); ++i) {
    ok = rows[i + 1].rfind("lambda," + want[i] + ",0,", 0) == 0;
  }
  return {ok, std::to_string(rows.empty() ? 0 : rows.size() - 1) + " rows for seed 0"};
}

Outcome poly_check() {
  const long total = 1000;
  const double mid = poly_lr(0.001, total / 2, total, 0.9);
  const bool ok = std::abs(mid - 5.3589e-4) <= 1e-8 && poly_lr(0.001, 0, total, 0.9) == 0.001 &&
                  poly_lr(0.001, total, total, 0.9) == 0.0;
  return {ok, "mid " + num(mid)};
}

Outcome speckle_check() {
  const double constant = speckle_rate(LabelMap(1, 7, 9, 3, 2));
  LabelMap board(1, 8, 8, 2);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) board(0, y, x) = (x + y) % 2;
  LabelMap planted(1, 5, 5, 2, 0);
  planted(0, 2, 2) = 1;
  const double p = speckle_rate(planted);
  const bool ok = constant == 0.0 && speckle_rate(board) == 1.0 && std::abs(p - 1.0 / 9.0) < 1e-15;
  return {ok, "constant " + num(constant) + ", checkerboard " + num(speckle_rate(board)) +
                  ", planted " + num(p)};
}

}  // namespace

int main() {
  report(1, "zero offsets reproduce bilinear", 5, degeneration);
  report(2, "lau_backward matches central differences", 30, lau_gradients);
  report(3, "pixel shuffle round trip and delta-kernel oracle", 5, pixel_shuffle_check);
  report(4, "corner samplers match indicator oracle", 5, corner_check);
  report(5, "location-aware losses match brute force", 10, losses_check);
  report(6, "end-to-end network gradcheck", 60, network_gradients);
  report(7, "LaU_off mean val mIoU >= bilinear over 5 seeds", 0, training_direction);
  report(8, "lambda sweep emits 5 rows per seed", 0, sweep_plumbing);
  report(9, "poly schedule", 0, poly_check);
  report(10, "speckle detector fixtures", 0, speckle_check);
  std::printf("%d of 10 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
