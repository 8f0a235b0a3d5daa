#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace lau {

/// A scalar function of a flat parameter vector with its analytic gradient.
struct GradSubject {
  std::string name;
  std::function<double(const Eigen::VectorXd&)> value;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> gradient;
  /// Optional: distance from the nearest non-differentiable point. Points
  /// closer than the margin are skipped.
  std::function<double(const Eigen::VectorXd&)> kink_distance;
};

struct GradcheckReport {
  std::string subject;
  int cases = 0;    // points checked
  int skipped = 0;  // points rejected by the kink margin
  long checked = 0; // coordinates compared
  double max_rel_err = 0.0;  // over resolvable components
  long roundoff_limited = 0; // components too small to resolve at step h
  long failures = 0;
};

/// |a - n| / max(1e-8, |a| + |n|).
double relative_error(double analytic, double numeric);

/// Worst-case rounding error of the central difference (f+ - f-) / 2h when
/// f is evaluated to a few ulps.
double roundoff_bound(double f_plus, double f_minus, double h);

/// Central differences (f(x + h) - f(x - h)) / 2h on every coordinate of every
/// point. Components large enough to resolve (|a| + |n| >= bound / tolerance)
/// must meet the relative tolerance; smaller ones must agree within the bound.
GradcheckReport gradcheck(const GradSubject& subject, const std::vector<Eigen::VectorXd>& points,
                          double h, double tolerance, double margin = 1e-3);

struct GradcheckSuiteOptions {
  std::uint64_t seed = 0;
  double h = 1e-6;
  int cases = 100;           // random configurations for the operator subjects
  int network_cases = 2;     // points for the end-to-end subjects
};

struct SuiteEntry {
  GradcheckReport report;
  double tolerance = 0.0;
};

/// Operator and end-to-end checks: lau_backward, bilinear backward,
/// conv2d_backward (1x1 and 3x3), leaky_relu, cross entropy, the two
/// location-aware losses and the whole toy network.
std::vector<SuiteEntry> run_gradcheck_suite(const GradcheckSuiteOptions& options);

}  // namespace lau
