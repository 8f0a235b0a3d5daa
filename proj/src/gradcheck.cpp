#include "lau/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "lau/losses.hpp"
#include "lau/network.hpp"
#include "lau/rng.hpp"
#include "lau/samplers.hpp"

namespace lau {

double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max(1e-8, std::abs(analytic) + std::abs(numeric));
}

double roundoff_bound(double f_plus, double f_minus, double h) {
  constexpr double kUlps = 4.0;
  return kUlps * std::numeric_limits<double>::epsilon() *
         (std::abs(f_plus) + std::abs(f_minus)) / (2.0 * h);
}

GradcheckReport gradcheck(const GradSubject& subject, const std::vector<Eigen::VectorXd>& points,
                          double h, double tolerance, double margin) {
  GradcheckReport report;
  report.subject = subject.name;
  for (const auto& point : points) {
    if (subject.kink_distance && subject.kink_distance(point) < margin) {
      ++report.skipped;
      continue;
    }
    ++report.cases;
    const Eigen::VectorXd analytic = subject.gradient(point);
    Eigen::VectorXd probe = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
      probe[i] = point[i] + h;
      const double up = subject.value(probe);
      probe[i] = point[i] - h;
      const double down = subject.value(probe);
      probe[i] = point[i];
      const double numeric = (up - down) / (2.0 * h);
      const double err = relative_error(analytic[i], numeric);
      ++report.checked;
      const double noise = roundoff_bound(up, down, h);
      if (analytic[i] != numeric &&
          std::abs(analytic[i]) + std::abs(numeric) < noise / tolerance) {
        // Too small for a relative comparison at this step.
        ++report.roundoff_limited;
        if (!(std::abs(analytic[i] - numeric) <= noise)) ++report.failures;
        continue;
      }
      // NaN compares false, so count it explicitly.
      if (!(err <= tolerance)) ++report.failures;
      if (std::isnan(err)) {
        report.max_rel_err = std::numeric_limits<double>::infinity();
      } else {
        report.max_rel_err = std::max(report.max_rel_err, err);
      }
    }
  }
  return report;
}

namespace {

// --- flat parameter helpers -------------------------------------------------

Eigen::VectorXd concat(std::initializer_list<const Eigen::VectorXd*> parts) {
  Eigen::Index total = 0;
  for (const auto* p : parts) total += p->size();
  Eigen::VectorXd out(total);
  Eigen::Index pos = 0;
  for (const auto* p : parts) {
    out.segment(pos, p->size()) = *p;
    pos += p->size();
  }
  return out;
}

Tensor4 slice_tensor(const Eigen::VectorXd& flat, Eigen::Index& pos, const Shape4& shape) {
  const auto count = static_cast<Eigen::Index>(shape.size());
  Tensor4 t(shape, flat.segment(pos, count));
  pos += count;
  return t;
}

Tensor4 random_tensor(const Shape4& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor4 t(shape);
  for (Eigen::Index i = 0; i < t.data().size(); ++i) t.data()[i] = rng.uniform(lo, hi);
  return t;
}

// Extended-precision sum of R .* V so that finite differences see only the
// perturbed terms.
double weighted_sum(const Tensor4& weights, const Tensor4& values) {
  long double acc = 0.0L;
  for (Eigen::Index i = 0; i < values.data().size(); ++i) {
    acc += static_cast<long double>(weights.data()[i]) * values.data()[i];
  }
  return static_cast<double>(acc);
}

double axis_margin(double p, int extent) {
  const double upper = extent - 1;
  if (p <= 0.0) return -p;
  if (p >= upper) return p - upper;
  const double frac = p - std::floor(p);
  return std::min(frac, 1.0 - frac);
}

double offset_margin(const Shape4& in, const OffsetField& off, int k) {
  double margin = std::numeric_limits<double>::infinity();
  for (int n = 0; n < off.n(); ++n) {
    for (int g = 0; g < off.groups(); ++g) {
      for (int y = 0; y < off.h(); ++y) {
        for (int x = 0; x < off.w(); ++x) {
          margin = std::min(margin, axis_margin(static_cast<double>(x) / k + off.dx(n, g, y, x), in.w));
          margin = std::min(margin, axis_margin(static_cast<double>(y) / k + off.dy(n, g, y, x), in.h));
        }
      }
    }
  }
  return margin;
}

// Random offsets in [-range, range], redrawn until every source coordinate
// keeps `keep_away` from the kernel kinks.
OffsetField random_offsets(const Shape4& in, int groups, int k, Rng& rng, double range,
                           double keep_away) {
  OffsetField off(in.n, groups, in.h * k, in.w * k);
  for (int n = 0; n < in.n; ++n) {
    for (int g = 0; g < groups; ++g) {
      for (int y = 0; y < off.h(); ++y) {
        for (int x = 0; x < off.w(); ++x) {
          double dx;
          double dy;
          do {
            dx = rng.uniform(-range, range);
          } while (axis_margin(static_cast<double>(x) / k + dx, in.w) < keep_away);
          do {
            dy = rng.uniform(-range, range);
          } while (axis_margin(static_cast<double>(y) / k + dy, in.h) < keep_away);
          off.dx(n, g, y, x) = dx;
          off.dy(n, g, y, x) = dy;
        }
      }
    }
  }
  return off;
}

LabelMap random_labels(int n, int h, int w, int classes, Rng& rng, double ignore_prob = 0.0) {
  LabelMap labels(n, h, w, classes);
  for (auto& v : labels.labels) {
    v = rng.uniform() < ignore_prob ? labels.ignore_value : rng.uniform_int(0, classes - 1);
  }
  return labels;
}

void merge(GradcheckReport& into, const GradcheckReport& part) {
  into.cases += part.cases;
  into.skipped += part.skipped;
  into.checked += part.checked;
  into.failures += part.failures;
  into.roundoff_limited += part.roundoff_limited;
  into.max_rel_err = std::max(into.max_rel_err, part.max_rel_err);
}

// --- subjects -----------------------------------------------------------------

GradcheckReport check_lau(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"lau_backward"};
  for (int i = 0; i < opt.cases; ++i) {
    const Shape4 in{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(2, 4),
                    rng.uniform_int(2, 4)};
    const int k = rng.uniform_int(1, 3);
    const int groups = rng.uniform() < 0.5 ? 1 : in.c;
    const Tensor4 U = random_tensor(in, rng);
    const OffsetField off = random_offsets(in, groups, k, rng, 1.0, 2e-3);
    const Shape4 out{in.n, in.c, in.h * k, in.w * k};
    const Tensor4 R = random_tensor(out, rng);
    const Shape4 off_shape = off.dx.shape();

    auto unpack = [=](const Eigen::VectorXd& x) {
      Eigen::Index pos = 0;
      Tensor4 u = slice_tensor(x, pos, in);
      Tensor4 dx = slice_tensor(x, pos, off_shape);
      Tensor4 dy = slice_tensor(x, pos, off_shape);
      return std::make_pair(std::move(u), OffsetField(std::move(dx), std::move(dy)));
    };
    GradSubject subject;
    subject.name = "lau_backward";
    subject.value = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      return weighted_sum(R, lau_forward(u, o, k));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      const LauGrads g = lau_backward(u, o, k, R);
      return concat({&g.input.data(), &g.offsets.dx.data(), &g.offsets.dy.data()});
    };
    subject.kink_distance = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      return offset_margin(in, o, k);
    };
    merge(total, gradcheck(subject, {concat({&U.data(), &off.dx.data(), &off.dy.data()})}, opt.h,
                           tol));
  }
  return total;
}

GradcheckReport check_bilinear(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"bilinear_backward"};
  const int cases = std::max(1, opt.cases / 4);
  for (int i = 0; i < cases; ++i) {
    const Shape4 in{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(1, 4),
                    rng.uniform_int(1, 4)};
    const int k = rng.uniform_int(1, 4);
    const Tensor4 R = random_tensor({in.n, in.c, in.h * k, in.w * k}, rng);
    GradSubject subject;
    subject.name = "bilinear_backward";
    subject.value = [=](const Eigen::VectorXd& x) {
      return weighted_sum(R, bilinear_upsample(Tensor4(in, x), k));
    };
    subject.gradient = [=](const Eigen::VectorXd&) {
      return bilinear_upsample_backward(R, in, k).data();
    };
    merge(total, gradcheck(subject, {random_tensor(in, rng).data()}, opt.h, tol));
  }
  return total;
}

GradcheckReport check_conv(Rng& rng, const GradcheckSuiteOptions& opt, int kernel, double tol) {
  GradcheckReport total{"conv2d_backward_k" + std::to_string(kernel)};
  const int cases = std::max(1, opt.cases / 10);
  for (int i = 0; i < cases; ++i) {
    const Shape4 in{rng.uniform_int(1, 2), rng.uniform_int(1, 3), rng.uniform_int(1, 4),
                    rng.uniform_int(1, 4)};
    const int out_ch = rng.uniform_int(1, 3);
    const ConvLayer proto = ConvLayer::uniform("probe", in.c, out_ch, kernel, 0.0, rng);
    const Tensor4 R = random_tensor({in.n, out_ch, in.h, in.w}, rng);
    const Tensor4 X = random_tensor(in, rng);
    const Eigen::Index wsize = proto.weights.size();
    auto unpack = [=](const Eigen::VectorXd& x) {
      ConvLayer layer = proto;
      Eigen::Index pos = 0;
      Tensor4 input = slice_tensor(x, pos, in);
      layer.weights = Eigen::Map<const RowMatrixXd>(x.data() + pos, proto.weights.rows(),
                                                    proto.weights.cols());
      pos += wsize;
      layer.bias = x.segment(pos, proto.bias.size());
      return std::make_pair(std::move(layer), std::move(input));
    };
    GradSubject subject;
    subject.name = total.subject;
    subject.value = [=](const Eigen::VectorXd& x) {
      const auto [layer, input] = unpack(x);
      return weighted_sum(R, conv2d_forward(layer, input));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      const auto [layer, input] = unpack(x);
      const ConvGrads g = conv2d_backward(layer, input, R);
      const Eigen::VectorXd w =
          Eigen::Map<const Eigen::VectorXd>(g.params.weights.data(), g.params.weights.size());
      return concat({&g.input.data(), &w, &g.params.bias});
    };
    const Eigen::VectorXd w0 = Eigen::Map<const Eigen::VectorXd>(proto.weights.data(), wsize);
    merge(total, gradcheck(subject, {concat({&X.data(), &w0, &proto.bias})}, opt.h, tol));
  }
  return total;
}

GradcheckReport check_leaky(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"leaky_relu"};
  const int cases = std::max(1, opt.cases / 10);
  for (int i = 0; i < cases; ++i) {
    const Shape4 in{1, rng.uniform_int(1, 3), rng.uniform_int(1, 4), rng.uniform_int(1, 4)};
    const double alpha = rng.uniform(0.0, 0.5);
    const Tensor4 R = random_tensor(in, rng);
    GradSubject subject;
    subject.name = "leaky_relu";
    subject.value = [=](const Eigen::VectorXd& x) {
      return weighted_sum(R, leaky_relu(Tensor4(in, x), alpha));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      return leaky_relu_backward(Tensor4(in, x), R, alpha).data();
    };
    subject.kink_distance = [](const Eigen::VectorXd& x) { return x.cwiseAbs().minCoeff(); };
    merge(total, gradcheck(subject, {random_tensor(in, rng).data()}, opt.h, tol));
  }
  return total;
}

GradcheckReport check_cross_entropy(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"cross_entropy"};
  const int cases = std::max(1, opt.cases / 10);
  for (int i = 0; i < cases; ++i) {
    const int classes = rng.uniform_int(2, 4);
    const Shape4 in{rng.uniform_int(1, 2), classes, rng.uniform_int(1, 4), rng.uniform_int(1, 4)};
    LabelMap labels = random_labels(in.n, in.h, in.w, classes, rng, 0.2);
    labels.labels[0] = 0;  // at least one valid pixel
    GradSubject subject;
    subject.name = "cross_entropy";
    subject.value = [=](const Eigen::VectorXd& x) {
      return reduce_loss(cross_entropy_map(Tensor4(in, x), labels));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      const Tensor4 logits(in, x);
      const LossMap loss = cross_entropy_map(logits, labels);
      const double scale = 1.0 / static_cast<double>(valid_count(loss));
      return cross_entropy_backward(logits, labels, Eigen::ArrayXd::Constant(loss.size(), scale))
          .data();
    };
    merge(total, gradcheck(subject, {random_tensor(in, rng, -3.0, 3.0).data()}, opt.h, tol));
  }
  return total;
}

GradcheckReport check_offset_guided(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"offset_guided_loss"};
  const int cases = std::max(1, opt.cases / 10);
  for (int i = 0; i < cases; ++i) {
    const int classes = rng.uniform_int(2, 4);
    const Shape4 in{1, classes, rng.uniform_int(2, 4), rng.uniform_int(2, 4)};
    const LabelMap labels = random_labels(in.n, in.h, in.w, classes, rng);
    const double lambda = rng.uniform(0.0, 1.0);
    const Tensor4 logits = random_tensor(in, rng, -3.0, 3.0);
    LossMap aux = cross_entropy_map(logits, labels);
    for (Eigen::Index p = 0; p < aux.size(); ++p) aux.values[p] += rng.uniform(-0.5, 0.5);
    GradSubject subject;
    subject.name = "offset_guided_loss";
    subject.value = [=](const Eigen::VectorXd& x) {
      return reduce_loss(offset_guided_loss(cross_entropy_map(Tensor4(in, x), labels), aux, lambda));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      const Tensor4 v(in, x);
      const LossMap loss = cross_entropy_map(v, labels);
      const Eigen::ArrayXd weights = offset_guided_weights(loss, aux, lambda) /
                                     static_cast<double>(valid_count(loss));
      return cross_entropy_backward(v, labels, weights).data();
    };
    subject.kink_distance = [=](const Eigen::VectorXd& x) {
      return switch_margin(cross_entropy_map(Tensor4(in, x), labels), aux);
    };
    merge(total, gradcheck(subject, {logits.data()}, opt.h, tol));
  }
  return total;
}

GradcheckReport check_regression(Rng& rng, const GradcheckSuiteOptions& opt, double tol) {
  GradcheckReport total{"regression_loss"};
  const int cases = std::max(1, opt.cases / 10);
  for (int i = 0; i < cases; ++i) {
    const int classes = rng.uniform_int(2, 3);
    const Shape4 in{1, classes, rng.uniform_int(2, 3), rng.uniform_int(2, 3)};
    const int k = rng.uniform_int(1, 2);
    const double lambda = rng.uniform(0.0, 1.0);
    const double gamma = rng.uniform(0.05, 1.0);
    const LabelMap labels = random_labels(in.n, in.h * k, in.w * k, classes, rng);
    const Tensor4 U = random_tensor(in, rng, -2.0, 2.0);
    const OffsetField off = random_offsets(in, 1, k, rng, 1.5, 2e-3);
    const Shape4 off_shape = off.dx.shape();
    auto unpack = [=](const Eigen::VectorXd& x) {
      Eigen::Index pos = 0;
      Tensor4 u = slice_tensor(x, pos, in);
      Tensor4 dx = slice_tensor(x, pos, off_shape);
      Tensor4 dy = slice_tensor(x, pos, off_shape);
      return std::make_pair(std::move(u), OffsetField(std::move(dx), std::move(dy)));
    };
    GradSubject subject;
    subject.name = "regression_loss";
    subject.value = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      return reduce_loss(regression_loss(build_candidate_set(u, o, k, labels), gamma, lambda));
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      const CandidateSet cs = build_candidate_set(u, o, k, labels);
      const double inv = 1.0 / static_cast<double>(valid_count(cs.losses[0]));
      const Eigen::ArrayXd weights = candidate_weights(cs.losses, lambda) * inv;
      const Tensor4 v = lau_forward(u, o, k);
      LauGrads g = lau_backward(u, o, k, cross_entropy_backward(v, labels, weights));
      const CoordinateGrad cg = smooth_l1_grad(cs.coords[0], select_theta_opt(cs));
      g.offsets.dx.data().array() += gamma * inv * cg.gx;
      g.offsets.dy.data().array() += gamma * inv * cg.gy;
      return concat({&g.input.data(), &g.offsets.dx.data(), &g.offsets.dy.data()});
    };
    subject.kink_distance = [=](const Eigen::VectorXd& x) {
      const auto [u, o] = unpack(x);
      const CandidateSet cs = build_candidate_set(u, o, k, labels);
      return std::min(offset_margin(in, o, k), candidate_margin(cs.losses));
    };
    merge(total, gradcheck(subject, {concat({&U.data(), &off.dx.data(), &off.dy.data()})}, opt.h,
                           tol));
  }
  return total;
}

// End-to-end subject over every trainable parameter of a small network.
GradcheckReport check_network(Rng& rng, const GradcheckSuiteOptions& opt, LossKind loss,
                              double tol) {
  GradcheckReport total{"network_" + to_string(loss)};
  PipelineSettings settings;
  settings.loss = loss;
  settings.lau_ratio = 2;
  settings.total_ratio = 4;
  settings.lambda = 0.3;
  settings.gamma = 0.5;
  NetworkShape shape;
  shape.in_channels = 3;
  shape.classes = 3;
  shape.decoder_width = 4;
  shape.hidden = 6;
  shape.lau_ratio = 2;
  shape.slope = 0.1;
  const Shape4 in{1, 3, 4, 4};
  int found = 0;
  for (int attempt = 0; attempt < 2000 && found < opt.network_cases; ++attempt) {
    Network net = make_network(shape, rng);
    for (Eigen::Index i = 0; i < net.offsets->expand.weights.size(); ++i) {
      net.offsets->expand.weights.data()[i] = rng.uniform(-2.0, 2.0);
    }
    for (Eigen::Index i = 0; i < net.offsets->expand.bias.size(); ++i) {
      net.offsets->expand.bias[i] = rng.uniform(-2.0, 2.0);
    }
    const Tensor4 X = random_tensor(in, rng);
    // Sparse labels keep the number of loss switches small enough to find
    // points away from them; the LaU-resolution lattice stays denser.
    LabelMap labels = random_labels(1, in.h * 4, in.w * 4, shape.classes, rng, 0.9);
    for (int y = 0; y < in.h * 2; ++y) {
      for (int x = 0; x < in.w * 2; ++x) {
        labels.labels[static_cast<std::size_t>((2 * y) * in.w * 4 + 2 * x)] =
            rng.uniform() < 0.5 ? labels.ignore_value : rng.uniform_int(0, shape.classes - 1);
      }
    }
    if (run_pipeline(net, X, labels, settings, false).kink_margin < 2e-3) continue;
    ++found;
    GradSubject subject;
    subject.name = total.subject;
    auto with_params = [net](const Eigen::VectorXd& x) {
      Network copy = net;
      assign_parameters(copy, x);
      return copy;
    };
    subject.value = [=](const Eigen::VectorXd& x) {
      return run_pipeline(with_params(x), X, labels, settings, false).loss;
    };
    subject.gradient = [=](const Eigen::VectorXd& x) {
      return flatten_gradients(run_pipeline(with_params(x), X, labels, settings, true).grads);
    };
    subject.kink_distance = [=](const Eigen::VectorXd& x) {
      return run_pipeline(with_params(x), X, labels, settings, false).kink_margin;
    };
    merge(total, gradcheck(subject, {flatten_parameters(net)}, opt.h, tol));
  }
  return total;
}

}  // namespace

std::vector<SuiteEntry> run_gradcheck_suite(const GradcheckSuiteOptions& options) {
  std::vector<SuiteEntry> out;
  Rng rng(mix_seed(options.seed, 0x67726164));
  out.push_back({check_lau(rng, options, 1e-5), 1e-5});
  out.push_back({check_bilinear(rng, options, 1e-5), 1e-5});
  out.push_back({check_conv(rng, options, 1, 1e-5), 1e-5});
  out.push_back({check_conv(rng, options, 3, 1e-5), 1e-5});
  out.push_back({check_leaky(rng, options, 1e-6), 1e-6});
  out.push_back({check_cross_entropy(rng, options, 1e-5), 1e-5});
  out.push_back({check_offset_guided(rng, options, 1e-5), 1e-5});
  out.push_back({check_regression(rng, options, 1e-5), 1e-5});
  for (LossKind kind : {LossKind::kCe, LossKind::kOff, LossKind::kReg}) {
    out.push_back({check_network(rng, options, kind, 1e-4), 1e-4});
  }
  return out;
}

}  // namespace lau
