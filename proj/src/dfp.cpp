#include "streamperc/dfp.hpp"

#include <cmath>
#include <fstream>
#include <json.hpp>
#include <random>
#include <stdexcept>

namespace streamperc {

FeatureMap FeatureMap::zeros(int c, int h, int w) {
  if (c < 1 || h < 1 || w < 1) throw std::invalid_argument("FeatureMap: bad shape");
  return {c, h, w, Eigen::MatrixXd::Zero(c, static_cast<Eigen::Index>(h) * w)};
}

FeatureMap FeatureMap::random(int c, int h, int w, std::uint64_t seed) {
  FeatureMap f = zeros(c, h, w);
  std::mt19937_64 rng(seed);
  const double inv = 1.0 / (static_cast<double>(std::mt19937_64::max()) + 1.0);
  for (Eigen::Index i = 0; i < f.values.size(); ++i) {
    f.values.data()[i] = 2.0 * static_cast<double>(rng()) * inv - 1.0;
  }
  return f;
}

bool FeatureMap::same_shape(const FeatureMap& other) const {
  return channels == other.channels && height == other.height && width == other.width;
}

ProjectionParams ProjectionParams::random(int out_channels, int in_channels,
                                          std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const double inv = 1.0 / (static_cast<double>(std::mt19937_64::max()) + 1.0);
  auto next = [&] { return 2.0 * static_cast<double>(rng()) * inv - 1.0; };
  ProjectionParams p;
  p.conv = Eigen::MatrixXd::NullaryExpr(out_channels, in_channels,
                                        [&](Eigen::Index, Eigen::Index) { return next(); });
  p.scale = Eigen::VectorXd::NullaryExpr(out_channels, [&](Eigen::Index) {
    return 0.5 + std::abs(next());
  });
  p.shift = Eigen::VectorXd::NullaryExpr(out_channels, [&](Eigen::Index) { return next(); });
  return p;
}

double silu(double x) { return x / (1.0 + std::exp(-x)); }

namespace {

double silu_derivative(double x) {
  const double s = 1.0 / (1.0 + std::exp(-x));
  return s * (1.0 + x * (1.0 - s));
}

void check_projection(const FeatureMap& f, const ProjectionParams& p) {
  if (p.conv.cols() != f.channels) {
    throw std::invalid_argument("reduce_project: conv input width != feature channels");
  }
  if (p.scale.size() != p.conv.rows() || p.shift.size() != p.conv.rows()) {
    throw std::invalid_argument("reduce_project: scale/shift size != conv output width");
  }
}

// Pre-activation: scale .* (conv * X) + shift.
Eigen::MatrixXd pre_activation(const FeatureMap& f, const ProjectionParams& p) {
  Eigen::MatrixXd a = p.conv * f.values;
  a.array().colwise() *= p.scale.array();
  a.colwise() += p.shift;
  return a;
}

}  // namespace

FeatureMap reduce_project(const FeatureMap& f, const ProjectionParams& p) {
  check_projection(f, p);
  FeatureMap out;
  out.channels = static_cast<int>(p.conv.rows());
  out.height = f.height;
  out.width = f.width;
  out.values = pre_activation(f, p).unaryExpr([](double v) { return silu(v); });
  return out;
}

FeatureMap dfp_fuse(const FeatureMap& f_prev, const FeatureMap& f_cur,
                    const ProjectionParams& p, const DFPConfig& cfg) {
  if (!f_prev.same_shape(f_cur)) {
    throw std::invalid_argument("dfp_fuse: input shapes differ");
  }
  const int c = f_cur.channels;
  FeatureMap out = FeatureMap::zeros(c, f_cur.height, f_cur.width);

  if (cfg.fusion == FusionMode::Concat) {
    if (c % 2 != 0) throw std::invalid_argument("dfp_fuse: concat mode needs even channels");
    if (p.conv.rows() != c / 2) {
      throw std::invalid_argument("dfp_fuse: concat mode needs a half-channel projection");
    }
    const FeatureMap cur = reduce_project(f_cur, p);
    const FeatureMap prev = reduce_project(f_prev, p);
    out.values.topRows(c / 2) = cur.values;
    out.values.bottomRows(c / 2) = prev.values;
  } else {
    if (p.conv.rows() != c) {
      throw std::invalid_argument("dfp_fuse: add mode needs a full-channel projection");
    }
    out.values = reduce_project(f_cur, p).values + reduce_project(f_prev, p).values;
  }

  if (cfg.residual) out.values += f_cur.values;
  return out;
}

DFPGradients dfp_gradients(const FeatureMap& f_prev, const FeatureMap& f_cur,
                           const ProjectionParams& p, const DFPConfig& cfg) {
  if (!f_prev.same_shape(f_cur)) {
    throw std::invalid_argument("dfp_gradients: input shapes differ");
  }
  check_projection(f_cur, p);
  const int expected = cfg.fusion == FusionMode::Concat ? f_cur.channels / 2 : f_cur.channels;
  if (p.conv.rows() != expected) {
    throw std::invalid_argument("dfp_gradients: projection width does not match fusion mode");
  }
  DFPGradients g;
  g.conv = Eigen::MatrixXd::Zero(p.conv.rows(), p.conv.cols());
  g.scale = Eigen::VectorXd::Zero(p.scale.size());
  g.shift = Eigen::VectorXd::Zero(p.shift.size());

  // The residual does not depend on the params; both fusion modes reduce to
  // the sum of two shared-weight projections.
  for (const FeatureMap* f : {&f_cur, &f_prev}) {
    const Eigen::MatrixXd z = p.conv * f->values;
    Eigen::MatrixXd a = z;
    a.array().colwise() *= p.scale.array();
    a.colwise() += p.shift;
    const Eigen::MatrixXd gact = a.unaryExpr([](double v) { return silu_derivative(v); });

    Eigen::MatrixXd scaled = gact;
    scaled.array().colwise() *= p.scale.array();
    g.conv += scaled * f->values.transpose();
    g.scale += (gact.array() * z.array()).rowwise().sum().matrix();
    g.shift += gact.rowwise().sum();
  }
  return g;
}

double dfp_grad_check(const FeatureMap& f_prev, const FeatureMap& f_cur,
                      const ProjectionParams& p, const DFPConfig& cfg) {
  const DFPGradients analytic = dfp_gradients(f_prev, f_cur, p, cfg);
  const double step = 1e-5;

  auto objective = [&](const ProjectionParams& params) {
    return dfp_fuse(f_prev, f_cur, params, cfg).values.sum();
  };

  double max_err = 0.0;
  auto compare = [&](double a, double fd) {
    const double err = std::abs(a - fd) / std::max({std::abs(a), std::abs(fd), 1e-8});
    max_err = std::max(max_err, err);
  };

  ProjectionParams probe = p;
  for (Eigen::Index i = 0; i < probe.conv.size(); ++i) {
    const double saved = probe.conv.data()[i];
    probe.conv.data()[i] = saved + step;
    const double hi = objective(probe);
    probe.conv.data()[i] = saved - step;
    const double lo = objective(probe);
    probe.conv.data()[i] = saved;
    compare(analytic.conv.data()[i], (hi - lo) / (2.0 * step));
  }
  for (Eigen::Index i = 0; i < probe.scale.size(); ++i) {
    const double saved = probe.scale[i];
    probe.scale[i] = saved + step;
    const double hi = objective(probe);
    probe.scale[i] = saved - step;
    const double lo = objective(probe);
    probe.scale[i] = saved;
    compare(analytic.scale[i], (hi - lo) / (2.0 * step));
  }
  for (Eigen::Index i = 0; i < probe.shift.size(); ++i) {
    const double saved = probe.shift[i];
    probe.shift[i] = saved + step;
    const double hi = objective(probe);
    probe.shift[i] = saved - step;
    const double lo = objective(probe);
    probe.shift[i] = saved;
    compare(analytic.shift[i], (hi - lo) / (2.0 * step));
  }
  return max_err;
}

void save_feature_map(const FeatureMap& f, const std::filesystem::path& path) {
  nlohmann::json j;
  j["channels"] = f.channels;
  j["height"] = f.height;
  j["width"] = f.width;
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(f.values.size()));
  for (Eigen::Index c = 0; c < f.values.rows(); ++c) {
    for (Eigen::Index s = 0; s < f.values.cols(); ++s) flat.push_back(f.values(c, s));
  }
  j["values"] = flat;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump() << '\n';
}

FeatureMap load_feature_map(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  nlohmann::json j;
  in >> j;
  FeatureMap f = FeatureMap::zeros(j.at("channels").get<int>(), j.at("height").get<int>(),
                                   j.at("width").get<int>());
  const auto flat = j.at("values").get<std::vector<double>>();
  if (flat.size() != static_cast<std::size_t>(f.values.size())) {
    throw std::runtime_error("feature map file has wrong value count");
  }
  std::size_t k = 0;
  for (Eigen::Index c = 0; c < f.values.rows(); ++c) {
    for (Eigen::Index s = 0; s < f.values.cols(); ++s) f.values(c, s) = flat[k++];
  }
  return f;
}

}  // namespace streamperc
