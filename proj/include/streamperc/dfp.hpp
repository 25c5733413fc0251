#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>

namespace streamperc {

/// C x H x W tensor stored as a (C, H*W) matrix, spatial index row-major
/// (y * W + x).
struct FeatureMap {
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::MatrixXd values;  // channels x (height * width)

  static FeatureMap zeros(int c, int h, int w);
  static FeatureMap random(int c, int h, int w, std::uint64_t seed);
  bool same_shape(const FeatureMap& other) const;
};

/// 1x1 convolution plus inference-mode affine normalization, shared across
/// the two input frames.
struct ProjectionParams {
  Eigen::MatrixXd conv;      // out_channels x in_channels
  Eigen::VectorXd scale;     // out_channels
  Eigen::VectorXd shift;     // out_channels

  static ProjectionParams random(int out_channels, int in_channels, std::uint64_t seed);
};

enum class FusionMode { Concat, Add };

struct DFPConfig {
  FusionMode fusion = FusionMode::Concat;
  bool residual = true;
};

double silu(double x);

/// Per spatial location: SiLU(scale .* (conv * in) + shift).
FeatureMap reduce_project(const FeatureMap& f, const ProjectionParams& p);

/// Dynamic flow (concat of the two projections, current half first, or
/// elementwise add of full-width projections) plus the current frame as a
/// static residual.
FeatureMap dfp_fuse(const FeatureMap& f_prev, const FeatureMap& f_cur,
                    const ProjectionParams& p, const DFPConfig& cfg);

struct DFPGradients {
  Eigen::MatrixXd conv;
  Eigen::VectorXd scale;
  Eigen::VectorXd shift;
};

/// Analytic gradients of sum(dfp_fuse(...)) w.r.t. the projection params.
DFPGradients dfp_gradients(const FeatureMap& f_prev, const FeatureMap& f_cur,
                           const ProjectionParams& p, const DFPConfig& cfg);

/// Max relative error of the analytic gradients against central finite
/// differences (step 1e-5) on the sum-of-outputs objective.
double dfp_grad_check(const FeatureMap& f_prev, const FeatureMap& f_cur,
                      const ProjectionParams& p, const DFPConfig& cfg);

void save_feature_map(const FeatureMap& f, const std::filesystem::path& path);
FeatureMap load_feature_map(const std::filesystem::path& path);

}  // namespace streamperc
