// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "png_io.hpp"
#include "tensor.hpp"

namespace sardiff {

// All metrics take display-space images in [0, 1] (n == 1, C x H x W).

/// 10 log10(peak^2 / MSE); +inf when the images are identical.
double psnr(const ImageTensor& a, const ImageTensor& b, double peak = 1.0);

struct SsimOptions {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

/// Single-scale SSIM: Gaussian-weighted local statistics over every valid
/// window position, averaged over positions and then over channels.
double ssim(const ImageTensor& a, const ImageTensor& b, const SsimOptions& options = {});

using WarningSink = std::function<void(const std::string&)>;

/// ||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^(1/2)). Rows are samples.
double frechet_distance(const Eigen::MatrixXd& feats_a, const Eigen::MatrixXd& feats_b,
                        const WarningSink& warn = {});

class FeatureEmbedder {
 public:
  virtual ~FeatureEmbedder() = default;
  virtual std::string name() const = 0;
  virtual int dim() const = 0;
  virtual std::vector<double> embed(const ImageTensor& display) const = 0;
};

/// Channel mean and variance, plus a fixed-seed Gaussian projection of a
/// 16x16 box-downsampled copy to 64 values. Not comparable with Inception FID.
class MomentProjectionEmbedder final : public FeatureEmbedder {
 public:
  explicit MomentProjectionEmbedder(int channels = 3);
  std::string name() const override { return "moments-randproj64"; }
  int dim() const override { return 2 * channels_ + kProjected; }
  std::vector<double> embed(const ImageTensor& display) const override;

  static constexpr int kGrid = 16;
  static constexpr int kProjected = 64;

 private:
  int channels_;
  Eigen::MatrixXd projection_;  // kProjected x (channels * kGrid^2)
};

/// "default" and "moments-randproj64" name the built-in embedder.
std::unique_ptr<FeatureEmbedder> make_embedder(const std::string& name);

struct EvalPair {
  std::string id;
  ImageTensor generated;
  ImageTensor truth;
};

struct MetricRow {
  std::string id;
  double psnr = 0;
  double ssim = 0;
};

struct MetricReport {
  std::vector<MetricRow> rows;
  double mean_psnr = 0;
  double mean_ssim = 0;
  std::optional<double> fid;
  std::string embedder;

  std::size_t count() const { return rows.size(); }
  /// Header "id,psnr,ssim"; infinite PSNR is written as "inf".
  std::string csv() const;
  void write_csv(const std::filesystem::path& path) const;
  std::string summary() const;
};

/// Number formatting shared by the CSV and the summary line.
std::string format_metric(double v);

/// Samples scaled by 1 / max into [0, 1], CHW.
ImageTensor to_display(const RawImage& raw);

MetricReport evaluate(const std::vector<EvalPair>& pairs, const FeatureEmbedder* embedder = nullptr,
                      const WarningSink& warn = {});

/// Pairs PNG files by name (relative path) between two directory trees.
/// Truth files without a generated counterpart are an error.
MetricReport evaluate_dirs(const std::filesystem::path& generated,
                           const std::filesystem::path& truth,
                           const FeatureEmbedder* embedder = nullptr, const WarningSink& warn = {});

}  // namespace sardiff
