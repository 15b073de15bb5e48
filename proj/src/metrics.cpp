// Copyright 2026 The sardiff Authors
// SPDX-License-Identifier: Apache-2.0

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "errors.hpp"
#include "rng.hpp"

namespace sardiff {

namespace {

void require_single(const ImageTensor& a, const ImageTensor& b, const char* what) {
  require_same_shape(a, b, what);
  if (a.n() != 1) throw ShapeError(std::string(what) + ": expected single images");
}

std::vector<double> gaussian_window(int size, double sigma) {
  std::vector<double> w(size);
  const int r = size / 2;
  double sum = 0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    sum += w[i];
  }
  for (auto& v : w) v /= sum;
  return w;
}

// Valid-mode separable filter of an H x W plane.
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w,
                                 const std::vector<double>& k) {
  const int n = static_cast<int>(k.size());
  const int ow = w - n + 1, oh = h - n + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * in[static_cast<std::size_t>(y) * w + x + i];
      tmp[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < n; ++i) s += k[i] * tmp[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

}  // namespace

double psnr(const ImageTensor& a, const ImageTensor& b, double peak) {
  require_same_shape(a, b, "psnr");
  if (a.empty()) throw ShapeError("psnr: empty images");
  double se = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = static_cast<double>(a[i]) - b[i];
    se += d * d;
  }
  const double mse = se / static_cast<double>(a.size());
  if (mse == 0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(peak * peak / mse);
}

double ssim(const ImageTensor& a, const ImageTensor& b, const SsimOptions& o) {
  require_single(a, b, "ssim");
  if (o.window < 1 || o.window % 2 == 0) throw ParameterError("ssim: window must be odd");
  if (a.h() < o.window || a.w() < o.window) {
    throw ParameterError("ssim: image " + std::to_string(a.h()) + "x" + std::to_string(a.w()) +
                         " is smaller than the " + std::to_string(o.window) + "x" +
                         std::to_string(o.window) + " window");
  }
  const auto k = gaussian_window(o.window, o.sigma);
  const double c1 = (o.k1 * o.peak) * (o.k1 * o.peak);
  const double c2 = (o.k2 * o.peak) * (o.k2 * o.peak);
  const int h = a.h(), w = a.w();
  const std::size_t plane = a.plane();
  double total = 0;
  for (int c = 0; c < a.c(); ++c) {
    std::vector<double> x(plane), y(plane), xx(plane), yy(plane), xy(plane);
    const float* pa = a.channel(0, c);
    const float* pb = b.channel(0, c);
    for (std::size_t i = 0; i < plane; ++i) {
      x[i] = pa[i];
      y[i] = pb[i];
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k), my = filter_valid(y, h, w, k);
    const auto exx = filter_valid(xx, h, w, k), eyy = filter_valid(yy, h, w, k),
               exy = filter_valid(xy, h, w, k);
    double sum = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double pxx = mx[i] * mx[i], pyy = my[i] * my[i], pxy = mx[i] * my[i];
      const double vx = exx[i] - pxx;
      const double vy = eyy[i] - pyy;
      const double cxy = exy[i] - pxy;
      sum += ((pxy + pxy + c1) * (cxy + cxy + c2)) / ((pxx + pyy + c1) * (vx + vy + c2));
    }
    total += sum / static_cast<double>(mx.size());
  }
  return total / a.c();
}

double frechet_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b,
                        const WarningSink& warn) {
  if (a.cols() != b.cols())
    throw ShapeError("frechet_distance: feature dimensions differ (" + std::to_string(a.cols()) +
                     " vs " + std::to_string(b.cols()) + ")");
  if (a.rows() < 2 || b.rows() < 2)
    throw ParameterError("frechet_distance: each set needs at least 2 vectors");
  if (warn && (a.rows() <= a.cols() || b.rows() <= b.cols()))
    warn("frechet_distance: fewer samples than dimension + 1; covariance is rank deficient");

  auto moments = [](const Eigen::MatrixXd& f, Eigen::VectorXd& mu, Eigen::MatrixXd& cov) {
    mu = f.colwise().mean().transpose();
    const Eigen::MatrixXd centered = f.rowwise() - mu.transpose();
    cov = (centered.transpose() * centered) / static_cast<double>(f.rows() - 1);
  };
  Eigen::VectorXd mu_a, mu_b;
  Eigen::MatrixXd cov_a, cov_b;
  moments(a, mu_a, cov_a);
  moments(b, mu_b, cov_b);

  double worst = 0;
  auto clamp_eigs = [&](Eigen::VectorXd ev) {
    for (Eigen::Index i = 0; i < ev.size(); ++i) {
      worst = std::min(worst, ev[i]);
      ev[i] = std::max(ev[i], 0.0);
    }
    return ev;
  };
  // Tr (S_a S_b)^(1/2) = Tr (S_a^(1/2) S_b S_a^(1/2))^(1/2), which is symmetric.
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ea(cov_a);
  const Eigen::VectorXd la = clamp_eigs(ea.eigenvalues()).cwiseSqrt();
  const Eigen::MatrixXd sqrt_a = ea.eigenvectors() * la.asDiagonal() * ea.eigenvectors().transpose();
  Eigen::MatrixXd m = sqrt_a * cov_b * sqrt_a;
  m = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m, Eigen::EigenvaluesOnly);
  const double tr_sqrt = clamp_eigs(em.eigenvalues()).cwiseSqrt().sum();
  if (warn && worst < -1e-6)
    warn("frechet_distance: clamped negative eigenvalue " + format_metric(worst));

  const double d = (mu_a - mu_b).squaredNorm() + cov_a.trace() + cov_b.trace() - 2.0 * tr_sqrt;
  return std::max(d, 0.0);
}

MomentProjectionEmbedder::MomentProjectionEmbedder(int channels) : channels_(channels) {
  if (channels < 1) throw ParameterError("embedder channel count must be >= 1");
  const int in = channels * kGrid * kGrid;
  projection_.resize(kProjected, in);
  Rng rng(derive_seed(0, kStreamEmbedder, static_cast<std::uint64_t>(channels)));
  const double scale = 1.0 / std::sqrt(static_cast<double>(in));
  for (int r = 0; r < kProjected; ++r)
    for (int c = 0; c < in; ++c) projection_(r, c) = rng.normal() * scale;
}

std::vector<double> MomentProjectionEmbedder::embed(const ImageTensor& img) const {
  if (img.n() != 1 || img.c() != channels_)
    throw ShapeError("embedder expects a single " + std::to_string(channels_) + "-channel image");
  if (img.h() < kGrid || img.w() < kGrid)
    throw ParameterError("embedder needs images of at least 16x16");
  std::vector<double> out;
  out.reserve(dim());
  Eigen::VectorXd grid(channels_ * kGrid * kGrid);
  for (int c = 0; c < channels_; ++c) {
    const float* p = img.channel(0, c);
    double s = 0, ss = 0;
    for (std::size_t i = 0; i < img.plane(); ++i) {
      s += p[i];
      ss += static_cast<double>(p[i]) * p[i];
    }
    const double mean = s / img.plane();
    out.push_back(mean);
    out.push_back(ss / img.plane() - mean * mean);
    for (int gy = 0; gy < kGrid; ++gy) {
      const int y0 = gy * img.h() / kGrid, y1 = (gy + 1) * img.h() / kGrid;
      for (int gx = 0; gx < kGrid; ++gx) {
        const int x0 = gx * img.w() / kGrid, x1 = (gx + 1) * img.w() / kGrid;
        double acc = 0;
        for (int y = y0; y < y1; ++y)
          for (int x = x0; x < x1; ++x) acc += p[static_cast<std::size_t>(y) * img.w() + x];
        grid[(c * kGrid + gy) * kGrid + gx] = acc / ((y1 - y0) * (x1 - x0));
      }
    }
  }
  const Eigen::VectorXd proj = projection_ * grid;
  out.insert(out.end(), proj.data(), proj.data() + proj.size());
  return out;
}

std::unique_ptr<FeatureEmbedder> make_embedder(const std::string& name) {
  if (name == "default" || name == "moments-randproj64")
    return std::make_unique<MomentProjectionEmbedder>(3);
  throw ParameterError("unknown embedder \"" + name + "\" (available: moments-randproj64)");
}

std::string format_metric(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  return buf;
}

std::string MetricReport::csv() const {
  std::string out = "id,psnr,ssim\n";
  for (const auto& r : rows) out += r.id + "," + format_metric(r.psnr) + "," + format_metric(r.ssim) + "\n";
  return out;
}

void MetricReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << csv();
  if (!f) throw IoError("error writing " + path.string());
}

std::string MetricReport::summary() const {
  std::string s = "pairs=" + std::to_string(count()) + " psnr=" + format_metric(mean_psnr) +
                  " ssim=" + format_metric(mean_ssim);
  if (fid) s += " fid=" + format_metric(*fid) + " embedder=" + embedder;
  return s;
}

ImageTensor to_display(const RawImage& raw) {
  ImageTensor out = ImageTensor::image(raw.channels, raw.height, raw.width);
  const double max = raw.max_value();
  for (int c = 0; c < raw.channels; ++c)
    for (int y = 0; y < raw.height; ++y)
      for (int x = 0; x < raw.width; ++x)
        out.at(0, c, y, x) = static_cast<float>(
            raw.samples[(static_cast<std::size_t>(y) * raw.width + x) * raw.channels + c] / max);
  return out;
}

MetricReport evaluate(const std::vector<EvalPair>& pairs, const FeatureEmbedder* embedder,
                      const WarningSink& warn) {
  if (pairs.empty()) throw EmptyDatasetError("evaluate: no image pairs");
  MetricReport report;
  double sp = 0, ss = 0;
  for (const auto& p : pairs) {
    require_single(p.generated, p.truth, ("evaluate " + p.id).c_str());
    MetricRow r{p.id, psnr(p.generated, p.truth), ssim(p.generated, p.truth)};
    sp += r.psnr;
    ss += r.ssim;
    report.rows.push_back(std::move(r));
  }
  report.mean_psnr = sp / pairs.size();
  report.mean_ssim = ss / pairs.size();
  if (embedder) {
    const auto n = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd fg(n, embedder->dim()), ft(n, embedder->dim());
    for (Eigen::Index i = 0; i < n; ++i) {
      const auto g = embedder->embed(pairs[i].generated);
      const auto t = embedder->embed(pairs[i].truth);
      fg.row(i) = Eigen::Map<const Eigen::RowVectorXd>(g.data(), g.size());
      ft.row(i) = Eigen::Map<const Eigen::RowVectorXd>(t.data(), t.size());
    }
    report.fid = frechet_distance(fg, ft, warn);
    report.embedder = embedder->name();
  }
  return report;
}

namespace {

std::vector<std::filesystem::path> png_files(const std::filesystem::path& root) {
  std::error_code ec;
  if (!std::filesystem::is_directory(root, ec))
    throw IoError("not a directory: " + root.string());
  std::vector<std::filesystem::path> out;
  for (auto it = std::filesystem::recursive_directory_iterator(root, ec);
       it != std::filesystem::recursive_directory_iterator(); it.increment(ec)) {
    if (ec) throw IoError("cannot read " + root.string() + ": " + ec.message());
    if (it->is_regular_file() && it->path().extension() == ".png")
      out.push_back(std::filesystem::relative(it->path(), root));
  }
  if (ec) throw IoError("cannot read " + root.string() + ": " + ec.message());
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

MetricReport evaluate_dirs(const std::filesystem::path& generated,
                           const std::filesystem::path& truth, const FeatureEmbedder* embedder,
                           const WarningSink& warn) {
  const auto truth_files = png_files(truth);
  (void)png_files(generated);
  std::vector<EvalPair> pairs;
  for (const auto& rel : truth_files) {
    const auto gen = generated / rel;
    std::error_code ec;
    if (!std::filesystem::is_regular_file(gen, ec))
      throw IoError("no generated image for " + rel.generic_string() + " (expected " +
                    gen.string() + ")");
    EvalPair p;
    p.id = std::filesystem::path(rel).replace_extension().generic_string();
    p.generated = to_display(read_png(gen));
    p.truth = to_display(read_png(truth / rel));
    pairs.push_back(std::move(p));
  }
  return evaluate(pairs, embedder, warn);
}

}  // namespace sardiff
