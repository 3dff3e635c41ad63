// Independent reference implementations used only by tests. They favour
// obviousness over speed and accumulate in long double.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "geo.hpp"
#include "losses.hpp"
#include "model.hpp"
#include "numkernel.hpp"

namespace oracle {

using geoconcept::Matrix;
using LD = long double;

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t j = 0; j < b.cols(); ++j) {
      LD s = 0;
      for (std::size_t k = 0; k < a.cols(); ++k) s += static_cast<LD>(a(i, k)) * b(k, j);
      out(i, j) = static_cast<double>(s);
    }
  }
  return out;
}

// Central angle from the chord between unit vectors.
inline double great_circle_km(const geoconcept::GeoCoordinate& a, const geoconcept::GeoCoordinate& b) {
  const auto p = geoconcept::to_unit_sphere(a);
  const auto q = geoconcept::to_unit_sphere(b);
  LD chord2 = 0;
  for (int i = 0; i < 3; ++i) chord2 += static_cast<LD>(p[i] - q[i]) * (p[i] - q[i]);
  const LD half = std::min<LD>(1.0L, std::sqrt(chord2) / 2.0L);
  return static_cast<double>(2.0L * std::asin(half) * geoconcept::kEarthRadiusKm);
}

// Median by repeatedly removing the extremes.
inline double median(std::vector<double> v) {
  while (v.size() > 2) {
    v.erase(std::min_element(v.begin(), v.end()));
    v.erase(std::max_element(v.begin(), v.end()));
  }
  return v.size() == 1 ? v[0] : (v[0] + v[1]) / 2.0;
}

inline double pearson(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = x.size();
  LD sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sx += x[i];
    sy += y[i];
    sxx += static_cast<LD>(x[i]) * x[i];
    syy += static_cast<LD>(y[i]) * y[i];
    sxy += static_cast<LD>(x[i]) * y[i];
  }
  const LD cov = sxy - sx * sy / n;
  return static_cast<double>(cov / std::sqrt((sxx - sx * sx / n) * (syy - sy * sy / n)));
}

// |mean(a) - mean(b)|^2 / sigma^2
inline double divergence_closed_form(const Matrix& a, const Matrix& b, double sigma) {
  LD s = 0;
  for (std::size_t c = 0; c < a.cols(); ++c) {
    LD ma = 0, mb = 0;
    for (std::size_t i = 0; i < a.rows(); ++i) ma += a(i, c);
    for (std::size_t i = 0; i < b.rows(); ++i) mb += b(i, c);
    const LD diff = ma / a.rows() - mb / b.rows();
    s += diff * diff;
  }
  return static_cast<double>(s / (static_cast<LD>(sigma) * sigma));
}

// ---------------------------------------------------------------------------
// Full alignment objective in long double, written directly from the
// definitions. Fourier features are fixed inputs, so they are taken from the
// library; everything downstream of a trainable tensor is recomputed here.
// ---------------------------------------------------------------------------

struct Mat {
  std::size_t r = 0, c = 0;
  std::vector<LD> v;
  Mat() = default;
  Mat(std::size_t rows, std::size_t cols) : r(rows), c(cols), v(rows * cols, 0.0L) {}
  explicit Mat(const Matrix& m) : r(m.rows()), c(m.cols()), v(m.values().begin(), m.values().end()) {}
  LD& operator()(std::size_t i, std::size_t j) { return v[i * c + j]; }
  LD operator()(std::size_t i, std::size_t j) const { return v[i * c + j]; }
};

inline Mat mlp(const geoconcept::MlpParams& p, Mat x) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const Matrix& w = p.layers[l].weight;
    const Matrix& b = p.layers[l].bias;
    Mat y(x.r, w.rows());
    for (std::size_t i = 0; i < x.r; ++i) {
      for (std::size_t o = 0; o < w.rows(); ++o) {
        LD s = b[o];
        for (std::size_t k = 0; k < w.cols(); ++k) s += static_cast<LD>(w(o, k)) * x(i, k);
        if (l + 1 < p.layers.size()) {
          switch (p.activation) {
            case geoconcept::Activation::kRelu: s = s > 0 ? s : 0; break;
            case geoconcept::Activation::kTanh: s = std::tanh(s); break;
            case geoconcept::Activation::kIdentity: break;
          }
        }
        y(i, o) = s;
      }
    }
    x = std::move(y);
  }
  return x;
}

inline void normalize_rows(Mat& m) {
  for (std::size_t i = 0; i < m.r; ++i) {
    LD n = 0;
    for (std::size_t j = 0; j < m.c; ++j) n += m(i, j) * m(i, j);
    n = std::sqrt(n);
    for (std::size_t j = 0; j < m.c; ++j) m(i, j) /= n;
  }
}

// -1/N sum_i log( exp(s_ii/tau) / sum_j exp(s_ij/tau) ), optionally averaged
// with the column-wise direction.
inline LD infonce(Mat a, Mat b, LD tau, bool normalize, bool symmetric) {
  if (normalize) {
    normalize_rows(a);
    normalize_rows(b);
  }
  const std::size_t n = a.r;
  Mat s(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      LD d = 0;
      for (std::size_t k = 0; k < a.c; ++k) d += a(i, k) * b(j, k);
      s(i, j) = d / tau;
    }
  }
  auto direction = [&](bool rows) {
    LD total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      LD denom = 0;
      for (std::size_t j = 0; j < n; ++j) denom += std::exp(rows ? s(i, j) : s(j, i));
      total -= std::log(std::exp(s(i, i)) / denom);
    }
    return total / n;
  };
  return symmetric ? (direction(true) + direction(false)) / 2 : direction(true);
}

inline LD log_kernel(const Mat& x, std::size_t i, const Mat& y, std::size_t j, LD sigma) {
  LD d2 = 0;
  for (std::size_t k = 0; k < x.c; ++k) d2 += (x(i, k) - y(j, k)) * (x(i, k) - y(j, k));
  return -d2 / (2 * sigma * sigma);
}

inline LD divergence(const Mat& a, const Mat& b, LD sigma, geoconcept::DivergenceVariant variant) {
  const std::size_t n = a.r;
  if (variant == geoconcept::DivergenceVariant::kAsWritten) {
    LD s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        s += log_kernel(a, i, a, j, sigma) + log_kernel(b, i, b, j, sigma) - 2 * log_kernel(a, i, b, j, sigma);
      }
    }
    return s / (static_cast<LD>(n) * n);
  }
  auto log_mean = [&](const Mat& x, const Mat& y) {
    LD s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) s += std::exp(log_kernel(x, i, y, j, sigma));
    }
    return std::log(s / (static_cast<LD>(n) * n));
  };
  return log_mean(a, a) + log_mean(b, b) - 2 * log_mean(a, b);
}

struct ObjectiveInputs {
  std::vector<Matrix> features;  // per encoder scale, N x 2m
  Matrix x_img;
  Matrix concept_base;  // d x k
};

inline ObjectiveInputs make_inputs(const geoconcept::ModelParams& p, const geoconcept::BatchInputs& batch,
                                   const Matrix& concept_base) {
  ObjectiveInputs in;
  const Matrix pts = geoconcept::sphere_points(batch.locations);
  for (std::size_t s = 0; s < p.location_encoder.branches.size(); ++s) {
    in.features.push_back(geoconcept::fourier_features(pts, p.location_encoder.frequencies[s],
                                                       p.location_encoder.config.scales[s]));
  }
  in.x_img = batch.x_img;
  in.concept_base = concept_base;
  return in;
}

// Pieces of the forward pass that depend on disjoint parameter groups, so a
// finite-difference probe only recomputes the part it perturbs.
struct ForwardParts {
  std::vector<Mat> branches;  // per encoder scale, before summation
  Mat z_img;
};

inline Mat branch_output(const geoconcept::ModelParams& p, const ObjectiveInputs& in, std::size_t s) {
  return mlp(p.location_encoder.branches[s], Mat(in.features[s]));
}

inline ForwardParts forward_parts(const geoconcept::ModelParams& p, const ObjectiveInputs& in) {
  ForwardParts parts;
  for (std::size_t s = 0; s < in.features.size(); ++s) parts.branches.push_back(branch_output(p, in, s));
  parts.z_img = mlp(p.image_projector, Mat(in.x_img));
  return parts;
}

inline LD objective_from_parts(const geoconcept::ModelParams& p, const ObjectiveInputs& in,
                               const ForwardParts& parts, const geoconcept::LossConfig& cfg,
                               const geoconcept::KernelConfig& kcfg, geoconcept::LossTerms terms) {
  const std::size_t n = in.x_img.rows();
  Mat x_loc(n, p.location_encoder.output_dim());
  for (const Mat& branch : parts.branches) {
    for (std::size_t i = 0; i < branch.v.size(); ++i) x_loc.v[i] += branch.v[i];
  }
  normalize_rows(x_loc);
  const Mat x_img(in.x_img);
  const Mat& z_img = parts.z_img;
  const std::size_t d = in.concept_base.rows();
  const std::size_t k = in.concept_base.cols();
  Mat z_loc(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      LD s = 0;
      for (std::size_t r = 0; r < d; ++r) {
        s += x_loc(i, r) * (static_cast<LD>(in.concept_base(r, c)) + p.delta(r, c));
      }
      z_loc(i, c) = s;
    }
  }
  const LD tau = std::exp(static_cast<LD>(p.log_tau[0]));
  const bool raw = cfg.contrastive_space == geoconcept::ContrastiveSpace::kRaw;
  const LD nce = raw ? infonce(x_img, x_loc, tau, cfg.normalize_before_contrastive, cfg.symmetric)
                     : infonce(z_img, z_loc, tau, cfg.normalize_before_contrastive, cfg.symmetric);
  if (terms == geoconcept::LossTerms::kInfoNceOnly) return nce;
  const LD div = divergence(z_img, z_loc, kcfg.sigma, cfg.divergence_variant);
  if (terms == geoconcept::LossTerms::kDivergenceOnly) return div;
  return nce + static_cast<LD>(cfg.lambda) * div;
}

inline LD objective(const geoconcept::ModelParams& p, const ObjectiveInputs& in,
                    const geoconcept::LossConfig& cfg, const geoconcept::KernelConfig& kcfg,
                    geoconcept::LossTerms terms) {
  return objective_from_parts(p, in, forward_parts(p, in), cfg, kcfg, terms);
}

}  // namespace oracle
