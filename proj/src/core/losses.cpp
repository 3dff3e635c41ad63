#include "losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "encoder.hpp"
#include "error.hpp"

namespace geoconcept {

const char* contrastive_space_name(ContrastiveSpace s) {
  return s == ContrastiveSpace::kRaw ? "raw" : "concept";
}

ContrastiveSpace contrastive_space_from_name(const std::string& name) {
  if (name == "raw") return ContrastiveSpace::kRaw;
  if (name == "concept") return ContrastiveSpace::kConcept;
  fail(ErrorCode::kUsage, "contrastive_space must be 'raw' or 'concept', got '" + name + "'");
}

const char* divergence_variant_name(DivergenceVariant v) {
  return v == DivergenceVariant::kAsWritten ? "as_written" : "cs_divergence";
}

DivergenceVariant divergence_variant_from_name(const std::string& name) {
  if (name == "as_written") return DivergenceVariant::kAsWritten;
  if (name == "cs_divergence") return DivergenceVariant::kCsDivergence;
  fail(ErrorCode::kUsage,
       "divergence_variant must be 'as_written' or 'cs_divergence', got '" + name + "'");
}

void KernelConfig::validate() const {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) fail(ErrorCode::kUsage, "kernel sigma must be > 0");
}

void LossConfig::validate() const {
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) fail(ErrorCode::kUsage, "lambda must be >= 0");
  if (!(temperature_init >= kTauMin && temperature_init <= kTauMax)) {
    fail(ErrorCode::kUsage, "temperature_init must lie in [1e-3, 100]");
  }
}

void AlignmentBatch::validate() const {
  const std::size_t n = img_raw.rows();
  if (loc_raw.rows() != n || img_concept.rows() != n || loc_concept.rows() != n) {
    fail(ErrorCode::kShape, "alignment batch blocks disagree on N");
  }
  if (img_raw.cols() != loc_raw.cols()) {
    fail(ErrorCode::kShape, "alignment batch raw blocks disagree on d");
  }
  if (img_concept.cols() != loc_concept.cols()) {
    fail(ErrorCode::kShape, "alignment batch concept blocks disagree on k");
  }
  if (!img_raw.all_finite() || !loc_raw.all_finite() || !img_concept.all_finite() ||
      !loc_concept.all_finite()) {
    fail(ErrorCode::kNumeric, "alignment batch contains non-finite values");
  }
}

double log_gaussian_kernel(std::span<const double> x, std::span<const double> y,
                           const KernelConfig& cfg) {
  if (x.size() != y.size()) fail(ErrorCode::kShape, "gaussian_kernel: length mismatch");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double diff = x[i] - y[i];
    d2 += diff * diff;
  }
  return -d2 / (2.0 * cfg.sigma * cfg.sigma);
}

double gaussian_kernel(std::span<const double> x, std::span<const double> y,
                       const KernelConfig& cfg) {
  cfg.validate();
  return std::exp(log_gaussian_kernel(x, y, cfg));
}

namespace {

// Softmax cross-entropy over rows of `logits` with targets on the diagonal.
// Returns the mean loss and writes dL/dlogits.
double diagonal_cross_entropy(const Matrix& logits, Matrix& dlogits) {
  const std::size_t n = logits.rows();
  dlogits = Matrix(n, n);
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = logits.row(i);
    const double m = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double v : row) sum += std::exp(v - m);
    const double lse = m + std::log(sum);
    total += lse - row[i];
    for (std::size_t j = 0; j < n; ++j) {
      dlogits(i, j) = std::exp(row[j] - lse) / static_cast<double>(n);
    }
    dlogits(i, i) -= 1.0 / static_cast<double>(n);
  }
  return total / static_cast<double>(n);
}

}  // namespace

PairLoss infonce(const Matrix& a, const Matrix& b, double tau, bool normalize, bool symmetric) {
  if (!(tau > 0.0) || !std::isfinite(tau)) fail(ErrorCode::kUsage, "infonce: tau must be > 0");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kShape, "infonce: blocks " + a.shape_string() + " and " + b.shape_string() +
                                " differ");
  }
  if (a.rows() == 0) fail(ErrorCode::kUsage, "infonce: empty batch");
  const Matrix an = normalize ? normalize_rows(a) : a;
  const Matrix bn = normalize ? normalize_rows(b) : b;
  const Matrix sim = matmul_nt(an, bn);
  Matrix logits = sim * (1.0 / tau);

  PairLoss out;
  Matrix dlogits;
  out.loss = diagonal_cross_entropy(logits, dlogits);
  if (symmetric) {
    Matrix dlogits_t;
    const double loss_t = diagonal_cross_entropy(transpose(logits), dlogits_t);
    out.loss = 0.5 * (out.loss + loss_t);
    dlogits *= 0.5;
    dlogits += transpose(dlogits_t) * 0.5;
  }
  double dtau = 0.0;
  for (std::size_t i = 0; i < sim.size(); ++i) dtau -= dlogits[i] * sim[i];
  out.grad_tau = dtau / (tau * tau);
  const Matrix dsim = dlogits * (1.0 / tau);
  Matrix da = matmul(dsim, bn);
  Matrix db = matmul_tn(dsim, an);
  if (normalize) {
    da = normalize_rows_backward(a, an, da);
    db = normalize_rows_backward(b, bn, db);
  }
  out.grad_a = std::move(da);
  out.grad_b = std::move(db);
  return out;
}

namespace {

PairLoss divergence_as_written(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  const double inv_n2 = 1.0 / static_cast<double>(n * n);
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  PairLoss out{0.0, Matrix(n, k), Matrix(n, k), 0.0};
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      out.loss += log_gaussian_kernel(a.row(i), a.row(j), cfg) +
                  log_gaussian_kernel(b.row(i), b.row(j), cfg) -
                  2.0 * log_gaussian_kernel(a.row(i), b.row(j), cfg);
      for (std::size_t c = 0; c < k; ++c) {
        const double daa = (a(i, c) - a(j, c)) * inv_s2 * inv_n2;
        const double dbb = (b(i, c) - b(j, c)) * inv_s2 * inv_n2;
        const double dab = 2.0 * (a(i, c) - b(j, c)) * inv_s2 * inv_n2;
        out.grad_a(i, c) += -daa + dab;
        out.grad_a(j, c) += daa;
        out.grad_b(i, c) += -dbb;
        out.grad_b(j, c) += dbb - dab;
      }
    }
  }
  out.loss *= inv_n2;
  return out;
}

// log of the mean kernel value over all (x_i, y_j) pairs, plus its gradients
// accumulated (scaled by `weight`) into gx and gy.
double log_mean_kernel(const Matrix& x, const Matrix& y, const KernelConfig& cfg, double weight,
                       Matrix& gx, Matrix& gy) {
  const std::size_t n = x.rows();
  const std::size_t k = x.cols();
  std::vector<double> logk(n * n);
  double m = -INFINITY;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      logk[i * n + j] = log_gaussian_kernel(x.row(i), y.row(j), cfg);
      m = std::max(m, logk[i * n + j]);
    }
  }
  double sum = 0.0;
  for (double v : logk) sum += std::exp(v - m);
  const double lse = m + std::log(sum);
  const double inv_s2 = 1.0 / (cfg.sigma * cfg.sigma);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double w = weight * std::exp(logk[i * n + j] - lse) * inv_s2;
      for (std::size_t c = 0; c < k; ++c) {
        const double diff = x(i, c) - y(j, c);
        gx(i, c) -= w * diff;
        gy(j, c) += w * diff;
      }
    }
  }
  return lse - 2.0 * std::log(static_cast<double>(n));
}

PairLoss divergence_cs(const Matrix& a, const Matrix& b, const KernelConfig& cfg) {
  const std::size_t n = a.rows();
  const std::size_t k = a.cols();
  PairLoss out{0.0, Matrix(n, k), Matrix(n, k), 0.0};
  const double laa = log_mean_kernel(a, a, cfg, 1.0, out.grad_a, out.grad_a);
  const double lbb = log_mean_kernel(b, b, cfg, 1.0, out.grad_b, out.grad_b);
  const double lab = log_mean_kernel(a, b, cfg, -2.0, out.grad_a, out.grad_b);
  out.loss = laa + lbb - 2.0 * lab;
  return out;
}

}  // namespace

PairLoss concept_divergence(const Matrix& z_img, const Matrix& z_loc, const KernelConfig& cfg,
                            DivergenceVariant variant) {
  cfg.validate();
  if (z_img.rows() != z_loc.rows() || z_img.cols() != z_loc.cols()) {
    fail(ErrorCode::kShape, "concept_divergence: blocks " + z_img.shape_string() + " and " +
                                z_loc.shape_string() + " differ");
  }
  if (z_img.rows() == 0) fail(ErrorCode::kUsage, "concept_divergence: empty batch");
  return variant == DivergenceVariant::kAsWritten ? divergence_as_written(z_img, z_loc, cfg)
                                                  : divergence_cs(z_img, z_loc, cfg);
}

namespace {

LossResult zero_result(const AlignmentBatch& batch) {
  LossResult r;
  r.grads.img_raw = Matrix(batch.img_raw.rows(), batch.img_raw.cols());
  r.grads.loc_raw = Matrix(batch.loc_raw.rows(), batch.loc_raw.cols());
  r.grads.img_concept = Matrix(batch.img_concept.rows(), batch.img_concept.cols());
  r.grads.loc_concept = Matrix(batch.loc_concept.rows(), batch.loc_concept.cols());
  return r;
}

}  // namespace

LossResult infonce_loss(const AlignmentBatch& batch, double tau, const LossConfig& cfg) {
  batch.validate();
  LossResult r = zero_result(batch);
  const bool raw = cfg.contrastive_space == ContrastiveSpace::kRaw;
  const Matrix& a = raw ? batch.img_raw : batch.img_concept;
  const Matrix& b = raw ? batch.loc_raw : batch.loc_concept;
  PairLoss pl = infonce(a, b, tau, cfg.normalize_before_contrastive, cfg.symmetric);
  r.infonce = pl.loss;
  r.total = pl.loss;
  r.grads.tau = pl.grad_tau;
  if (raw) {
    r.grads.img_raw = std::move(pl.grad_a);
    r.grads.loc_raw = std::move(pl.grad_b);
  } else {
    r.grads.img_concept = std::move(pl.grad_a);
    r.grads.loc_concept = std::move(pl.grad_b);
  }
  return r;
}

LossResult total_loss(const AlignmentBatch& batch, const LossConfig& cfg, double tau,
                      const KernelConfig& kcfg, LossTerms terms) {
  cfg.validate();
  LossResult r = infonce_loss(batch, tau, cfg);
  PairLoss div = concept_divergence(batch.img_concept, batch.loc_concept, kcfg,
                                    cfg.divergence_variant);
  r.divergence = div.loss;
  if (terms == LossTerms::kInfoNceOnly) {
    r.total = r.infonce;
    return r;
  }
  if (terms == LossTerms::kDivergenceOnly) {
    r.total = div.loss;
    r.grads.img_raw.fill(0.0);
    r.grads.loc_raw.fill(0.0);
    r.grads.img_concept = div.grad_a;
    r.grads.loc_concept = div.grad_b;
    r.grads.tau = 0.0;
    return r;
  }
  r.total = r.infonce + cfg.lambda * div.loss;
  if (cfg.lambda != 0.0) {
    r.grads.img_concept += div.grad_a * cfg.lambda;
    r.grads.loc_concept += div.grad_b * cfg.lambda;
  }
  return r;
}

}  // namespace geoconcept
