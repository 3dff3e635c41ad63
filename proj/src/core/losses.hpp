#pragma once

#include <span>
#include <string>

#include "numkernel.hpp"

namespace geoconcept {

enum class ContrastiveSpace { kRaw, kConcept };
enum class DivergenceVariant { kAsWritten, kCsDivergence };

const char* contrastive_space_name(ContrastiveSpace s);
ContrastiveSpace contrastive_space_from_name(const std::string& name);
const char* divergence_variant_name(DivergenceVariant v);
DivergenceVariant divergence_variant_from_name(const std::string& name);

struct KernelConfig {
  double sigma = 1.0;
  void validate() const;
};

inline constexpr double kTauMin = 1e-3;
inline constexpr double kTauMax = 100.0;

struct LossConfig {
  double lambda = 10.0;
  double temperature_init = 0.07;
  ContrastiveSpace contrastive_space = ContrastiveSpace::kRaw;
  DivergenceVariant divergence_variant = DivergenceVariant::kAsWritten;
  bool normalize_before_contrastive = true;
  // Adds the location-to-image direction and averages the two.
  bool symmetric = false;
  void validate() const;
};

// N image/location pairs: raw d-dim rows and their k-dim concept projections.
struct AlignmentBatch {
  Matrix img_raw;
  Matrix loc_raw;
  Matrix img_concept;
  Matrix loc_concept;

  std::size_t size() const { return img_raw.rows(); }
  void validate() const;
};

// exp(-|x - y|^2 / (2 sigma^2)).
double gaussian_kernel(std::span<const double> x, std::span<const double> y,
                       const KernelConfig& cfg);
// -|x - y|^2 / (2 sigma^2), without the exp/log round trip.
double log_gaussian_kernel(std::span<const double> x, std::span<const double> y,
                           const KernelConfig& cfg);

struct PairLoss {
  double loss = 0.0;
  Matrix grad_a;  // dL/d(rows of a)
  Matrix grad_b;  // dL/d(rows of b)
  double grad_tau = 0.0;
};

// -1/N sum_i log softmax_j(a_i . b_j / tau)[i], row-wise log-sum-exp
// stabilized. With normalize=true the rows are L2-normalized first and the
// gradients flow through the normalization.
PairLoss infonce(const Matrix& a, const Matrix& b, double tau, bool normalize,
                 bool symmetric = false);

// as_written: 1/N^2 sum_ij [log K(a_i,a_j) + log K(b_i,b_j) - 2 log K(a_i,b_j)]
// cs_divergence: log mean K_aa + log mean K_bb - 2 log mean K_ab
PairLoss concept_divergence(const Matrix& z_img, const Matrix& z_loc, const KernelConfig& cfg,
                            DivergenceVariant variant);

struct LossGradients {
  Matrix img_raw;
  Matrix loc_raw;
  Matrix img_concept;
  Matrix loc_concept;
  double tau = 0.0;
};

struct LossResult {
  double total = 0.0;
  double infonce = 0.0;
  double divergence = 0.0;
  LossGradients grads;
};

// InfoNCE in the configured space (gradients land on the raw or concept
// blocks accordingly).
LossResult infonce_loss(const AlignmentBatch& batch, double tau, const LossConfig& cfg);

// Which part of the objective contributes to `total` and the gradients.
// Diagnostics and gradient checks use the single-term modes.
enum class LossTerms { kTotal, kInfoNceOnly, kDivergenceOnly };

// infonce + lambda * divergence (or a single unweighted term).
LossResult total_loss(const AlignmentBatch& batch, const LossConfig& cfg, double tau,
                      const KernelConfig& kcfg, LossTerms terms = LossTerms::kTotal);

}  // namespace geoconcept
