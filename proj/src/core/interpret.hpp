#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geo.hpp"
#include "inference.hpp"
#include "model.hpp"
#include "probe.hpp"

namespace geoconcept {

// Zeroes everything but the k largest values; ties keep the lower index.
std::vector<double> sparsify_top_k(std::span<const double> z, std::size_t k);

struct ConceptScore {
  std::string name;
  std::size_t index = 0;  // position within the model's concept selection
  double score = 0.0;
};

struct Explanation {
  std::string image_id;
  std::vector<ConceptScore> top;  // descending score
  std::vector<double> sparse;     // length k, zeros outside the top set
  std::optional<GeoCoordinate> predicted;
  std::vector<std::string> warnings;
};

inline constexpr std::size_t kDefaultTopK = 20;

Explanation explain(const ModelState& model, const std::string& image_id,
                    std::span<const double> x_img, const std::optional<Prediction>& prediction,
                    std::size_t k_top = kDefaultTopK);

double median(std::vector<double> values);

struct InfluenceEntry {
  std::string concept_name;
  std::size_t index = 0;
  double median = 0.0;
  std::size_t support = 0;
};

struct InfluenceBin {
  ErrorBin bin;
  std::size_t images = 0;
  std::vector<InfluenceEntry> entries;  // concepts with >= min_support images, by index
  std::vector<InfluenceEntry> top;      // highest medians
  std::vector<InfluenceEntry> lowest;   // lowest medians
};

struct InfluenceTable {
  std::vector<InfluenceBin> bins;  // empty bins are omitted
  std::vector<std::string> notices;
};

// Median of each concept's retained (non-zero) sparse score per error bin.
InfluenceTable influence_table(std::span<const Explanation> explanations,
                               std::span<const double> errors_km, std::size_t min_support = 5,
                               std::size_t table_n = 8);

struct Differential {
  std::string label;
  std::string concept_name;
  std::size_t index = 0;
  double class_mean = 0.0;
  double differential = 0.0;  // class mean minus the pooled mean of all other classes
};

struct ClassDifferential {
  std::vector<std::string> labels;
  std::vector<std::string> concept_names;
  Matrix class_means;    // labels x k
  Matrix differentials;  // labels x k

  // Top-m positive-to-negative differentials per class as Sankey edges.
  std::vector<Differential> top(std::size_t m) const;
};

ClassDifferential class_differential(const std::map<std::string, std::vector<Explanation>>& groups);

struct ConceptMapPoint {
  GeoCoordinate location;
  double similarity = 0.0;
  std::optional<std::string> region;
};

struct ConceptMap {
  std::string concept_name;
  std::vector<ConceptMapPoint> points;
  std::map<std::string, double> region_means;
};

// Cosine similarity between encoded points and the concept's frozen text
// embedding (or the learned basis column when use_basis is set).
ConceptMap concept_map(const ModelState& model, const std::string& concept_name,
                       std::span<const GeoCoordinate> points,
                       std::span<const std::string> regions = {}, bool use_basis = false);

double pearson(std::span<const double> x, std::span<const double> y);

struct KMeansResult {
  std::vector<std::size_t> assignments;
  Matrix centroids;                 // k x dim
  std::vector<double> objective;    // within-cluster sum of squares after each assignment
  std::size_t iterations = 0;
  bool converged = false;
};

KMeansResult kmeans(const Matrix& points, std::size_t k, std::uint64_t seed,
                    std::size_t max_iter = 300);

struct LinearProbeConfig {
  double lr = 0.5;
  std::size_t epochs = 500;
  double l2 = 0.0;
};

struct ContributionResult {
  std::vector<std::size_t> classes;  // sorted class ids
  Matrix weights;                    // classes x k, raw
  Matrix contributions;              // classes x k, each row sums to 1 in |.|
  double train_accuracy = 0.0;
};

// Softmax regression on concept activations by full-batch gradient descent.
ContributionResult linear_probe_contributions(const Matrix& activations,
                                              std::span<const std::size_t> labels,
                                              const LinearProbeConfig& cfg = {});

}  // namespace geoconcept
