#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "encoder.hpp"
#include "geo.hpp"
#include "model.hpp"

namespace geoconcept {

// Encoded GPS candidates. Rows live in the model's retrieval space (raw
// location embeddings, or their concept projections when the model aligns in
// concept space) and are unit norm.
struct LocationGallery {
  std::vector<GeoCoordinate> coordinates;
  Matrix embeddings;  // G x dim
  std::uint64_t model_hash = 0;
  ContrastiveSpace space = ContrastiveSpace::kRaw;

  std::size_t size() const { return coordinates.size(); }
};

// De-duplicates coordinates (first occurrence wins) and encodes them.
LocationGallery build_gallery(const ModelState& model, std::span<const GeoCoordinate> coords);

// Rebuilds the gallery if it was encoded with different parameters.
// Returns true when a rebuild happened.
bool refresh_gallery(LocationGallery& gallery, const ModelState& model);

// Training coordinates followed by a sphere_grid(grid_deg) sample;
// build_gallery removes the duplicates.
std::vector<GeoCoordinate> default_gallery_coordinates(std::span<const GeoCoordinate> train_coords,
                                                       double grid_deg);

struct Prediction {
  GeoCoordinate coordinate;
  std::size_t gallery_index = 0;
  double similarity = 0.0;
  std::optional<double> error_km;
};

// Averages the views (rows, raw image embeddings), normalizes, and returns
// the most cosine-similar gallery entry; ties go to the lowest index.
Prediction predict(const ModelState& model, const LocationGallery& gallery, const Matrix& views);

struct TestItem {
  std::string id;
  Matrix views;  // V x d
  GeoCoordinate truth;
};

struct EvalItem {
  std::string id;
  GeoCoordinate truth;
  Prediction prediction;
};

struct EvalResult {
  std::vector<double> thresholds_km;
  std::vector<double> fractions;
  std::vector<EvalItem> items;

  std::vector<double> errors_km() const;
};

EvalResult evaluate(const ModelState& model, const LocationGallery& gallery,
                    std::span<const TestItem> test, const ThresholdSpec& spec);
// One view per dataset row; every row needs a location.
EvalResult evaluate(const ModelState& model, const LocationGallery& gallery,
                    const ImageDataset& test, const ThresholdSpec& spec);

// Expected accuracy at threshold_km when every prediction is a uniformly
// random gallery entry: mean over test points of the fraction of gallery
// coordinates within the threshold.
double random_gallery_baseline(std::span<const GeoCoordinate> gallery,
                               std::span<const GeoCoordinate> truths, double threshold_km);

}  // namespace geoconcept
