#include "inference.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "error.hpp"

namespace geoconcept {

namespace {

Matrix retrieval_rows(const ModelState& model, std::span<const GeoCoordinate> coords) {
  Matrix x_loc = encode_locations(model.params.location_encoder, coords);
  if (model.config.loss.contrastive_space == ContrastiveSpace::kConcept) {
    x_loc = location_concepts(model, x_loc);
  }
  return normalize_rows(x_loc);
}

}  // namespace

LocationGallery build_gallery(const ModelState& model, std::span<const GeoCoordinate> coords) {
  if (coords.empty()) fail(ErrorCode::kUsage, "build_gallery: empty coordinate list");
  LocationGallery g;
  std::set<std::pair<double, double>> seen;
  for (const auto& c : coords) {
    if (seen.insert({c.lat, c.lon}).second) g.coordinates.push_back(c);
  }
  g.embeddings = retrieval_rows(model, g.coordinates);
  g.model_hash = model_hash(model);
  g.space = model.config.loss.contrastive_space;
  return g;
}

bool refresh_gallery(LocationGallery& gallery, const ModelState& model) {
  if (gallery.model_hash == model_hash(model)) return false;
  gallery = build_gallery(model, gallery.coordinates);
  return true;
}

std::vector<GeoCoordinate> default_gallery_coordinates(std::span<const GeoCoordinate> train_coords,
                                                       double grid_deg) {
  std::vector<GeoCoordinate> out(train_coords.begin(), train_coords.end());
  if (grid_deg > 0.0) {
    const auto grid = sphere_grid(grid_deg);
    out.insert(out.end(), grid.begin(), grid.end());
  }
  return out;
}

Prediction predict(const ModelState& model, const LocationGallery& gallery, const Matrix& views) {
  if (views.rows() == 0) fail(ErrorCode::kUsage, "predict: no views given");
  if (views.cols() != model.dim()) {
    fail(ErrorCode::kShape, "predict: view dim " + std::to_string(views.cols()) +
                                " does not match model dim " + std::to_string(model.dim()));
  }
  if (gallery.size() == 0) fail(ErrorCode::kUsage, "predict: empty gallery");
  if (gallery.model_hash != model_hash(model)) {
    fail(ErrorCode::kValidation, "predict: gallery was built for different model parameters");
  }
  Matrix query(1, views.cols());
  for (std::size_t v = 0; v < views.rows(); ++v) {
    for (std::size_t c = 0; c < views.cols(); ++c) query[c] += views(v, c);
  }
  query *= 1.0 / static_cast<double>(views.rows());
  if (normalize_in_place(query.values()) == 0.0) {
    fail(ErrorCode::kNumeric, "predict: averaged views have zero norm");
  }
  if (gallery.space == ContrastiveSpace::kConcept) {
    query = image_concepts(model, query);
    if (normalize_in_place(query.values()) == 0.0) {
      fail(ErrorCode::kNumeric, "predict: concept activation of the query is zero");
    }
  }
  Prediction best;
  best.similarity = -2.0;
  for (std::size_t g = 0; g < gallery.size(); ++g) {
    const double s = dot(query.values(), gallery.embeddings.row(g));
    if (s > best.similarity) {
      best.similarity = s;
      best.gallery_index = g;
    }
  }
  best.similarity = std::clamp(best.similarity, -1.0, 1.0);
  best.coordinate = gallery.coordinates[best.gallery_index];
  return best;
}

std::vector<double> EvalResult::errors_km() const {
  std::vector<double> out;
  out.reserve(items.size());
  for (const auto& it : items) out.push_back(*it.prediction.error_km);
  return out;
}

EvalResult evaluate(const ModelState& model, const LocationGallery& gallery,
                    std::span<const TestItem> test, const ThresholdSpec& spec) {
  if (test.empty()) fail(ErrorCode::kUsage, "evaluate: empty test set");
  EvalResult r;
  r.thresholds_km = spec.thresholds_km();
  for (const auto& item : test) {
    Prediction p = predict(model, gallery, item.views);
    p.error_km = haversine_km(p.coordinate, item.truth);
    r.items.push_back({item.id, item.truth, p});
  }
  r.fractions = threshold_accuracy(r.errors_km(), spec);
  return r;
}

EvalResult evaluate(const ModelState& model, const LocationGallery& gallery,
                    const ImageDataset& test, const ThresholdSpec& spec) {
  if (!test.fully_located()) fail(ErrorCode::kData, "evaluate: every test item needs a location");
  std::vector<TestItem> items;
  items.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    const auto row = test.vectors.row(i);
    items.push_back({test.ids[i], Matrix::row_vector(row), *test.locations[i]});
  }
  return evaluate(model, gallery, items, spec);
}

double random_gallery_baseline(std::span<const GeoCoordinate> gallery,
                               std::span<const GeoCoordinate> truths, double threshold_km) {
  if (gallery.empty() || truths.empty()) {
    fail(ErrorCode::kUsage, "random_gallery_baseline: empty gallery or test set");
  }
  double acc = 0.0;
  for (const auto& t : truths) {
    std::size_t hits = 0;
    for (const auto& g : gallery) {
      if (haversine_km(t, g) <= threshold_km) ++hits;
    }
    acc += static_cast<double>(hits) / static_cast<double>(gallery.size());
  }
  return acc / static_cast<double>(truths.size());
}

}  // namespace geoconcept
