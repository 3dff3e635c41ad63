#include "synthworld.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>

#include "error.hpp"
#include "rng.hpp"

namespace geoconcept {

void WorldSpec::validate() const {
  if (n_concepts == 0 || dim == 0) fail(ErrorCode::kUsage, "world needs n_concepts > 0 and dim > 0");
  if (!(bandwidth_km_min > 0.0) || bandwidth_km_max < bandwidth_km_min) {
    fail(ErrorCode::kUsage, "world bandwidth range must be positive and ordered");
  }
  if (!(amplitude_min >= 0.0) || amplitude_max < amplitude_min) {
    fail(ErrorCode::kUsage, "world amplitude range must be non-negative and ordered");
  }
  if (!(noise_sigma >= 0.0)) fail(ErrorCode::kUsage, "noise_sigma must be >= 0");
  if (!bumps.empty()) {
    if (bumps.size() != n_concepts) {
      fail(ErrorCode::kUsage, "explicit bumps must list one entry per concept");
    }
    for (const auto& list : bumps) {
      for (const auto& b : list) {
        if (!(b.amplitude >= 0.0)) fail(ErrorCode::kUsage, "bump amplitudes must be >= 0");
        if (!(b.bandwidth_km > 0.0)) fail(ErrorCode::kUsage, "bump bandwidths must be > 0");
      }
    }
  }
}

GeoCoordinate sample_sphere(Rng& rng) {
  const double u = rng.uniform();
  const double v = rng.uniform();
  const double lat = std::asin(2.0 * u - 1.0) * 180.0 / std::numbers::pi;
  const double lon = -180.0 + 360.0 * v;
  return GeoCoordinate::make(lat, lon);
}

WorldSpec expand_world(WorldSpec spec) {
  spec.validate();
  if (!spec.bumps.empty()) return spec;
  Rng rng(derive_seed(spec.seed, 0x42554d50));  // "BUMP"
  spec.bumps.resize(spec.n_concepts);
  for (auto& list : spec.bumps) {
    for (std::size_t b = 0; b < spec.bumps_per_concept; ++b) {
      Bump bump;
      bump.center = sample_sphere(rng);
      bump.bandwidth_km = rng.uniform(spec.bandwidth_km_min, spec.bandwidth_km_max);
      bump.amplitude = rng.uniform(spec.amplitude_min, spec.amplitude_max);
      list.push_back(bump);
    }
  }
  return spec;
}

double concept_intensity(const WorldSpec& spec, std::size_t concept_index, const GeoCoordinate& loc) {
  if (concept_index >= spec.bumps.size()) {
    fail(ErrorCode::kUsage, "concept_intensity: concept index " + std::to_string(concept_index) +
                                " out of range (was expand_world applied?)");
  }
  double w = 0.0;
  for (const auto& b : spec.bumps[concept_index]) {
    const double d = haversine_km(loc, b.center);
    w += b.amplitude * std::exp(-(d * d) / (2.0 * b.bandwidth_km * b.bandwidth_km));
  }
  return w;
}

ConceptSet SyntheticWorld::concept_set() const {
  return ConceptSet(concept_names, concept_embeddings);
}

namespace {

Matrix random_unit_columns(std::size_t d, std::size_t n, bool orthogonalize, Rng& rng) {
  Matrix e(d, n);
  for (double& v : e.values()) v = rng.normal();
  for (std::size_t c = 0; c < n; ++c) {
    if (orthogonalize) {
      // Modified Gram-Schmidt against the previous columns.
      for (std::size_t p = 0; p < c; ++p) {
        double proj = 0.0;
        for (std::size_t r = 0; r < d; ++r) proj += e(r, c) * e(r, p);
        for (std::size_t r = 0; r < d; ++r) e(r, c) -= proj * e(r, p);
      }
    }
    double ss = 0.0;
    for (std::size_t r = 0; r < d; ++r) ss += e(r, c) * e(r, c);
    const double norm = std::sqrt(ss);
    for (std::size_t r = 0; r < d; ++r) e(r, c) /= norm;
  }
  return e;
}

std::vector<SyntheticSample> draw_samples(const WorldSpec& spec, const Matrix& concepts,
                                          std::size_t count, std::uint64_t salt) {
  Rng loc_rng(derive_seed(spec.seed, salt));
  Rng noise_rng(derive_seed(spec.seed, salt + 1));
  std::vector<SyntheticSample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    SyntheticSample s;
    s.location = sample_sphere(loc_rng);
    s.true_intensities.resize(spec.n_concepts);
    s.x_img.assign(spec.dim, 0.0);
    std::size_t strongest = 0;
    for (std::size_t c = 0; c < spec.n_concepts; ++c) {
      const double w = concept_intensity(spec, c, s.location);
      s.true_intensities[c] = w;
      if (w > s.true_intensities[strongest]) strongest = c;
      for (std::size_t r = 0; r < spec.dim; ++r) s.x_img[r] += w * concepts(r, c);
    }
    for (double& v : s.x_img) v += spec.noise_sigma * noise_rng.normal();
    if (normalize_in_place(s.x_img) == 0.0) {
      // Every intensity underflowed and there is no noise: point along the
      // concept that is least far away.
      for (std::size_t r = 0; r < spec.dim; ++r) s.x_img[r] = concepts(r, strongest);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

SyntheticWorld generate(const WorldSpec& input) {
  SyntheticWorld world;
  world.spec = expand_world(input);
  const WorldSpec& spec = world.spec;
  const bool can_orthogonalize = spec.n_concepts <= spec.dim;
  if (!can_orthogonalize) {
    world.warnings.push_back("n_concepts > dim: concept vectors cannot be linearly independent");
  }
  const auto& vocab = sample_vocabulary();
  for (std::size_t c = 0; c < spec.n_concepts; ++c) {
    if (spec.n_concepts <= vocab.size()) {
      world.concept_names.push_back(vocab[c]);
    } else {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "concept_%03zu", c);
      world.concept_names.emplace_back(buf);
    }
  }
  Rng concept_rng(derive_seed(spec.seed, 0x434f4e43));  // "CONC"
  world.concept_embeddings = random_unit_columns(spec.dim, spec.n_concepts,
                                                 spec.orthogonalize && can_orthogonalize, concept_rng);
  world.train = draw_samples(spec, world.concept_embeddings, spec.n_train, 0x5452);  // "TR"
  world.test = draw_samples(spec, world.concept_embeddings, spec.n_test, 0x5445);    // "TE"
  return world;
}

ImageDataset to_dataset(const std::vector<SyntheticSample>& samples, const std::string& id_prefix) {
  ImageDataset ds;
  const std::size_t d = samples.empty() ? 0 : samples.front().x_img.size();
  ds.vectors = Matrix(samples.size(), d);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    ds.ids.push_back(id_prefix + "_" + std::to_string(i));
    std::copy(samples[i].x_img.begin(), samples[i].x_img.end(), ds.vectors.row(i).begin());
    ds.locations.emplace_back(samples[i].location);
  }
  return ds;
}

Matrix intensity_matrix(const std::vector<SyntheticSample>& samples) {
  const std::size_t n = samples.empty() ? 0 : samples.front().true_intensities.size();
  Matrix m(samples.size(), n);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].true_intensities.begin(), samples[i].true_intensities.end(),
              m.row(i).begin());
  }
  return m;
}

}  // namespace geoconcept
