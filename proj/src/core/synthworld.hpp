#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "concepts.hpp"
#include "encoder.hpp"
#include "geo.hpp"
#include "numkernel.hpp"

namespace geoconcept {

struct Bump {
  GeoCoordinate center;
  double bandwidth_km = 1000.0;
  double amplitude = 1.0;
};

// Synthetic globe: every concept has an intensity field made of Gaussian
// bumps in great-circle distance. Explicit bumps override the seeded ones.
struct WorldSpec {
  std::uint64_t seed = 7;
  std::size_t n_concepts = 16;
  std::size_t dim = 64;
  std::size_t bumps_per_concept = 3;
  double bandwidth_km_min = 800.0;
  double bandwidth_km_max = 2500.0;
  double amplitude_min = 0.5;
  double amplitude_max = 1.5;
  double noise_sigma = 0.05;
  std::size_t n_train = 2000;
  std::size_t n_test = 500;
  bool orthogonalize = true;
  std::vector<std::vector<Bump>> bumps;  // per concept; empty = draw from seed

  void validate() const;
};

// Fills in seeded bumps when none are given.
WorldSpec expand_world(WorldSpec spec);

// w_c(L) = sum_bumps amplitude * exp(-haversine(L, center)^2 / (2 bandwidth^2)).
double concept_intensity(const WorldSpec& spec, std::size_t concept_index, const GeoCoordinate& loc);

struct SyntheticSample {
  GeoCoordinate location;
  std::vector<double> x_img;
  std::vector<double> true_intensities;
};

struct SyntheticWorld {
  WorldSpec spec;  // expanded
  std::vector<std::string> concept_names;
  Matrix concept_embeddings;  // d x n, unit columns
  std::vector<SyntheticSample> train;
  std::vector<SyntheticSample> test;
  std::vector<std::string> warnings;

  ConceptSet concept_set() const;
};

// Uniform point on the sphere (lat = asin(2u - 1)).
GeoCoordinate sample_sphere(Rng& rng);

SyntheticWorld generate(const WorldSpec& spec);

// Image dataset view of a sample list; ids are "<prefix>_<index>".
ImageDataset to_dataset(const std::vector<SyntheticSample>& samples, const std::string& id_prefix);
// N x n_concepts ground-truth intensities.
Matrix intensity_matrix(const std::vector<SyntheticSample>& samples);

}  // namespace geoconcept
