#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geo.hpp"
#include "numkernel.hpp"
#include "rng.hpp"

namespace geoconcept {

enum class Activation { kRelu, kTanh, kIdentity };

const char* activation_name(Activation a);
Activation activation_from_name(const std::string& name);

// weight is (out x in), bias is (1 x out): y = x W^T + b.
struct DenseLayer {
  Matrix weight;
  Matrix bias;
};

struct MlpParams {
  std::vector<DenseLayer> layers;
  Activation activation = Activation::kRelu;

  // He-scaled Gaussian weights for hidden layers, 1/sqrt(fan_in) for the
  // output layer, zero biases.
  static MlpParams create(std::size_t input_dim, std::span<const std::size_t> hidden_dims,
                          std::size_t output_dim, Rng& rng,
                          Activation activation = Activation::kRelu);

  std::size_t input_dim() const;
  std::size_t output_dim() const;
  std::vector<std::size_t> hidden_dims() const;
  // Same layer shapes, all zeros. Used for gradient accumulators.
  MlpParams zeros_like() const;
};

// Per-layer inputs and pre-activations recorded by the forward pass.
struct MlpCache {
  std::vector<Matrix> inputs;
  std::vector<Matrix> preacts;
};

// Batched forward pass; rows of x are samples. No nonlinearity after the last
// layer.
Matrix mlp_forward(const MlpParams& params, const Matrix& x, MlpCache* cache = nullptr);
std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x);

// Accumulates parameter gradients into `grads` and returns dL/dx (an empty
// matrix when need_input_grad is false).
Matrix mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& upstream,
                    MlpParams& grads, bool need_input_grad = true);

struct MlpBackwardResult {
  MlpParams param_grads;
  std::vector<double> input_grad;
};
MlpBackwardResult mlp_backward(const MlpParams& params, std::span<const double> x,
                               std::span<const double> upstream);

struct LocationEncoderConfig {
  std::vector<double> scales{1.0, 4.0, 16.0};
  std::size_t frequencies = 64;
  std::size_t hidden = 256;
  std::size_t output_dim = 64;
};

// Multi-scale random Fourier feature encoder for GPS coordinates. Frequencies
// are fixed at creation; only the per-scale MLP branches train.
struct LocationEncoderParams {
  LocationEncoderConfig config;
  std::vector<Matrix> frequencies;  // one (3 x m) matrix per scale
  std::vector<MlpParams> branches;  // 2m -> hidden -> output_dim per scale

  static LocationEncoderParams create(const LocationEncoderConfig& config, std::uint64_t seed);
  std::size_t output_dim() const { return config.output_dim; }
};

struct LocationEncoderCache {
  std::vector<MlpCache> branches;
  Matrix unnormalized;  // sum over branches, N x d
  Matrix output;        // row-normalized, N x d
};

// [cos(P W / s), sin(P W / s)] for unit-sphere points P (N x 3).
Matrix fourier_features(const Matrix& points, const Matrix& frequencies, double scale);
Matrix sphere_points(std::span<const GeoCoordinate> locations);

Matrix encode_locations(const LocationEncoderParams& params,
                        std::span<const GeoCoordinate> locations,
                        LocationEncoderCache* cache = nullptr);
std::vector<double> encode_location(const LocationEncoderParams& params,
                                    const GeoCoordinate& location);

// Backpropagates dL/d(output rows) into per-branch parameter gradients.
void encode_locations_backward(const LocationEncoderParams& params,
                               const LocationEncoderCache& cache, const Matrix& upstream,
                               std::vector<MlpParams>& branch_grads);

// Gradient of row-wise L2 normalization: given y and x = y/|y|, maps dL/dx to
// dL/dy.
Matrix normalize_rows_backward(const Matrix& unnormalized, const Matrix& normalized,
                               const Matrix& upstream);
// Returns a copy with every row scaled to unit norm. Zero rows are an error.
Matrix normalize_rows(const Matrix& m);

struct ImageEmbedding {
  std::string id;
  std::vector<double> vector;
  std::optional<GeoCoordinate> true_location;
};

// Columnar set of image embeddings; rows of `vectors` are unit norm.
struct ImageDataset {
  std::vector<std::string> ids;
  Matrix vectors;
  std::vector<std::optional<GeoCoordinate>> locations;

  std::size_t size() const { return ids.size(); }
  std::size_t dim() const { return vectors.cols(); }
  ImageEmbedding item(std::size_t i) const;
  bool fully_located() const;
};

}  // namespace geoconcept
