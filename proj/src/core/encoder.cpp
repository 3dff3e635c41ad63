#include "encoder.hpp"

#include <cmath>

#include "error.hpp"

namespace geoconcept {

const char* activation_name(Activation a) {
  switch (a) {
    case Activation::kRelu: return "relu";
    case Activation::kTanh: return "tanh";
    case Activation::kIdentity: return "identity";
  }
  return "?";
}

Activation activation_from_name(const std::string& name) {
  if (name == "relu") return Activation::kRelu;
  if (name == "tanh") return Activation::kTanh;
  if (name == "identity") return Activation::kIdentity;
  fail(ErrorCode::kUsage, "unknown activation '" + name + "'");
}

namespace {

double activate(Activation a, double v) {
  switch (a) {
    case Activation::kRelu: return v > 0.0 ? v : 0.0;
    case Activation::kTanh: return std::tanh(v);
    case Activation::kIdentity: return v;
  }
  return v;
}

double activation_slope(Activation a, double pre) {
  switch (a) {
    case Activation::kRelu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::kTanh: {
      const double t = std::tanh(pre);
      return 1.0 - t * t;
    }
    case Activation::kIdentity: return 1.0;
  }
  return 1.0;
}

void add_bias(Matrix& m, const Matrix& bias) {
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    for (std::size_t c = 0; c < m.cols(); ++c) row[c] += bias[c];
  }
}

}  // namespace

MlpParams MlpParams::create(std::size_t input_dim, std::span<const std::size_t> hidden_dims,
                            std::size_t output_dim, Rng& rng, Activation activation) {
  MlpParams p;
  p.activation = activation;
  std::size_t fan_in = input_dim;
  const std::size_t n_layers = hidden_dims.size() + 1;
  for (std::size_t l = 0; l < n_layers; ++l) {
    const bool last = l + 1 == n_layers;
    const std::size_t fan_out = last ? output_dim : hidden_dims[l];
    const double gain = last ? 1.0 : 2.0;
    const double stddev = std::sqrt(gain / static_cast<double>(fan_in));
    DenseLayer layer{Matrix(fan_out, fan_in), Matrix(1, fan_out)};
    for (double& w : layer.weight.values()) w = stddev * rng.normal();
    p.layers.push_back(std::move(layer));
    fan_in = fan_out;
  }
  return p;
}

std::size_t MlpParams::input_dim() const {
  return layers.empty() ? 0 : layers.front().weight.cols();
}

std::size_t MlpParams::output_dim() const {
  return layers.empty() ? 0 : layers.back().weight.rows();
}

std::vector<std::size_t> MlpParams::hidden_dims() const {
  std::vector<std::size_t> dims;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) dims.push_back(layers[l].weight.rows());
  return dims;
}

MlpParams MlpParams::zeros_like() const {
  MlpParams z;
  z.activation = activation;
  for (const auto& layer : layers) {
    z.layers.push_back({Matrix(layer.weight.rows(), layer.weight.cols()),
                        Matrix(1, layer.bias.cols())});
  }
  return z;
}

Matrix mlp_forward(const MlpParams& params, const Matrix& x, MlpCache* cache) {
  if (params.layers.empty()) fail(ErrorCode::kShape, "mlp_forward: MLP has no layers");
  if (x.cols() != params.input_dim()) {
    fail(ErrorCode::kShape, "mlp_forward: input width " + std::to_string(x.cols()) +
                                " does not match first layer " +
                                params.layers.front().weight.shape_string());
  }
  if (cache) {
    cache->inputs.clear();
    cache->preacts.clear();
  }
  Matrix h = x;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix pre = matmul_nt(h, layer.weight);
    add_bias(pre, layer.bias);
    if (cache) cache->inputs.push_back(std::move(h));
    if (l + 1 == params.layers.size()) {
      if (cache) cache->preacts.push_back(pre);
      return pre;
    }
    h = pre;
    for (double& v : h.values()) v = activate(params.activation, v);
    if (cache) cache->preacts.push_back(std::move(pre));
  }
  return h;
}

std::vector<double> mlp_forward(const MlpParams& params, std::span<const double> x) {
  const Matrix out = mlp_forward(params, Matrix::row_vector(x));
  return std::vector<double>(out.values().begin(), out.values().end());
}

Matrix mlp_backward(const MlpParams& params, const MlpCache& cache, const Matrix& upstream,
                    MlpParams& grads, bool need_input_grad) {
  const std::size_t n_layers = params.layers.size();
  if (cache.inputs.size() != n_layers || grads.layers.size() != n_layers) {
    fail(ErrorCode::kShape, "mlp_backward: cache or gradient layout does not match MLP");
  }
  if (upstream.rows() != cache.inputs.front().rows() ||
      upstream.cols() != params.output_dim()) {
    fail(ErrorCode::kShape, "mlp_backward: upstream gradient " + upstream.shape_string() +
                                " does not match output");
  }
  Matrix delta = upstream;
  for (std::size_t l = n_layers; l-- > 0;) {
    const auto& layer = params.layers[l];
    auto& g = grads.layers[l];
    g.weight += matmul_tn(delta, cache.inputs[l]);
    for (std::size_t r = 0; r < delta.rows(); ++r) {
      auto row = delta.row(r);
      for (std::size_t c = 0; c < row.size(); ++c) g.bias[c] += row[c];
    }
    if (l == 0 && !need_input_grad) return Matrix();
    Matrix input_grad = matmul(delta, layer.weight);
    if (l > 0) {
      const Matrix& pre = cache.preacts[l - 1];
      for (std::size_t i = 0; i < input_grad.size(); ++i) {
        input_grad[i] *= activation_slope(params.activation, pre[i]);
      }
    }
    delta = std::move(input_grad);
  }
  return delta;
}

MlpBackwardResult mlp_backward(const MlpParams& params, std::span<const double> x,
                               std::span<const double> upstream) {
  MlpCache cache;
  mlp_forward(params, Matrix::row_vector(x), &cache);
  MlpBackwardResult result{params.zeros_like(), {}};
  const Matrix dx = mlp_backward(params, cache, Matrix::row_vector(upstream), result.param_grads);
  result.input_grad.assign(dx.values().begin(), dx.values().end());
  return result;
}

LocationEncoderParams LocationEncoderParams::create(const LocationEncoderConfig& config,
                                                    std::uint64_t seed) {
  if (config.scales.empty()) fail(ErrorCode::kUsage, "location encoder needs at least one scale");
  if (config.frequencies == 0 || config.hidden == 0 || config.output_dim == 0) {
    fail(ErrorCode::kUsage, "location encoder dimensions must be positive");
  }
  for (double s : config.scales) {
    if (!(s > 0.0)) fail(ErrorCode::kUsage, "location encoder scales must be positive");
  }
  LocationEncoderParams p;
  p.config = config;
  Rng freq_rng(derive_seed(seed, 0x46524551));  // "FREQ"
  Rng mlp_rng(derive_seed(seed, 0x4d4c5030));   // "MLP0"
  const std::size_t hidden[] = {config.hidden};
  for (std::size_t s = 0; s < config.scales.size(); ++s) {
    Matrix w(3, config.frequencies);
    for (double& v : w.values()) v = freq_rng.normal();
    p.frequencies.push_back(std::move(w));
    p.branches.push_back(
        MlpParams::create(2 * config.frequencies, hidden, config.output_dim, mlp_rng));
  }
  return p;
}

Matrix sphere_points(std::span<const GeoCoordinate> locations) {
  Matrix pts(locations.size(), 3);
  for (std::size_t i = 0; i < locations.size(); ++i) {
    const auto p = to_unit_sphere(locations[i]);
    pts(i, 0) = p[0];
    pts(i, 1) = p[1];
    pts(i, 2) = p[2];
  }
  return pts;
}

Matrix fourier_features(const Matrix& points, const Matrix& frequencies, double scale) {
  const Matrix arg = matmul(points, frequencies);
  const std::size_t m = frequencies.cols();
  Matrix out(points.rows(), 2 * m);
  for (std::size_t i = 0; i < points.rows(); ++i) {
    for (std::size_t j = 0; j < m; ++j) {
      const double a = arg(i, j) / scale;
      out(i, j) = std::cos(a);
      out(i, m + j) = std::sin(a);
    }
  }
  return out;
}

Matrix normalize_rows(const Matrix& m) {
  Matrix out = m;
  for (std::size_t r = 0; r < out.rows(); ++r) {
    if (normalize_in_place(out.row(r)) == 0.0) {
      fail(ErrorCode::kNumeric, "cannot normalize zero row " + std::to_string(r));
    }
  }
  return out;
}

Matrix normalize_rows_backward(const Matrix& unnormalized, const Matrix& normalized,
                               const Matrix& upstream) {
  Matrix out(upstream.rows(), upstream.cols());
  for (std::size_t r = 0; r < upstream.rows(); ++r) {
    const double norm = l2_norm(unnormalized.row(r));
    const double proj = dot(normalized.row(r), upstream.row(r));
    for (std::size_t c = 0; c < upstream.cols(); ++c) {
      out(r, c) = (upstream(r, c) - normalized(r, c) * proj) / norm;
    }
  }
  return out;
}

Matrix encode_locations(const LocationEncoderParams& params,
                        std::span<const GeoCoordinate> locations, LocationEncoderCache* cache) {
  const Matrix pts = sphere_points(locations);
  Matrix sum(locations.size(), params.output_dim());
  if (cache) cache->branches.assign(params.branches.size(), {});
  for (std::size_t s = 0; s < params.branches.size(); ++s) {
    const Matrix feats = fourier_features(pts, params.frequencies[s], params.config.scales[s]);
    sum += mlp_forward(params.branches[s], feats, cache ? &cache->branches[s] : nullptr);
  }
  Matrix out = normalize_rows(sum);
  if (cache) {
    cache->unnormalized = std::move(sum);
    cache->output = out;
  }
  return out;
}

std::vector<double> encode_location(const LocationEncoderParams& params,
                                    const GeoCoordinate& location) {
  const Matrix out = encode_locations(params, std::span(&location, 1));
  return std::vector<double>(out.values().begin(), out.values().end());
}

void encode_locations_backward(const LocationEncoderParams& params,
                               const LocationEncoderCache& cache, const Matrix& upstream,
                               std::vector<MlpParams>& branch_grads) {
  if (branch_grads.size() != params.branches.size()) {
    fail(ErrorCode::kShape, "encode_locations_backward: gradient branch count mismatch");
  }
  const Matrix dsum = normalize_rows_backward(cache.unnormalized, cache.output, upstream);
  for (std::size_t s = 0; s < params.branches.size(); ++s) {
    mlp_backward(params.branches[s], cache.branches[s], dsum, branch_grads[s], false);
  }
}

ImageEmbedding ImageDataset::item(std::size_t i) const {
  const auto row = vectors.row(i);
  return {ids[i], std::vector<double>(row.begin(), row.end()), locations[i]};
}

bool ImageDataset::fully_located() const {
  for (const auto& loc : locations) {
    if (!loc) return false;
  }
  return true;
}

}  // namespace geoconcept
