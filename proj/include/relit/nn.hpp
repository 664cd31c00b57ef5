// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace relit::nn {

enum class Activation : std::uint8_t { relu = 0, sigmoid = 1, none = 2 };

const char* to_string(Activation a);

// Batches are stored column-major: one column per sample.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

template <typename T>
struct DenseLayer {
    Matrix<T> weight;  // out x in
    Vector<T> bias;    // out
    Activation activation = Activation::none;

    int in() const { return static_cast<int>(weight.cols()); }
    int out() const { return static_cast<int>(weight.rows()); }
};

template <typename T>
struct AdamMoments {
    Matrix<T> first_weight, second_weight;
    Vector<T> first_bias, second_bias;
};

/// Fixed-topology MLP parameters plus Adam state.
template <typename T>
struct MlpParams {
    std::vector<DenseLayer<T>> layers;
    std::vector<AdamMoments<T>> moments;  // shaped like layers
    std::int64_t step = 0;
    /// Changes whenever the parameters change; forward caches record it.
    std::uint64_t stamp = 0;

    int input_width() const { return layers.empty() ? 0 : layers.front().in(); }
    int output_width() const { return layers.empty() ? 0 : layers.back().out(); }
    std::size_t parameter_count() const;
    void touch();
};

/// Per-layer activations from a forward pass: activations[0] is the input,
/// activations[i + 1] the output of layer i.
template <typename T>
struct ForwardCache {
    std::vector<Matrix<T>> activations;
    std::uint64_t stamp = 0;
};

template <typename T>
struct Gradients {
    std::vector<Matrix<T>> weight;
    std::vector<Vector<T>> bias;

    static Gradients zeros_like(const MlpParams<T>& params);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(T scale);
};

template <typename T>
struct BackwardResult {
    Gradients<T> gradients;
    Matrix<T> input_gradient;  // empty when not requested
};

/// Throws DomainError if the input width does not match the first layer.
template <typename T>
std::pair<Matrix<T>, ForwardCache<T>> forward(const MlpParams<T>& params, const Matrix<T>& input);

/// Forward pass without keeping intermediate activations.
template <typename T>
Matrix<T> forward_inference(const MlpParams<T>& params, const Matrix<T>& input);

/// Reverse pass. Throws DomainError when the cache does not belong to the
/// current parameters or its shapes disagree with the output gradient.
template <typename T>
BackwardResult<T> backward(const MlpParams<T>& params, const ForwardCache<T>& cache, const Matrix<T>& output_grad,
                           bool want_input_gradient = true);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

/// One bias-corrected Adam update in place. A non-finite gradient throws
/// TrainingError naming the offending parameter; params are left untouched.
template <typename T>
void adam_step(MlpParams<T>& params, const Gradients<T>& grads, double learning_rate, const AdamConfig& cfg = {});

/// He-normal weights for relu layers, Glorot-normal otherwise, zero biases.
template <typename T>
MlpParams<T> init_params(std::span<const int> layer_sizes, std::span<const Activation> activations,
                         std::uint64_t seed);

template <typename To, typename From>
MlpParams<To> cast_params(const MlpParams<From>& params) {
    MlpParams<To> out;
    for (const auto& l : params.layers)
        out.layers.push_back({l.weight.template cast<To>(), l.bias.template cast<To>(), l.activation});
    for (const auto& m : params.moments)
        out.moments.push_back({m.first_weight.template cast<To>(), m.second_weight.template cast<To>(),
                               m.first_bias.template cast<To>(), m.second_bias.template cast<To>()});
    out.step = params.step;
    out.touch();
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient checking (64-bit).

/// A parameter tensor viewed as flat storage plus its analytic gradient.
struct ParamTensor {
    std::string name;
    std::span<double> values;
    std::span<const double> analytic;
};

struct GradCheckOptions {
    double step = 1e-4;
    /// Entries checked per tensor, chosen at random; 0 checks every entry.
    std::size_t max_entries_per_tensor = 0;
    std::uint64_t seed = 0;
    /// Finite-difference gradients with magnitude below this are skipped.
    double zero_threshold = 1e-10;
};

struct TensorCheck {
    std::string name;
    double max_relative_error = 0.0;
    std::size_t checked = 0;
    std::size_t skipped = 0;
};

struct GradCheckReport {
    std::vector<TensorCheck> tensors;
    double max_relative_error = 0.0;
    double tolerance = 0.0;

    bool passed() const { return max_relative_error < tolerance; }
};

/// Compares analytic gradients against central differences of `loss`,
/// which must read the (temporarily perturbed) tensor storage.
GradCheckReport grad_check(std::span<const ParamTensor> tensors, const std::function<double()>& loss,
                           double tolerance, const GradCheckOptions& options = {});

using MlpLossAndGradient = std::function<std::pair<double, Gradients<double>>(const MlpParams<double>&)>;

/// Convenience wrapper for a single network.
GradCheckReport grad_check(MlpParams<double>& params, const MlpLossAndGradient& loss, double tolerance,
                           const GradCheckOptions& options = {});

/// Views of every weight/bias of `params` paired with `grads`.
std::vector<ParamTensor> param_tensors(const std::string& prefix, MlpParams<double>& params,
                                       Gradients<double>& grads);

// ---------------------------------------------------------------------------
// Checkpoint files. Layout (all integers and floats little-endian):
//
//   char[4]  "RNLF"
//   u32      format version (1)
//   u32      metadata byte length, then that many bytes (UTF-8 JSON)
//   u32      network count
//   per network: u32 name length, name bytes, u32 layer count,
//                per layer: u32 in, u32 out, u8 activation (0 relu, 1 sigmoid, 2 none)
//   u8       1 if Adam state follows the parameters, else 0
//   payload: per network, per layer: weight (out x in, row-major f32), bias (out f32)
//   adam:    per network: i64 step; per layer: first/second weight moments
//            (row-major f32), first/second bias moments (f32)

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedNetwork {
    std::string name;
    MlpParams<float> params;
};

struct Checkpoint {
    std::string metadata;
    std::vector<NamedNetwork> networks;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, bool include_adam);
/// Throws IoError on unreadable files, ParseError on malformed content.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace relit::nn
