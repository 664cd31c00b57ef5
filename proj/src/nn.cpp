// SPDX-License-Identifier: Apache-2.0

#include "relit/nn.hpp"

#include "relit/error.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

namespace relit::nn {

namespace {

std::uint64_t next_stamp() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
}

template <typename T>
void apply_activation(Matrix<T>& z, Activation a) {
    switch (a) {
        case Activation::relu:
            z = z.cwiseMax(T(0));
            break;
        case Activation::sigmoid:
            z = (T(1) + (-z.array()).exp()).inverse().matrix();
            break;
        case Activation::none:
            break;
    }
}

// Multiplies the upstream gradient by the activation derivative, expressed
// through the layer output.
template <typename T>
void apply_activation_grad(Matrix<T>& grad, const Matrix<T>& output, Activation a) {
    switch (a) {
        case Activation::relu:
            grad = (output.array() > T(0)).select(grad, T(0));
            break;
        case Activation::sigmoid:
            grad.array() *= output.array() * (T(1) - output.array());
            break;
        case Activation::none:
            break;
    }
}

template <typename T>
Matrix<T> layer_forward(const DenseLayer<T>& layer, const Matrix<T>& x) {
    Matrix<T> z(layer.out(), x.cols());
    z.noalias() = layer.weight * x;
    z.colwise() += layer.bias;
    apply_activation(z, layer.activation);
    return z;
}

template <typename T>
void check_input(const MlpParams<T>& params, const Matrix<T>& input) {
    if (params.layers.empty()) throw DomainError("forward: network has no layers");
    if (input.rows() != params.input_width())
        throw DomainError("forward: input width " + std::to_string(input.rows()) + " does not match layer width " +
                          std::to_string(params.input_width()));
}

}  // namespace

const char* to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::sigmoid: return "sigmoid";
        case Activation::none: return "none";
    }
    return "?";
}

template <typename T>
std::size_t MlpParams<T>::parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
}

template <typename T>
void MlpParams<T>::touch() {
    stamp = next_stamp();
}

template <typename T>
Gradients<T> Gradients<T>::zeros_like(const MlpParams<T>& params) {
    Gradients g;
    for (const auto& l : params.layers) {
        g.weight.push_back(Matrix<T>::Zero(l.out(), l.in()));
        g.bias.push_back(Vector<T>::Zero(l.out()));
    }
    return g;
}

template <typename T>
Gradients<T>& Gradients<T>::operator+=(const Gradients& other) {
    if (other.weight.size() != weight.size()) throw DomainError("gradients: layer count mismatch");
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] += other.weight[i];
        bias[i] += other.bias[i];
    }
    return *this;
}

template <typename T>
Gradients<T>& Gradients<T>::operator*=(T scale) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
        weight[i] *= scale;
        bias[i] *= scale;
    }
    return *this;
}

template <typename T>
std::pair<Matrix<T>, ForwardCache<T>> forward(const MlpParams<T>& params, const Matrix<T>& input) {
    check_input(params, input);
    ForwardCache<T> cache;
    cache.stamp = params.stamp;
    cache.activations.reserve(params.layers.size() + 1);
    cache.activations.push_back(input);
    for (const auto& layer : params.layers) cache.activations.push_back(layer_forward(layer, cache.activations.back()));
    Matrix<T> out = cache.activations.back();
    return {std::move(out), std::move(cache)};
}

template <typename T>
Matrix<T> forward_inference(const MlpParams<T>& params, const Matrix<T>& input) {
    check_input(params, input);
    Matrix<T> x = layer_forward(params.layers.front(), input);
    for (std::size_t i = 1; i < params.layers.size(); ++i) x = layer_forward(params.layers[i], x);
    return x;
}

template <typename T>
BackwardResult<T> backward(const MlpParams<T>& params, const ForwardCache<T>& cache, const Matrix<T>& output_grad,
                           bool want_input_gradient) {
    const std::size_t n_layers = params.layers.size();
    if (cache.stamp != params.stamp || cache.activations.size() != n_layers + 1)
        throw DomainError("backward: forward cache does not belong to these parameters");
    const Matrix<T>& out = cache.activations.back();
    if (output_grad.rows() != out.rows() || output_grad.cols() != out.cols())
        throw DomainError("backward: output gradient shape does not match the cached output");

    BackwardResult<T> result;
    result.gradients.weight.resize(n_layers);
    result.gradients.bias.resize(n_layers);

    Matrix<T> grad = output_grad;
    for (std::size_t k = n_layers; k-- > 0;) {
        const auto& layer = params.layers[k];
        const Matrix<T>& x = cache.activations[k];
        if (x.rows() != layer.in()) throw DomainError("backward: cached activation shape mismatch");
        apply_activation_grad(grad, cache.activations[k + 1], layer.activation);
        result.gradients.weight[k].noalias() = grad * x.transpose();
        result.gradients.bias[k] = grad.rowwise().sum();
        if (k > 0 || want_input_gradient) {
            Matrix<T> upstream(layer.in(), grad.cols());
            upstream.noalias() = layer.weight.transpose() * grad;
            grad = std::move(upstream);
        }
    }
    if (want_input_gradient) result.input_gradient = std::move(grad);
    return result;
}

template <typename T>
void adam_step(MlpParams<T>& params, const Gradients<T>& grads, double learning_rate, const AdamConfig& cfg) {
    const std::size_t n_layers = params.layers.size();
    if (grads.weight.size() != n_layers || grads.bias.size() != n_layers)
        throw DomainError("adam_step: gradient layer count mismatch");
    for (std::size_t i = 0; i < n_layers; ++i) {
        const auto& l = params.layers[i];
        if (grads.weight[i].rows() != l.weight.rows() || grads.weight[i].cols() != l.weight.cols() ||
            grads.bias[i].size() != l.bias.size())
            throw DomainError("adam_step: gradient shape mismatch at layer " + std::to_string(i));
        if (!grads.weight[i].allFinite()) {
            Eigen::Index r = 0, c = 0;
            for (Eigen::Index cc = 0; cc < grads.weight[i].cols(); ++cc)
                for (Eigen::Index rr = 0; rr < grads.weight[i].rows(); ++rr)
                    if (!std::isfinite(static_cast<double>(grads.weight[i](rr, cc)))) {
                        r = rr;
                        c = cc;
                    }
            throw TrainingError("adam_step: non-finite gradient at layer " + std::to_string(i) + " weight (" +
                                std::to_string(r) + ", " + std::to_string(c) + ")");
        }
        if (!grads.bias[i].allFinite())
            throw TrainingError("adam_step: non-finite gradient at layer " + std::to_string(i) + " bias");
    }
    if (params.moments.size() != n_layers) {
        params.moments.clear();
        for (const auto& l : params.layers)
            params.moments.push_back({Matrix<T>::Zero(l.out(), l.in()), Matrix<T>::Zero(l.out(), l.in()),
                                      Vector<T>::Zero(l.out()), Vector<T>::Zero(l.out())});
    }

    params.step += 1;
    const T b1 = static_cast<T>(cfg.beta1);
    const T b2 = static_cast<T>(cfg.beta2);
    const double t = static_cast<double>(params.step);
    const T correction1 = static_cast<T>(1.0 - std::pow(cfg.beta1, t));
    const T correction2 = static_cast<T>(1.0 - std::pow(cfg.beta2, t));
    const T lr = static_cast<T>(learning_rate);
    const T eps = static_cast<T>(cfg.epsilon);

    auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
        m.array() = b1 * m.array() + (T(1) - b1) * g.array();
        v.array() = b2 * v.array() + (T(1) - b2) * g.array().square();
        param.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
    };
    for (std::size_t i = 0; i < n_layers; ++i) {
        auto& l = params.layers[i];
        auto& mo = params.moments[i];
        update(l.weight, mo.first_weight, mo.second_weight, grads.weight[i]);
        update(l.bias, mo.first_bias, mo.second_bias, grads.bias[i]);
    }
    params.touch();
}

template <typename T>
MlpParams<T> init_params(std::span<const int> layer_sizes, std::span<const Activation> activations,
                         std::uint64_t seed) {
    if (layer_sizes.size() < 2) throw DomainError("init_params: need at least one layer");
    if (activations.size() != layer_sizes.size() - 1)
        throw DomainError("init_params: one activation per layer required");
    for (int s : layer_sizes)
        if (s <= 0) throw DomainError("init_params: layer sizes must be positive");

    std::mt19937_64 rng(seed);
    MlpParams<T> params;
    for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
        const int fan_in = layer_sizes[i];
        const int fan_out = layer_sizes[i + 1];
        const Activation act = activations[i];
        const double variance = act == Activation::relu ? 2.0 / fan_in : 2.0 / (fan_in + fan_out);
        std::normal_distribution<double> dist(0.0, std::sqrt(variance));
        DenseLayer<T> layer;
        layer.weight.resize(fan_out, fan_in);
        // Row-major draw order so the stream does not depend on storage order.
        for (int r = 0; r < fan_out; ++r)
            for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = static_cast<T>(dist(rng));
        layer.bias = Vector<T>::Zero(fan_out);
        layer.activation = act;
        params.layers.push_back(std::move(layer));
    }
    params.touch();
    return params;
}

// ---------------------------------------------------------------------------

GradCheckReport grad_check(std::span<const ParamTensor> tensors, const std::function<double()>& loss,
                           double tolerance, const GradCheckOptions& options) {
    GradCheckReport report;
    report.tolerance = tolerance;
    std::mt19937_64 rng(options.seed);
    for (const auto& tensor : tensors) {
        if (tensor.values.size() != tensor.analytic.size())
            throw DomainError("grad_check: gradient shape mismatch for " + tensor.name);
        std::vector<std::size_t> indices(tensor.values.size());
        std::iota(indices.begin(), indices.end(), std::size_t{0});
        if (options.max_entries_per_tensor > 0 && indices.size() > options.max_entries_per_tensor) {
            std::shuffle(indices.begin(), indices.end(), rng);
            indices.resize(options.max_entries_per_tensor);
            std::sort(indices.begin(), indices.end());
        }
        TensorCheck check;
        check.name = tensor.name;
        for (std::size_t idx : indices) {
            double& x = tensor.values[idx];
            const double saved = x;
            x = saved + options.step;
            const double plus = loss();
            x = saved - options.step;
            const double minus = loss();
            x = saved;
            const double numeric = (plus - minus) / (2.0 * options.step);
            if (std::abs(numeric) < options.zero_threshold) {
                ++check.skipped;
                continue;
            }
            const double rel = std::abs(tensor.analytic[idx] - numeric) / std::abs(numeric);
            check.max_relative_error = std::max(check.max_relative_error, rel);
            ++check.checked;
        }
        report.max_relative_error = std::max(report.max_relative_error, check.max_relative_error);
        report.tensors.push_back(std::move(check));
    }
    return report;
}

std::vector<ParamTensor> param_tensors(const std::string& prefix, MlpParams<double>& params,
                                       Gradients<double>& grads) {
    std::vector<ParamTensor> out;
    for (std::size_t i = 0; i < params.layers.size(); ++i) {
        auto& l = params.layers[i];
        const std::string base = prefix + "layer" + std::to_string(i);
        out.push_back({base + ".weight", std::span<double>(l.weight.data(), static_cast<std::size_t>(l.weight.size())),
                       std::span<const double>(grads.weight[i].data(), static_cast<std::size_t>(grads.weight[i].size()))});
        out.push_back({base + ".bias", std::span<double>(l.bias.data(), static_cast<std::size_t>(l.bias.size())),
                       std::span<const double>(grads.bias[i].data(), static_cast<std::size_t>(grads.bias[i].size()))});
    }
    return out;
}

GradCheckReport grad_check(MlpParams<double>& params, const MlpLossAndGradient& loss, double tolerance,
                           const GradCheckOptions& options) {
    auto [value, grads] = loss(params);
    (void)value;
    const auto tensors = param_tensors("", params, grads);
    return grad_check(tensors, [&] {
        params.touch();
        return loss(params).first;
    }, tolerance, options);
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

class Writer {
public:
    explicit Writer(std::ostream& os) : os_(os) {}
    void u8(std::uint8_t v) { os_.put(static_cast<char>(v)); }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void i64(std::int64_t v) {
        const auto u = static_cast<std::uint64_t>(v);
        for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(u >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void bytes(const std::string& s) { os_.write(s.data(), static_cast<std::streamsize>(s.size())); }
    void row_major(const Matrix<float>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) f32(m(r, c));
    }
    void vec(const Vector<float>& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) f32(v(i));
    }

private:
    std::ostream& os_;
};

class Reader {
public:
    Reader(std::istream& is, std::string path) : is_(is), path_(std::move(path)) {}
    std::uint8_t u8() {
        const int c = is_.get();
        if (c == std::char_traits<char>::eof()) throw ParseError(path_ + ": truncated checkpoint");
        return static_cast<std::uint8_t>(c);
    }
    std::uint32_t u32() {
        std::uint32_t v = 0;
        for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
        return v;
    }
    std::int64_t i64() {
        std::uint64_t v = 0;
        for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
        return static_cast<std::int64_t>(v);
    }
    float f32() { return std::bit_cast<float>(u32()); }
    std::string bytes(std::uint32_t n) {
        if (n > (1u << 26)) throw ParseError(path_ + ": implausible string length in checkpoint");
        std::string s(n, '\0');
        is_.read(s.data(), static_cast<std::streamsize>(n));
        if (static_cast<std::uint32_t>(is_.gcount()) != n) throw ParseError(path_ + ": truncated checkpoint");
        return s;
    }
    void row_major(Matrix<float>& m) {
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = f32();
    }
    void vec(Vector<float>& v) {
        for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = f32();
    }
    const std::string& path() const { return path_; }

private:
    std::istream& is_;
    std::string path_;
};

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt, bool include_adam) {
    std::ostringstream buffer(std::ios::binary);
    Writer w(buffer);
    w.bytes("RNLF");
    w.u32(kCheckpointVersion);
    w.u32(static_cast<std::uint32_t>(ckpt.metadata.size()));
    w.bytes(ckpt.metadata);
    w.u32(static_cast<std::uint32_t>(ckpt.networks.size()));
    for (const auto& net : ckpt.networks) {
        w.u32(static_cast<std::uint32_t>(net.name.size()));
        w.bytes(net.name);
        w.u32(static_cast<std::uint32_t>(net.params.layers.size()));
        for (const auto& l : net.params.layers) {
            w.u32(static_cast<std::uint32_t>(l.in()));
            w.u32(static_cast<std::uint32_t>(l.out()));
            w.u8(static_cast<std::uint8_t>(l.activation));
        }
    }
    const bool adam = include_adam;
    w.u8(adam ? 1 : 0);
    for (const auto& net : ckpt.networks)
        for (const auto& l : net.params.layers) {
            w.row_major(l.weight);
            w.vec(l.bias);
        }
    if (adam) {
        for (const auto& net : ckpt.networks) {
            w.i64(net.params.step);
            // A network that has not stepped yet has no moments; they are zero.
            const bool have = net.params.moments.size() == net.params.layers.size();
            for (std::size_t i = 0; i < net.params.layers.size(); ++i) {
                const auto& l = net.params.layers[i];
                if (have) {
                    const auto& m = net.params.moments[i];
                    w.row_major(m.first_weight);
                    w.row_major(m.second_weight);
                    w.vec(m.first_bias);
                    w.vec(m.second_bias);
                } else {
                    const Matrix<float> zw = Matrix<float>::Zero(l.out(), l.in());
                    const Vector<float> zb = Vector<float>::Zero(l.out());
                    w.row_major(zw);
                    w.row_major(zw);
                    w.vec(zb);
                    w.vec(zb);
                }
            }
        }
    }

    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw IoError("cannot open checkpoint for writing: " + path.string());
    const std::string data = buffer.str();
    os.write(data.data(), static_cast<std::streamsize>(data.size()));
    if (!os) throw IoError("failed writing checkpoint: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open checkpoint: " + path.string());
    Reader r(is, path.string());
    if (r.bytes(4) != "RNLF") throw ParseError(path.string() + ": bad checkpoint magic");
    const std::uint32_t version = r.u32();
    if (version != kCheckpointVersion)
        throw ParseError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
    Checkpoint ckpt;
    ckpt.metadata = r.bytes(r.u32());
    const std::uint32_t n_networks = r.u32();
    if (n_networks > 64) throw ParseError(path.string() + ": implausible network count");
    for (std::uint32_t n = 0; n < n_networks; ++n) {
        NamedNetwork net;
        net.name = r.bytes(r.u32());
        const std::uint32_t n_layers = r.u32();
        if (n_layers == 0 || n_layers > 256) throw ParseError(path.string() + ": implausible layer count");
        for (std::uint32_t i = 0; i < n_layers; ++i) {
            const std::uint32_t in = r.u32();
            const std::uint32_t out = r.u32();
            const std::uint8_t act = r.u8();
            if (in == 0 || out == 0 || in > 65536 || out > 65536 || act > 2)
                throw ParseError(path.string() + ": malformed layer table in network '" + net.name + "'");
            DenseLayer<float> layer;
            layer.weight.resize(out, in);
            layer.bias.resize(out);
            layer.activation = static_cast<Activation>(act);
            net.params.layers.push_back(std::move(layer));
        }
        ckpt.networks.push_back(std::move(net));
    }
    const bool adam = r.u8() != 0;
    for (auto& net : ckpt.networks)
        for (auto& l : net.params.layers) {
            r.row_major(l.weight);
            r.vec(l.bias);
        }
    if (adam) {
        for (auto& net : ckpt.networks) {
            net.params.step = r.i64();
            for (const auto& l : net.params.layers) {
                AdamMoments<float> m{Matrix<float>(l.out(), l.in()), Matrix<float>(l.out(), l.in()),
                                     Vector<float>(l.out()), Vector<float>(l.out())};
                r.row_major(m.first_weight);
                r.row_major(m.second_weight);
                r.vec(m.first_bias);
                r.vec(m.second_bias);
                net.params.moments.push_back(std::move(m));
            }
        }
    }
    for (auto& net : ckpt.networks) net.params.touch();
    return ckpt;
}

// Explicit instantiations.
#define RELIT_NN_INSTANTIATE(T)                                                                                 \
    template struct MlpParams<T>;                                                                               \
    template struct Gradients<T>;                                                                               \
    template std::pair<Matrix<T>, ForwardCache<T>> forward(const MlpParams<T>&, const Matrix<T>&);              \
    template Matrix<T> forward_inference(const MlpParams<T>&, const Matrix<T>&);                                \
    template BackwardResult<T> backward(const MlpParams<T>&, const ForwardCache<T>&, const Matrix<T>&, bool);   \
    template void adam_step(MlpParams<T>&, const Gradients<T>&, double, const AdamConfig&);                     \
    template MlpParams<T> init_params(std::span<const int>, std::span<const Activation>, std::uint64_t);

RELIT_NN_INSTANTIATE(float)
RELIT_NN_INSTANTIATE(double)

#undef RELIT_NN_INSTANTIATE

}  // namespace relit::nn
