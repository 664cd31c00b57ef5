// SPDX-License-Identifier: Apache-2.0

#include "relit/model.hpp"

#include "relit/dual.hpp"
#include "relit/error.hpp"
#include "relit/scene.hpp"

#include <json.hpp>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>

namespace relit {

using nlohmann::json;
using nn::Activation;
using nn::Matrix;

namespace {

constexpr int kChunk = 4096;
constexpr double kCoordSlack = 1e-6;
constexpr double kUnitSlack = 1e-6;
constexpr double kNormFloor = 1e-12;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

template <typename T>
nn::MlpParams<T> make_mlp(std::vector<int> sizes, std::vector<Activation> acts, std::uint64_t seed) {
    return nn::init_params<T>(sizes, acts, seed);
}

void check_coords(const Ray4D& r) {
    for (double c : r.as_array())
        if (!(std::abs(c) <= 1.0 + kCoordSlack)) throw DomainError("ray coordinates must lie in [-1, 1]");
}

void check_light(const Vec3& l) {
    if (!is_finite(l) || std::abs(length(l) - 1.0) > kUnitSlack) throw DomainError("light direction must be unit length");
}

Vec3 decode_normal(const Vec3& raw, NormalDecode mode) {
    const Vec3 n = mode == NormalDecode::encoded ? 2.0 * raw - Vec3{1.0, 1.0, 1.0} : raw;
    return n / std::max(length(n), kMinNormalLength);
}

Rgb clamp01(const Rgb& a) {
    return {std::clamp(a.x, 0.0, 1.0), std::clamp(a.y, 0.0, 1.0), std::clamp(a.z, 0.0, 1.0)};
}

/// Head outputs and encoder features of a block of rays.
template <typename T>
struct Encoded {
    Matrix<T> normal_raw, albedo_raw, roughness;  // 3, 3, 1 rows; empty for vanilla
    Matrix<T> features;
};

template <typename T>
Matrix<T> encoder_input(const RelitModel<T>& model, const Matrix<T>& coords, const Matrix<T>& n, const Matrix<T>& a,
                        const Matrix<T>& r) {
    if (!model.has_svbrdf()) return coords;
    Matrix<T> in(11, coords.cols());
    in.template topRows<3>() = n;
    in.template middleRows<3>(3) = a;
    in.row(6) = r.row(0);
    in.template bottomRows<4>() = coords;
    return in;
}

template <typename T>
Matrix<T> roughness_rows(const RelitModel<T>& model, const Matrix<T>& trunk_out) {
    if (model.config.variant == ModelVariant::full) return nn::forward_inference(model.nets.roughness_head, trunk_out);
    return Matrix<T>::Constant(1, trunk_out.cols(), static_cast<T>(kFixedRoughness));
}

template <typename T>
Encoded<T> encode(const RelitModel<T>& model, const Matrix<T>& coords) {
    Encoded<T> e;
    if (model.has_svbrdf()) {
        const Matrix<T> f = nn::forward_inference(model.nets.trunk, coords);
        e.normal_raw = nn::forward_inference(model.nets.normal_head, f);
        e.albedo_raw = nn::forward_inference(model.nets.albedo_head, f);
        e.roughness = roughness_rows(model, f);
    }
    e.features = nn::forward_inference(model.nets.encoder,
                                       encoder_input(model, coords, e.normal_raw, e.albedo_raw, e.roughness));
    return e;
}

template <typename T>
Matrix<T> tail_input(const Matrix<T>& features, const Vec3& light) {
    Matrix<T> in(features.rows() + 3, features.cols());
    in.topRows(features.rows()) = features;
    in.row(features.rows()).setConstant(static_cast<T>(light.x));
    in.row(features.rows() + 1).setConstant(static_cast<T>(light.y));
    in.row(features.rows() + 2).setConstant(static_cast<T>(light.z));
    return in;
}

template <typename T>
SvbrdfPrediction svbrdf_column(const RelitModel<T>& model, const Encoded<T>& e, Eigen::Index j) {
    SvbrdfPrediction s;
    s.normal_raw = {double(e.normal_raw(0, j)), double(e.normal_raw(1, j)), double(e.normal_raw(2, j))};
    s.albedo_raw = {double(e.albedo_raw(0, j)), double(e.albedo_raw(1, j)), double(e.albedo_raw(2, j))};
    s.roughness = double(e.roughness(0, j));
    s.normal = decode_normal(s.normal_raw, model.config.normal_decode);
    s.albedo = clamp01(s.albedo_raw);
    return s;
}

template <typename T>
Matrix<T> coords_matrix(const std::vector<Ray4D>& rays, std::size_t begin, std::size_t end) {
    Matrix<T> m(4, static_cast<Eigen::Index>(end - begin));
    for (std::size_t i = begin; i < end; ++i) {
        const auto a = rays[i].as_array();
        for (int k = 0; k < 4; ++k) m(k, static_cast<Eigen::Index>(i - begin)) = static_cast<T>(a[static_cast<std::size_t>(k)]);
    }
    return m;
}

}  // namespace

const char* to_string(ModelVariant v) {
    switch (v) {
        case ModelVariant::full: return "full";
        case ModelVariant::no_roughness: return "no_roughness";
        case ModelVariant::vanilla: return "vanilla";
    }
    return "?";
}

const char* to_string(NormalDecode d) { return d == NormalDecode::raw ? "raw" : "encoded"; }

ModelVariant parse_variant(const std::string& s) {
    if (s == "full") return ModelVariant::full;
    if (s == "no_roughness") return ModelVariant::no_roughness;
    if (s == "vanilla") return ModelVariant::vanilla;
    throw DomainError("unknown variant '" + s + "' (expected full, no_roughness or vanilla)");
}

NormalDecode parse_normal_decode(const std::string& s) {
    if (s == "raw") return NormalDecode::raw;
    if (s == "encoded") return NormalDecode::encoded;
    throw DomainError("unknown normal decode '" + s + "' (expected raw or encoded)");
}

template <typename T>
std::vector<std::pair<std::string, nn::MlpParams<T>*>> RelitNetworks<T>::named() {
    std::vector<std::pair<std::string, nn::MlpParams<T>*>> out;
    for (auto [name, p] : std::initializer_list<std::pair<const char*, nn::MlpParams<T>*>>{
             {"trunk", &trunk},
             {"normal_head", &normal_head},
             {"albedo_head", &albedo_head},
             {"roughness_head", &roughness_head},
             {"encoder", &encoder},
             {"tail", &tail}})
        if (!p->layers.empty()) out.emplace_back(name, p);
    return out;
}

template <typename T>
std::vector<std::pair<std::string, const nn::MlpParams<T>*>> RelitNetworks<T>::named() const {
    std::vector<std::pair<std::string, const nn::MlpParams<T>*>> out;
    for (auto& [name, p] : const_cast<RelitNetworks*>(this)->named()) out.emplace_back(name, p);
    return out;
}

template <typename T>
RelitModel<T> make_model(const ModelConfig& config, const TwoPlaneConfig& planes, std::uint64_t seed) {
    planes.validate();
    RelitModel<T> m;
    m.config = config;
    m.planes = planes;
    auto stream = [&](std::uint64_t k) { return splitmix64(seed ^ splitmix64(k)); };
    const bool svbrdf = config.variant != ModelVariant::vanilla;
    if (svbrdf) {
        std::vector<int> sizes{4};
        sizes.insert(sizes.end(), kTrunkDepth, kTrunkWidth);
        m.nets.trunk = make_mlp<T>(sizes, std::vector<Activation>(kTrunkDepth, Activation::relu), stream(1));
        m.nets.normal_head = make_mlp<T>({kTrunkWidth, 3}, {Activation::relu}, stream(2));
        m.nets.albedo_head = make_mlp<T>({kTrunkWidth, 3}, {Activation::relu}, stream(3));
        if (config.variant == ModelVariant::full)
            m.nets.roughness_head = make_mlp<T>({kTrunkWidth, 1}, {Activation::sigmoid}, stream(4));
    }
    std::vector<int> enc{svbrdf ? 11 : 4};
    enc.insert(enc.end(), kEncoderDepth, kEncoderWidth);
    m.nets.encoder = make_mlp<T>(enc, std::vector<Activation>(kEncoderDepth, Activation::relu), stream(5));
    m.nets.tail = make_mlp<T>({kEncoderWidth + 3, kTailHidden, 3}, {Activation::sigmoid, Activation::sigmoid}, stream(6));
    return m;
}

template <typename T>
SvbrdfPrediction decompose(const RelitModel<T>& model, const Ray4D& ray) {
    if (!model.has_svbrdf()) throw DomainError("decompose: the vanilla variant has no SVBRDF");
    check_coords(ray);
    const Encoded<T> e = encode(model, coords_matrix<T>({ray}, 0, 1));
    return svbrdf_column(model, e, 0);
}

template <typename T>
Rgb render_ray(const RelitModel<T>& model, const SvbrdfPrediction& s, const Ray4D& ray, const Vec3& light) {
    if (!model.has_svbrdf()) throw DomainError("render_ray: the vanilla variant has no SVBRDF input");
    check_coords(ray);
    check_light(light);
    const Matrix<T> coords = coords_matrix<T>({ray}, 0, 1);
    Matrix<T> n(3, 1), a(3, 1), r(1, 1);
    for (int k = 0; k < 3; ++k) {
        n(k, 0) = static_cast<T>(s.normal_raw[k]);
        a(k, 0) = static_cast<T>(s.albedo_raw[k]);
    }
    r(0, 0) = static_cast<T>(model.config.variant == ModelVariant::full ? s.roughness : kFixedRoughness);
    const Matrix<T> f = nn::forward_inference(model.nets.encoder, encoder_input(model, coords, n, a, r));
    const Matrix<T> c = nn::forward_inference(model.nets.tail, tail_input(f, light));
    return {double(c(0, 0)), double(c(1, 0)), double(c(2, 0))};
}

template <typename T>
Prediction predict(const RelitModel<T>& model, const Ray4D& ray, const Vec3& light) {
    return predict_batch(model, std::vector<Ray4D>{ray}, light).front();
}

template <typename T>
std::vector<Prediction> predict_batch(const RelitModel<T>& model, const std::vector<Ray4D>& rays, const Vec3& light) {
    check_light(light);
    for (const auto& r : rays) check_coords(r);
    std::vector<Prediction> out;
    out.reserve(rays.size());
    for (std::size_t begin = 0; begin < rays.size(); begin += kChunk) {
        const std::size_t end = std::min(rays.size(), begin + kChunk);
        const Encoded<T> e = encode(model, coords_matrix<T>(rays, begin, end));
        const Matrix<T> c = nn::forward_inference(model.nets.tail, tail_input(e.features, light));
        for (Eigen::Index j = 0; j < c.cols(); ++j) {
            Prediction p;
            p.color = {double(c(0, j)), double(c(1, j)), double(c(2, j))};
            if (model.has_svbrdf()) p.svbrdf = svbrdf_column(model, e, j);
            out.push_back(std::move(p));
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Loss.

namespace {

template <typename T>
struct BatchForward {
    nn::ForwardCache<T> trunk, normal_head, albedo_head, roughness_head, encoder, tail;
    Matrix<T> trunk_out, normal_raw, albedo_raw, roughness, color;
};

template <typename T>
BatchForward<T> forward_batch(const RelitModel<T>& model, const TrainBatch<T>& batch) {
    BatchForward<T> f;
    if (model.has_svbrdf()) {
        std::tie(f.trunk_out, f.trunk) = nn::forward(model.nets.trunk, batch.coords);
        std::tie(f.normal_raw, f.normal_head) = nn::forward(model.nets.normal_head, f.trunk_out);
        std::tie(f.albedo_raw, f.albedo_head) = nn::forward(model.nets.albedo_head, f.trunk_out);
        if (model.config.variant == ModelVariant::full)
            std::tie(f.roughness, f.roughness_head) = nn::forward(model.nets.roughness_head, f.trunk_out);
        else
            f.roughness = Matrix<T>::Constant(1, batch.size(), static_cast<T>(kFixedRoughness));
    }
    Matrix<T> features;
    std::tie(features, f.encoder) =
        nn::forward(model.nets.encoder, encoder_input(model, batch.coords, f.normal_raw, f.albedo_raw, f.roughness));
    Matrix<T> tail_in(features.rows() + 3, features.cols());
    tail_in.topRows(features.rows()) = features;
    tail_in.bottomRows(3) = batch.light;
    std::tie(f.color, f.tail) = nn::forward(model.nets.tail, tail_in);
    return f;
}

using Jet = Dual<7>;

/// Per-sample loss terms; fills the gradients w.r.t. the predicted colour and
/// the raw head outputs when the pointers are non-null.
template <typename T>
struct SampleLoss {
    double photometric = 0.0, microfacet = 0.0, normal = 0.0, total = 0.0;
};

template <typename T>
SampleLoss<T> sample_loss(const RelitModel<T>& model, const BatchForward<T>& f, const TrainBatch<T>& batch,
                          Eigen::Index j, const LossWeights& w, double scale, T* d_color, T* d_normal, T* d_albedo,
                          T* d_roughness) {
    SampleLoss<T> s;
    const Vec3 pred{double(f.color(0, j)), double(f.color(1, j)), double(f.color(2, j))};
    const Vec3 target{double(batch.color(0, j)), double(batch.color(1, j)), double(batch.color(2, j))};
    const Vec3 rp = pred - target;
    s.photometric = length(rp);
    Vec3 g_color = s.photometric > kNormFloor ? (w.photometric * scale / s.photometric) * rp : Vec3{};

    if (model.has_svbrdf()) {
        const Vec3 n_raw{double(f.normal_raw(0, j)), double(f.normal_raw(1, j)), double(f.normal_raw(2, j))};
        const double enc = model.config.normal_decode == NormalDecode::encoded ? 2.0 : 1.0;
        const double off = model.config.normal_decode == NormalDecode::encoded ? -1.0 : 0.0;
        Vec3T<Jet> n, a;
        for (int k = 0; k < 3; ++k) {
            n[k] = Jet::variable(enc * n_raw[k] + off, k);
            a[k] = Jet::variable(std::clamp(double(f.albedo_raw(k, j)), 0.0, 1.0), 3 + k);
        }
        const Jet r = Jet::variable(double(f.roughness(0, j)), 6);
        const Vec3 v{double(batch.view(0, j)), double(batch.view(1, j)), double(batch.view(2, j))};
        const Vec3 l{double(batch.light(0, j)), double(batch.light(1, j)), double(batch.light(2, j))};
        const Vec3T<Jet> m = microfacet_kernel<Jet>(n, a, r, v, l, model.config.lm_cosine);
        const Vec3 rm{pred.x - m.x.v, pred.y - m.y.v, pred.z - m.z.v};
        s.microfacet = length(rm);
        const double nn_ = dot(n_raw, n_raw);
        s.normal = std::abs(1.0 - nn_);

        if (d_color) {
            const Vec3 g_m = s.microfacet > kNormFloor ? (w.microfacet * scale / s.microfacet) * rm : Vec3{};
            g_color += g_m;
            // dL/dM = -g_m, chained through the Jacobian of M.
            std::array<double, 7> g_in{};
            for (int c = 0; c < 3; ++c)
                for (int k = 0; k < 7; ++k) g_in[static_cast<std::size_t>(k)] -= g_m[c] * m[c].d[static_cast<std::size_t>(k)];
            const double g_ln = nn_ > 1.0 ? 1.0 : (nn_ < 1.0 ? -1.0 : 0.0);
            for (int k = 0; k < 3; ++k) {
                d_normal[k] += static_cast<T>(enc * g_in[static_cast<std::size_t>(k)] +
                                              w.normal * scale * g_ln * 2.0 * n_raw[k]);
                const double a_raw = double(f.albedo_raw(k, j));
                if (a_raw > 0.0 && a_raw < 1.0) d_albedo[k] += static_cast<T>(g_in[3 + static_cast<std::size_t>(k)]);
            }
            if (model.config.variant == ModelVariant::full) d_roughness[0] += static_cast<T>(g_in[6]);
        }
    }
    if (d_color)
        for (int k = 0; k < 3; ++k) d_color[k] = static_cast<T>(g_color[k]);
    s.total = w.photometric * s.photometric + w.microfacet * s.microfacet + w.normal * s.normal;
    return s;
}

template <typename T>
LossTerms accumulate(const RelitModel<T>& model, const BatchForward<T>& f, const TrainBatch<T>& batch,
                     const LossWeights& w, Matrix<T>* d_color, Matrix<T>* d_normal, Matrix<T>* d_albedo,
                     Matrix<T>* d_roughness) {
    const double scale = 1.0 / batch.size();
    LossTerms sum;
    for (Eigen::Index j = 0; j < batch.size(); ++j) {
        const bool grads = d_color != nullptr;
        const SampleLoss<T> s = sample_loss(model, f, batch, j, w, scale, grads ? d_color->col(j).data() : nullptr,
                                            grads && model.has_svbrdf() ? d_normal->col(j).data() : nullptr,
                                            grads && model.has_svbrdf() ? d_albedo->col(j).data() : nullptr,
                                            grads && model.has_svbrdf() ? d_roughness->col(j).data() : nullptr);
        if (!std::isfinite(s.total))
            throw TrainingError("loss is not finite at batch sample " + std::to_string(j));
        sum.total += s.total;
        sum.photometric += s.photometric;
        sum.microfacet += s.microfacet;
        sum.normal += s.normal;
    }
    sum.total *= scale;
    sum.photometric *= scale;
    sum.microfacet *= scale;
    sum.normal *= scale;
    return sum;
}

template <typename T>
void check_batch(const TrainBatch<T>& b) {
    if (b.size() == 0) throw DomainError("loss: empty batch");
    if (b.coords.rows() != 4 || b.view.rows() != 3 || b.light.rows() != 3 || b.color.rows() != 3 ||
        b.view.cols() != b.size() || b.light.cols() != b.size() || b.color.cols() != b.size())
        throw DomainError("loss: batch matrices have inconsistent shapes");
}

}  // namespace

template <typename T>
LossTerms evaluate_loss(const RelitModel<T>& model, const TrainBatch<T>& batch, const LossWeights& weights) {
    check_batch(batch);
    const BatchForward<T> f = forward_batch(model, batch);
    return accumulate<T>(model, f, batch, weights, nullptr, nullptr, nullptr, nullptr);
}

template <typename T>
std::pair<LossTerms, ModelGradients<T>> loss_and_gradients(const RelitModel<T>& model, const TrainBatch<T>& batch,
                                                            const LossWeights& weights) {
    check_batch(batch);
    const BatchForward<T> f = forward_batch(model, batch);
    const Eigen::Index b = batch.size();
    Matrix<T> d_color(3, b);
    Matrix<T> d_normal = Matrix<T>::Zero(3, b), d_albedo = Matrix<T>::Zero(3, b), d_roughness = Matrix<T>::Zero(1, b);
    const LossTerms terms = accumulate(model, f, batch, weights, &d_color, &d_normal, &d_albedo, &d_roughness);

    ModelGradients<T> g;
    auto tail = nn::backward(model.nets.tail, f.tail, d_color, true);
    g.tail = std::move(tail.gradients);
    const Matrix<T> d_features = tail.input_gradient.topRows(kEncoderWidth);
    auto enc = nn::backward(model.nets.encoder, f.encoder, d_features, model.has_svbrdf());
    g.encoder = std::move(enc.gradients);
    if (model.has_svbrdf()) {
        d_normal += enc.input_gradient.template topRows<3>();
        d_albedo += enc.input_gradient.template middleRows<3>(3);
        auto nh = nn::backward(model.nets.normal_head, f.normal_head, d_normal, true);
        auto ah = nn::backward(model.nets.albedo_head, f.albedo_head, d_albedo, true);
        Matrix<T> d_trunk = nh.input_gradient + ah.input_gradient;
        g.normal_head = std::move(nh.gradients);
        g.albedo_head = std::move(ah.gradients);
        if (model.config.variant == ModelVariant::full) {
            d_roughness += enc.input_gradient.row(6);
            auto rh = nn::backward(model.nets.roughness_head, f.roughness_head, d_roughness, true);
            d_trunk += rh.input_gradient;
            g.roughness_head = std::move(rh.gradients);
        }
        g.trunk = nn::backward(model.nets.trunk, f.trunk, d_trunk, false).gradients;
    }
    return {terms, std::move(g)};
}

// ---------------------------------------------------------------------------
// Training.

TrainingSet build_training_set(const OLATDataset& ds, const TwoPlaneConfig& planes, bool withhold_views) {
    struct Column {
        Ray4D coords;
        Vec3 view;
        int x, y;
    };
    std::vector<int> lights;
    for (int l = 0; l < ds.light_count(); ++l)
        if (!ds.split.is_held_out_light(l)) lights.push_back(l);

    std::vector<std::vector<Column>> per_view;
    std::vector<int> views;
    std::size_t total = 0;
    for (int c = 0; c < ds.camera_count(); ++c) {
        if (withhold_views && ds.split.is_held_out_view(c)) continue;
        std::vector<Column> cols;
        for (const auto& pr : batch_rays_for_view(ds.cameras[static_cast<std::size_t>(c)], planes))
            if (pr.valid) cols.push_back({pr.coords, -pr.ray.direction, pr.x, pr.y});
        total += cols.size() * lights.size();
        per_view.push_back(std::move(cols));
        views.push_back(c);
    }

    TrainingSet set;
    auto& s = set.samples;
    const auto n = static_cast<Eigen::Index>(total);
    s.coords.resize(4, n);
    s.view.resize(3, n);
    s.light.resize(3, n);
    s.color.resize(3, n);
    Eigen::Index j = 0;
    for (std::size_t vi = 0; vi < views.size(); ++vi) {
        for (int l : lights) {
            const Vec3& ld = ds.lights.directions[static_cast<std::size_t>(l)];
            const Image& img = ds.image(views[vi], l);
            for (const auto& col : per_view[vi]) {
                const auto a = col.coords.as_array();
                for (int k = 0; k < 4; ++k) s.coords(k, j) = static_cast<float>(a[static_cast<std::size_t>(k)]);
                for (int k = 0; k < 3; ++k) {
                    s.view(k, j) = static_cast<float>(col.view[k]);
                    s.light(k, j) = static_cast<float>(ld[k]);
                    s.color(k, j) = img.at(col.x, col.y, k);
                }
                ++j;
            }
        }
    }
    return set;
}

namespace {

template <typename T>
void gather(const TrainBatch<T>& all, const std::vector<Eigen::Index>& perm, std::size_t begin, std::size_t end,
            TrainBatch<T>& out) {
    const auto n = static_cast<Eigen::Index>(end - begin);
    out.coords.resize(4, n);
    out.view.resize(3, n);
    out.light.resize(3, n);
    out.color.resize(3, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Index src = perm[begin + static_cast<std::size_t>(i)];
        out.coords.col(i) = all.coords.col(src);
        out.view.col(i) = all.view.col(src);
        out.light.col(i) = all.light.col(src);
        out.color.col(i) = all.color.col(src);
    }
}

// Training allocates the same multi-megabyte activation buffers every step.
// Keeping them on the heap instead of fresh mmap pages avoids a page-fault
// storm that otherwise costs about 15% of an epoch.
void keep_large_allocations() {
#if defined(__GLIBC__)
    static const bool done = [] {
        mallopt(M_MMAP_THRESHOLD, 1 << 30);
        mallopt(M_TRIM_THRESHOLD, 1 << 30);
        return true;
    }();
    (void)done;
#endif
}

void apply(Model& m, const ModelGradients<float>& g, double lr, const nn::AdamConfig& adam) {
    if (m.has_svbrdf()) {
        nn::adam_step(m.nets.trunk, g.trunk, lr, adam);
        nn::adam_step(m.nets.normal_head, g.normal_head, lr, adam);
        nn::adam_step(m.nets.albedo_head, g.albedo_head, lr, adam);
        if (m.config.variant == ModelVariant::full) nn::adam_step(m.nets.roughness_head, g.roughness_head, lr, adam);
    }
    nn::adam_step(m.nets.encoder, g.encoder, lr, adam);
    nn::adam_step(m.nets.tail, g.tail, lr, adam);
}

}  // namespace

std::vector<EpochRecord> train(Model& model, const OLATDataset& ds, const TrainConfig& cfg) {
    if (cfg.epochs < 0) throw DomainError("train: epochs must be non-negative");
    if (cfg.batch_size <= 0) throw DomainError("train: batch size must be positive");
    if (!(cfg.learning_rate >= 0.0) || !(cfg.lr_decay > 0.0)) throw DomainError("train: invalid learning-rate schedule");
    int views = 0, lights = 0;
    for (int c = 0; c < ds.camera_count(); ++c) views += cfg.withhold_views && ds.split.is_held_out_view(c) ? 0 : 1;
    for (int l = 0; l < ds.light_count(); ++l) lights += ds.split.is_held_out_light(l) ? 0 : 1;
    if (views < 1 || lights < 2) throw DomainError("train: need at least one training view and two training lights");

    keep_large_allocations();
    const TrainingSet set = build_training_set(ds, model.planes, cfg.withhold_views);
    const std::size_t n = static_cast<std::size_t>(set.samples.size());
    if (n == 0) throw DomainError("train: no valid training rays");

    std::vector<Eigen::Index> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = static_cast<Eigen::Index>(i);
    std::mt19937_64 rng(cfg.seed);
    std::vector<EpochRecord> history;
    TrainBatch<float> batch;
    double lr = cfg.learning_rate;
    for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
        const auto t0 = std::chrono::steady_clock::now();
        for (std::size_t i = n - 1; i > 0; --i) std::swap(perm[i], perm[rng() % (i + 1)]);
        LossTerms sum;
        for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(n, begin + static_cast<std::size_t>(cfg.batch_size));
            gather(set.samples, perm, begin, end, batch);
            auto [terms, grads] = loss_and_gradients(model, batch, cfg.weights);
            const double share = static_cast<double>(end - begin);
            sum.total += terms.total * share;
            sum.photometric += terms.photometric * share;
            sum.microfacet += terms.microfacet * share;
            sum.normal += terms.normal * share;
            apply(model, grads, lr, cfg.adam);
        }
        EpochRecord rec;
        rec.epoch = epoch;
        rec.learning_rate = lr;
        rec.loss = {sum.total / n, sum.photometric / n, sum.microfacet / n, sum.normal / n};
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        if (!std::isfinite(rec.loss.total)) throw TrainingError("train: loss diverged at epoch " + std::to_string(epoch));
        history.push_back(rec);
        if (cfg.on_epoch) cfg.on_epoch(rec);
        if (cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 && !cfg.checkpoint_path.empty())
            save_model(cfg.checkpoint_path, model);
        lr *= cfg.lr_decay;
    }
    return history;
}

void write_loss_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << "epoch,L,L_p,L_m,L_n\n";
    char buf[256];
    for (const auto& r : history) {
        std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g,%.17g\n", r.epoch, r.loss.total, r.loss.photometric,
                      r.loss.microfacet, r.loss.normal);
        os << buf;
    }
    if (!os) throw IoError("failed writing " + path.string());
}

std::vector<EpochRecord> read_loss_history(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open loss history: " + path.string());
    std::string line;
    std::getline(is, line);
    if (line != "epoch,L,L_p,L_m,L_n") throw ParseError(path.string() + ": line 1: unexpected header");
    std::vector<EpochRecord> out;
    int lineno = 1;
    while (std::getline(is, line)) {
        ++lineno;
        if (line.empty()) continue;
        EpochRecord r;
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%lf", &r.epoch, &r.loss.total, &r.loss.photometric,
                        &r.loss.microfacet, &r.loss.normal) != 5)
            throw ParseError(path.string() + ": line " + std::to_string(lineno) + ": expected 5 fields");
        out.push_back(r);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Views.

ViewFeatures prepare_view(const Model& model, const CameraModel& camera, const TwoPlaneConfig& planes) {
    camera.validate();
    ViewFeatures v;
    v.width = camera.width;
    v.height = camera.height;
    const auto rays = batch_rays_for_view(camera, planes);
    v.mask.assign(rays.size(), 0);
    std::vector<Ray4D> coords;
    for (std::size_t i = 0; i < rays.size(); ++i) {
        if (!rays[i].valid) continue;
        v.mask[i] = 1;
        v.pixel_of_column.push_back(static_cast<int>(i));
        coords.push_back(rays[i].coords);
    }
    v.features.resize(kEncoderWidth, static_cast<Eigen::Index>(coords.size()));
    for (std::size_t begin = 0; begin < coords.size(); begin += kChunk) {
        const std::size_t end = std::min(coords.size(), begin + kChunk);
        const Encoded<float> e = encode(model, coords_matrix<float>(coords, begin, end));
        v.features.middleCols(static_cast<Eigen::Index>(begin), e.features.cols()) = e.features;
        if (model.has_svbrdf())
            for (Eigen::Index j = 0; j < e.features.cols(); ++j) v.svbrdf.push_back(svbrdf_column(model, e, j));
    }
    return v;
}

Image shade_view(const Model& model, const ViewFeatures& view, const Vec3& light) {
    check_light(light);
    Image img(view.width, view.height, 3);
    const Eigen::Index n = view.features.cols();
    for (Eigen::Index begin = 0; begin < n; begin += kChunk) {
        const Eigen::Index count = std::min<Eigen::Index>(kChunk, n - begin);
        const Matrix<float> c =
            nn::forward_inference(model.nets.tail, tail_input<float>(view.features.middleCols(begin, count), light));
        for (Eigen::Index j = 0; j < count; ++j) {
            const auto p = static_cast<std::size_t>(view.pixel_of_column[static_cast<std::size_t>(begin + j)]);
            for (int k = 0; k < 3; ++k) img.pixels[p * 3 + static_cast<std::size_t>(k)] = c(k, j);
        }
    }
    return img;
}

RenderedView render_view(const Model& model, const CameraModel& camera, const TwoPlaneConfig& planes,
                         const Vec3& light) {
    const ViewFeatures v = prepare_view(model, camera, planes);
    RenderedView out;
    out.color = shade_view(model, v, light);
    out.mask = v.mask;
    if (model.has_svbrdf()) {
        out.normal = Image(v.width, v.height, 3);
        out.albedo = Image(v.width, v.height, 3);
        out.roughness = Image(v.width, v.height, 1);
        for (std::size_t j = 0; j < v.svbrdf.size(); ++j) {
            const int p = v.pixel_of_column[j];
            const int x = p % v.width, y = p / v.width;
            out.normal.set_rgb(x, y, v.svbrdf[j].normal);
            out.albedo.set_rgb(x, y, v.svbrdf[j].albedo);
            out.roughness.at(x, y) = static_cast<float>(v.svbrdf[j].roughness);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Checkpoints.

nn::Checkpoint to_checkpoint(const Model& model, const std::string& extra_metadata_json) {
    json bounds = json::array();
    for (const auto& b : model.planes.bounds) bounds.push_back(json::array({b.min, b.max}));
    json meta = {
        {"model",
         {{"variant", to_string(model.config.variant)},
          {"normal_decode", to_string(model.config.normal_decode)},
          {"lm_cosine", model.config.lm_cosine}}},
        {"two_plane", {{"z_uv", model.planes.z_uv}, {"z_st", model.planes.z_st}, {"bounds", bounds}}},
    };
    try {
        meta["extra"] = json::parse(extra_metadata_json);
    } catch (const json::parse_error& e) {
        throw DomainError(std::string("to_checkpoint: extra metadata is not JSON: ") + e.what());
    }
    nn::Checkpoint ckpt;
    ckpt.metadata = meta.dump();
    for (const auto& [name, p] : model.nets.named()) ckpt.networks.push_back({name, *p});
    return ckpt;
}

Model model_from_checkpoint(const nn::Checkpoint& ckpt) {
    Model m;
    try {
        const json meta = json::parse(ckpt.metadata);
        m.config.variant = parse_variant(meta.at("model").at("variant").get<std::string>());
        m.config.normal_decode = parse_normal_decode(meta.at("model").at("normal_decode").get<std::string>());
        m.config.lm_cosine = meta.at("model").at("lm_cosine").get<bool>();
        const auto& tp = meta.at("two_plane");
        m.planes.z_uv = tp.at("z_uv").get<double>();
        m.planes.z_st = tp.at("z_st").get<double>();
        const auto bounds = tp.at("bounds").get<std::vector<std::vector<double>>>();
        if (bounds.size() != 4) throw ParseError("checkpoint metadata: two_plane.bounds must have 4 ranges");
        for (std::size_t i = 0; i < 4; ++i) {
            if (bounds[i].size() != 2) throw ParseError("checkpoint metadata: malformed bounds");
            m.planes.bounds[i] = {bounds[i][0], bounds[i][1]};
        }
        m.planes.validate();
    } catch (const json::exception& e) {
        throw ParseError(std::string("checkpoint metadata: ") + e.what());
    } catch (const DomainError& e) {
        throw ParseError(std::string("checkpoint metadata: ") + e.what());
    }

    // Shapes must match a freshly built model of the same variant.
    const Model shape = make_model<float>(m.config, m.planes, 0);
    m.nets = shape.nets;
    auto slots = m.nets.named();
    if (slots.size() != ckpt.networks.size())
        throw ParseError("checkpoint: expected " + std::to_string(slots.size()) + " networks for variant " +
                         to_string(m.config.variant));
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& src = ckpt.networks[i];
        if (src.name != slots[i].first) throw ParseError("checkpoint: network " + std::to_string(i) + " is '" + src.name +
                                                         "', expected '" + slots[i].first + "'");
        const auto& want = slots[i].second->layers;
        if (src.params.layers.size() != want.size())
            throw ParseError("checkpoint: network '" + src.name + "' has the wrong depth");
        for (std::size_t k = 0; k < want.size(); ++k)
            if (src.params.layers[k].in() != want[k].in() || src.params.layers[k].out() != want[k].out() ||
                src.params.layers[k].activation != want[k].activation)
                throw ParseError("checkpoint: network '" + src.name + "' layer " + std::to_string(k) + " has the wrong shape");
        *slots[i].second = src.params;
        slots[i].second->touch();
    }
    return m;
}

void save_model(const std::filesystem::path& path, const Model& model, bool include_adam,
                const std::string& extra_metadata_json) {
    nn::save_checkpoint(path, to_checkpoint(model, extra_metadata_json), include_adam);
}

Model load_model(const std::filesystem::path& path) { return model_from_checkpoint(nn::load_checkpoint(path)); }

std::string file_hash(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open " + path.string());
    const std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(bytes)));
    return buf;
}

#define RELIT_MODEL_INSTANTIATE(T)                                                                                   \
    template struct RelitNetworks<T>;                                                                                \
    template RelitModel<T> make_model<T>(const ModelConfig&, const TwoPlaneConfig&, std::uint64_t);                  \
    template SvbrdfPrediction decompose(const RelitModel<T>&, const Ray4D&);                                         \
    template Rgb render_ray(const RelitModel<T>&, const SvbrdfPrediction&, const Ray4D&, const Vec3&);                \
    template Prediction predict(const RelitModel<T>&, const Ray4D&, const Vec3&);                                    \
    template std::vector<Prediction> predict_batch(const RelitModel<T>&, const std::vector<Ray4D>&, const Vec3&);    \
    template std::pair<LossTerms, ModelGradients<T>> loss_and_gradients(const RelitModel<T>&, const TrainBatch<T>&, \
                                                                        const LossWeights&);                         \
    template LossTerms evaluate_loss(const RelitModel<T>&, const TrainBatch<T>&, const LossWeights&);

RELIT_MODEL_INSTANTIATE(float)
RELIT_MODEL_INSTANTIATE(double)

#undef RELIT_MODEL_INSTANTIATE

}  // namespace relit
