// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/dataset.hpp"
#include "relit/geometry.hpp"
#include "relit/image.hpp"
#include "relit/microfacet.hpp"
#include "relit/nn.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace relit {

enum class ModelVariant { full, no_roughness, vanilla };
/// How the normal head output becomes a geometric normal: `raw` uses it
/// as is, `encoded` maps n to 2n - 1 first. Both re-normalize afterwards.
enum class NormalDecode { raw, encoded };

const char* to_string(ModelVariant v);
const char* to_string(NormalDecode d);
ModelVariant parse_variant(const std::string& s);
NormalDecode parse_normal_decode(const std::string& s);

/// Roughness used in place of the head when the variant has none.
inline constexpr double kFixedRoughness = 0.5;

struct ModelConfig {
    ModelVariant variant = ModelVariant::full;
    NormalDecode normal_decode = NormalDecode::raw;
    /// Multiply the microfacet target by N.l.
    bool lm_cosine = false;
};

inline constexpr int kTrunkWidth = 256;
inline constexpr int kTrunkDepth = 8;
inline constexpr int kEncoderWidth = 128;
inline constexpr int kEncoderDepth = 8;
inline constexpr int kTailHidden = 64;

template <typename T>
struct RelitNetworks {
    nn::MlpParams<T> trunk;           // 4 -> 256, empty for vanilla
    nn::MlpParams<T> normal_head;     // 256 -> 3 relu
    nn::MlpParams<T> albedo_head;     // 256 -> 3 relu
    nn::MlpParams<T> roughness_head;  // 256 -> 1 sigmoid, full variant only
    nn::MlpParams<T> encoder;         // 11 (or 4 for vanilla) -> 128
    nn::MlpParams<T> tail;            // 131 -> 64 -> 3, sigmoid

    /// Networks in a fixed order with their checkpoint names. Empty ones are skipped.
    std::vector<std::pair<std::string, nn::MlpParams<T>*>> named();
    std::vector<std::pair<std::string, const nn::MlpParams<T>*>> named() const;
};

template <typename T>
struct RelitModel {
    ModelConfig config;
    TwoPlaneConfig planes;
    RelitNetworks<T> nets;

    bool has_svbrdf() const { return config.variant != ModelVariant::vanilla; }
};

using Model = RelitModel<float>;

/// Fresh model with seeded initialization; each network draws from its own stream.
template <typename T>
RelitModel<T> make_model(const ModelConfig& config, const TwoPlaneConfig& planes, std::uint64_t seed);

template <typename To, typename From>
RelitModel<To> cast_model(const RelitModel<From>& m) {
    RelitModel<To> out;
    out.config = m.config;
    out.planes = m.planes;
    out.nets.trunk = nn::cast_params<To>(m.nets.trunk);
    out.nets.normal_head = nn::cast_params<To>(m.nets.normal_head);
    out.nets.albedo_head = nn::cast_params<To>(m.nets.albedo_head);
    out.nets.roughness_head = nn::cast_params<To>(m.nets.roughness_head);
    out.nets.encoder = nn::cast_params<To>(m.nets.encoder);
    out.nets.tail = nn::cast_params<To>(m.nets.tail);
    return out;
}

/// Decomposition of one ray. Raw head outputs feed the render network;
/// `normal` (decoded, unit) and `albedo` (clamped to [0, 1]) feed M.
struct SvbrdfPrediction {
    Vec3 normal_raw;
    Rgb albedo_raw;
    double roughness = kFixedRoughness;
    Vec3 normal;
    Rgb albedo;
};

struct Prediction {
    Rgb color;
    std::optional<SvbrdfPrediction> svbrdf;  // absent for the vanilla variant
};

/// Throws DomainError for vanilla models and for coordinates outside [-1, 1] (1e-6 slack).
template <typename T>
SvbrdfPrediction decompose(const RelitModel<T>& model, const Ray4D& ray);

/// Throws DomainError for non-unit light directions or vanilla models.
template <typename T>
Rgb render_ray(const RelitModel<T>& model, const SvbrdfPrediction& svbrdf, const Ray4D& ray, const Vec3& light);

template <typename T>
Prediction predict(const RelitModel<T>& model, const Ray4D& ray, const Vec3& light);

/// One prediction per ray, all under the same light.
template <typename T>
std::vector<Prediction> predict_batch(const RelitModel<T>& model, const std::vector<Ray4D>& rays, const Vec3& light);

// ---------------------------------------------------------------------------
// Losses.

struct LossWeights {
    double microfacet = 0.1;
    double photometric = 1.0;
    double normal = 0.01;
};

/// Column-per-sample training batch.
template <typename T>
struct TrainBatch {
    nn::Matrix<T> coords;  // 4 x B, normalized (u, v, s, t)
    nn::Matrix<T> view;    // 3 x B, surface -> camera
    nn::Matrix<T> light;   // 3 x B, surface -> light
    nn::Matrix<T> color;   // 3 x B, linear RGB

    int size() const { return static_cast<int>(coords.cols()); }
};

/// Batch means of the per-sample terms.
struct LossTerms {
    double total = 0.0;
    double photometric = 0.0;
    double microfacet = 0.0;
    double normal = 0.0;
};

template <typename T>
struct ModelGradients {
    nn::Gradients<T> trunk, normal_head, albedo_head, roughness_head, encoder, tail;
};

/// L = w_m L_m + w_p L_p + w_n L_n averaged over the batch, with gradients for
/// every network. Throws DomainError for an empty batch and TrainingError
/// naming the first sample whose loss is not finite.
template <typename T>
std::pair<LossTerms, ModelGradients<T>> loss_and_gradients(const RelitModel<T>& model, const TrainBatch<T>& batch,
                                                            const LossWeights& weights = {});

/// Same value as loss_and_gradients without the backward pass.
template <typename T>
LossTerms evaluate_loss(const RelitModel<T>& model, const TrainBatch<T>& batch, const LossWeights& weights = {});

// ---------------------------------------------------------------------------
// Training.

/// Every valid pixel ray of every training (view, light) pair.
struct TrainingSet {
    TrainBatch<float> samples;
};

/// Training pairs are all views under the non-held-out lights, which is what
/// the light-interpolation baselines see at a test view. With
/// `withhold_views` the held-out views are dropped entirely (novel-view setting).
TrainingSet build_training_set(const OLATDataset& dataset, const TwoPlaneConfig& planes, bool withhold_views = false);

struct EpochRecord {
    int epoch = 0;  // 1-based
    LossTerms loss;
    double learning_rate = 0.0;
    double seconds = 0.0;
};

struct TrainConfig {
    int epochs = 30;
    int batch_size = 8192;
    double learning_rate = 3e-4;
    double lr_decay = 0.995;  // per epoch
    std::uint64_t seed = 42;
    LossWeights weights;
    nn::AdamConfig adam;
    /// Write a checkpoint every this many epochs (0: never) to checkpoint_path.
    int checkpoint_every = 0;
    std::filesystem::path checkpoint_path;
    std::function<void(const EpochRecord&)> on_epoch;
    /// Drop every image of the held-out views, not just the held-out lights.
    bool withhold_views = false;
};

/// Seeded per-epoch shuffle, last partial batch kept. Throws DomainError for
/// datasets without a view or with fewer than two lights to train on.
std::vector<EpochRecord> train(Model& model, const OLATDataset& dataset, const TrainConfig& config);

/// Columns: epoch, L, L_p, L_m, L_n.
void write_loss_history(const std::filesystem::path& path, const std::vector<EpochRecord>& history);
std::vector<EpochRecord> read_loss_history(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Whole-view rendering.

/// Light-independent part of a view: ray validity plus the encoder features
/// of every valid pixel. Shading a view under many lights reuses it.
struct ViewFeatures {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> mask;   // 1 where the pixel ray hits the bounds
    std::vector<int> pixel_of_column;  // column -> pixel index (row-major)
    nn::Matrix<float> features;       // kEncoderWidth x valid pixels
    std::vector<SvbrdfPrediction> svbrdf;  // per column, empty for vanilla
};

struct RenderedView {
    Image color;      // 3 channels
    Image normal;     // 3 channels, decoded unit normal, empty for vanilla
    Image albedo;     // 3 channels, clamped, empty for vanilla
    Image roughness;  // 1 channel, empty for vanilla
    std::vector<std::uint8_t> mask;
};

ViewFeatures prepare_view(const Model& model, const CameraModel& camera, const TwoPlaneConfig& planes);
/// Colour under one light; masked pixels are (0, 0, 0).
Image shade_view(const Model& model, const ViewFeatures& view, const Vec3& light);
RenderedView render_view(const Model& model, const CameraModel& camera, const TwoPlaneConfig& planes,
                         const Vec3& light);

// ---------------------------------------------------------------------------
// Checkpoints.

nn::Checkpoint to_checkpoint(const Model& model, const std::string& extra_metadata_json = "{}");
/// Throws ParseError when the metadata or network set is inconsistent.
Model model_from_checkpoint(const nn::Checkpoint& ckpt);
void save_model(const std::filesystem::path& path, const Model& model, bool include_adam = true,
                const std::string& extra_metadata_json = "{}");
Model load_model(const std::filesystem::path& path);
/// FNV-1a 64 of the checkpoint file bytes, hex.
std::string file_hash(const std::filesystem::path& path);

}  // namespace relit
