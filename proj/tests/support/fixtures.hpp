// SPDX-License-Identifier: Apache-2.0
//
// Shared helpers for the model-level tests and the acceptance runner.

#pragma once

#include "relit/dataset.hpp"
#include "relit/model.hpp"
#include "relit/nn.hpp"
#include "relit/scene.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

namespace fixtures {

/// Reference desk-scale dataset: 3x3 cameras 10 degrees apart, 16 hemisphere
/// lights, square images, one held-out view and two held-out lights.
inline relit::OLATDataset reference_dataset(int resolution = 64, std::uint64_t seed = 42) {
    const relit::Scene scene = relit::make_scene("reference");
    const double focal = resolution * 0.5 / std::tan(relit::degrees_to_radians(20.0));
    const auto cams = relit::camera_grid(3, 10.0, 3.0, {0.0, 0.0, 0.0}, resolution, resolution, focal);
    relit::GenerateOptions opts;
    opts.held_out_views = 1;
    opts.held_out_lights = 2;
    return relit::generate_dataset(scene, cams, relit::light_lattice(16, true), seed, opts);
}

/// Small dataset that trains in well under a second per epoch.
inline relit::OLATDataset tiny_dataset(std::uint64_t seed = 7) {
    const relit::Scene scene = relit::make_scene("reference");
    const int res = 12;
    const double focal = res * 0.5 / std::tan(relit::degrees_to_radians(20.0));
    const auto cams = relit::camera_grid(2, 10.0, 3.0, {0.0, 0.0, 0.0}, res, res, focal);
    relit::GenerateOptions opts;
    opts.held_out_views = 1;
    opts.held_out_lights = 1;
    return relit::generate_dataset(scene, cams, relit::light_lattice(5, true), seed, opts);
}

inline relit::Vec3 random_upper(std::mt19937_64& rng) {
    std::normal_distribution<double> g;
    for (;;) {
        relit::Vec3 d{g(rng), g(rng), g(rng)};
        if (relit::length(d) < 1e-3) continue;
        d = relit::normalized(d);
        if (d.z < 0.2) continue;
        return d;
    }
}

/// Random batch with coordinates inside the unit box and front-facing directions.
inline relit::TrainBatch<double> random_batch(int n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coord(-0.9, 0.9), col(0.0, 1.0);
    relit::TrainBatch<double> b;
    b.coords.resize(4, n);
    b.view.resize(3, n);
    b.light.resize(3, n);
    b.color.resize(3, n);
    for (int j = 0; j < n; ++j) {
        for (int k = 0; k < 4; ++k) b.coords(k, j) = coord(rng);
        const relit::Vec3 v = random_upper(rng), l = random_upper(rng);
        for (int k = 0; k < 3; ++k) {
            b.view(k, j) = v[k];
            b.light(k, j) = l[k];
            b.color(k, j) = col(rng);
        }
    }
    return b;
}

inline relit::nn::Gradients<double>& gradients_for(relit::ModelGradients<double>& g, const std::string& name) {
    if (name == "trunk") return g.trunk;
    if (name == "normal_head") return g.normal_head;
    if (name == "albedo_head") return g.albedo_head;
    if (name == "roughness_head") return g.roughness_head;
    if (name == "encoder") return g.encoder;
    return g.tail;
}

/// Central differences of the total loss against loss_and_gradients, over
/// every network of the model.
inline relit::nn::GradCheckReport composite_grad_check(relit::RelitModel<double>& model,
                                                       const relit::TrainBatch<double>& batch, double tolerance,
                                                       const relit::nn::GradCheckOptions& options) {
    auto grads = relit::loss_and_gradients(model, batch).second;
    std::vector<relit::nn::ParamTensor> tensors;
    for (auto& [name, params] : model.nets.named()) {
        auto views = relit::nn::param_tensors(name, *params, gradients_for(grads, name));
        tensors.insert(tensors.end(), views.begin(), views.end());
    }
    const auto loss = [&] {
        for (auto& np : model.nets.named()) np.second->touch();
        return relit::evaluate_loss(model, batch).total;
    };
    return relit::nn::grad_check(tensors, loss, tolerance, options);
}

}  // namespace fixtures
