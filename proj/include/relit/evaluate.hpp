// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "relit/dataset.hpp"
#include "relit/metrics.hpp"
#include "relit/model.hpp"

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

namespace relit {

inline constexpr int kReportVersion = 1;

/// Version control revision the library was built from.
const char* build_id();

struct MetricRow {
    int view = 0;
    int light = 0;
    double psnr = 0.0;
    double ssim = 0.0;
    bool fallback = false;  // barycentric baseline fell back to nearest light
};

struct MetricReport {
    std::string method;
    std::string checkpoint_hash = "none";
    std::vector<MetricRow> rows;
    double mean_psnr = 0.0;
    double mean_ssim = 0.0;
    // Timing (hardware dependent, excluded from determinism comparisons).
    double seconds_per_frame = 0.0;
    double rays_per_second = 0.0;
};

/// Produces the prediction for a held-out (view, light) pair; sets
/// `fallback` when the method had to degrade.
using PairRenderer = std::function<Image(int view, int light, bool& fallback)>;

/// Renders every held-out (view, light) pair in view-major order and scores
/// it against the dataset image. Throws DomainError for an invalid split.
MetricReport evaluate(const PairRenderer& render, const OLATDataset& dataset, const SplitSpec& split,
                      const std::string& method);

MetricReport evaluate_model(const Model& model, const OLATDataset& dataset, const SplitSpec& split);
/// kind: "nearest" or "barycentric".
MetricReport evaluate_baseline(const std::string& kind, const OLATDataset& dataset, const SplitSpec& split);

/// Delimited text with a versioned "#" header. Timing goes on a single
/// "# timing:" line so reports can be compared without it.
void write_report(const std::filesystem::path& path, const MetricReport& report);
std::string format_report(const MetricReport& report);
/// The report text without its timing line.
std::string strip_timing(const std::string& report_text);

}  // namespace relit
