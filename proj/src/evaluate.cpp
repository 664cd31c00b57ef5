// SPDX-License-Identifier: Apache-2.0

#include "relit/evaluate.hpp"

#include "relit/baselines.hpp"
#include "relit/error.hpp"

#include <chrono>
#include <cstdio>
#include <fstream>
#include <sstream>

#ifndef RELIT_BUILD_ID
#define RELIT_BUILD_ID "unknown"
#endif

namespace relit {

const char* build_id() { return RELIT_BUILD_ID; }

MetricReport evaluate(const PairRenderer& render, const OLATDataset& ds, const SplitSpec& split,
                      const std::string& method) {
    split.validate(ds.camera_count(), ds.light_count());
    if (split.held_out_views.empty() || split.held_out_lights.empty())
        throw DomainError("evaluate: the split holds out no (view, light) pair");
    MetricReport report;
    report.method = method;
    double seconds = 0.0;
    for (int v : split.held_out_views) {
        for (int l : split.held_out_lights) {
            MetricRow row;
            row.view = v;
            row.light = l;
            const auto t0 = std::chrono::steady_clock::now();
            const Image pred = render(v, l, row.fallback);
            seconds += std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            const Image& truth = ds.image(v, l);
            row.psnr = psnr(pred, truth);
            row.ssim = ssim(pred, truth);
            report.mean_psnr += row.psnr;
            report.mean_ssim += row.ssim;
            report.rows.push_back(row);
        }
    }
    const auto n = static_cast<double>(report.rows.size());
    report.mean_psnr /= n;
    report.mean_ssim /= n;
    report.seconds_per_frame = seconds / n;
    const double rays = static_cast<double>(ds.width) * ds.height * n;
    report.rays_per_second = seconds > 0.0 ? rays / seconds : 0.0;
    return report;
}

MetricReport evaluate_model(const Model& model, const OLATDataset& ds, const SplitSpec& split) {
    return evaluate(
        [&](int v, int l, bool&) {
            return render_view(model, ds.cameras[static_cast<std::size_t>(v)], model.planes,
                               ds.lights.directions[static_cast<std::size_t>(l)])
                .color;
        },
        ds, split, to_string(model.config.variant));
}

MetricReport evaluate_baseline(const std::string& kind, const OLATDataset& ds, const SplitSpec& split) {
    if (kind != "nearest" && kind != "barycentric")
        throw DomainError("unknown baseline '" + kind + "' (expected nearest or barycentric)");
    // The baselines read training lights from the dataset's own split.
    OLATDataset view = ds;
    view.split = split;
    return evaluate(
        [&](int v, int l, bool& fallback) {
            const Vec3& d = ds.lights.directions[static_cast<std::size_t>(l)];
            BaselineImage b = kind == "nearest" ? nearest_light_baseline(view, v, d) : barycentric_baseline(view, v, d);
            fallback = b.fallback;
            return std::move(b.image);
        },
        view, split, kind);
}

std::string format_report(const MetricReport& r) {
    std::ostringstream os;
    char buf[256];
    os << "# relit-eval-report v" << kReportVersion << '\n';
    os << "# color_space: linear\n";
    os << "# psnr: peak=1.0 cap_db=" << kPsnrCapDb << " channels=rgb\n";
    const SsimParams sp;
    std::snprintf(buf, sizeof buf, "# ssim: luma=rec709 window=%d gaussian_sigma=%g k1=%g k2=%g valid_windows\n",
                  sp.window, sp.sigma, sp.k1, sp.k2);
    os << buf;
    os << "# lpips: omitted (needs a pretrained perceptual network)\n";
    os << "# method: " << r.method << '\n';
    os << "# checkpoint: " << r.checkpoint_hash << '\n';
    os << "# build: " << build_id() << '\n';
    os << "view,light,psnr_db,ssim,fallback\n";
    for (const auto& row : r.rows) {
        std::snprintf(buf, sizeof buf, "%d,%d,%.6f,%.6f,%d\n", row.view, row.light, row.psnr, row.ssim,
                      row.fallback ? 1 : 0);
        os << buf;
    }
    std::snprintf(buf, sizeof buf, "# mean: psnr_db=%.6f ssim=%.6f rows=%zu\n", r.mean_psnr, r.mean_ssim, r.rows.size());
    os << buf;
    std::snprintf(buf, sizeof buf, "# timing: seconds_per_frame=%.6g rays_per_second=%.6g\n", r.seconds_per_frame,
                  r.rays_per_second);
    os << buf;
    return os.str();
}

void write_report(const std::filesystem::path& path, const MetricReport& report) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    os << format_report(report);
    if (!os) throw IoError("failed writing " + path.string());
}

std::string strip_timing(const std::string& text) {
    std::istringstream is(text);
    std::string line, out;
    while (std::getline(is, line))
        if (line.rfind("# timing:", 0) != 0) out += line + '\n';
    return out;
}

}  // namespace relit
