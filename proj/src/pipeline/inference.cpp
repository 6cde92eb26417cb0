#include "groupreg/pipeline/inference.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <json.hpp>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/pipeline/training.hpp"

namespace groupreg {

using json = nlohmann::json;

Registration register_target(const RegistrationNet<float>& net, const Series& s, std::size_t target) {
    s.validate();
    if (target >= s.frame_count())
        throw DimensionError("target index " + std::to_string(target) + " outside 0.." +
                             std::to_string(s.frame_count() - 1));
    Registration r;
    r.source_indices = source_indices(s.frame_count(), target, s.frame_count() - 1);
    const auto gin = inference_group(s, target, r.source_indices);
    NoGradGuard no_grad;
    const auto out = forward_group(net, gin);
    const auto fields = out.fields.data();
    r.fields.assign(fields.begin(), fields.end());

    const std::size_t k = r.source_indices.size(), plane = s.plane();
    std::vector<float> raw;
    raw.reserve(k * plane);
    for (auto j : r.source_indices) raw.insert(raw.end(), s.frames[j].begin(), s.frames[j].end());
    std::vector<float> warped(k * plane);
    kernels::warp_bilinear_forward<float>({k, 1, s.height, s.width}, raw, r.fields, warped);
    // Same summation order as the mean layer.
    r.registered.assign(warped.begin(), warped.begin() + static_cast<std::ptrdiff_t>(plane));
    for (std::size_t j = 1; j < k; ++j)
        for (std::size_t i = 0; i < plane; ++i) r.registered[i] += warped[j * plane + i];
    const float inv = 1.0f / static_cast<float>(k);
    for (auto& v : r.registered) v *= inv;
    return r;
}

MetricReport evaluate_model(const RegistrationNet<float>& net, const Series& s,
                            const std::string& method) {
    std::vector<std::vector<float>> registered, fields;
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
        auto r = register_target(net, s, t);
        registered.push_back(std::move(r.registered));
        fields.push_back(std::move(r.fields));
    }
    return evaluate_registered(eval_view(s), registered, method, &fields);
}

MetricReport evaluate_plain_mean(const Series& s, const std::string& method) {
    std::vector<std::vector<float>> registered, fields;
    for (std::size_t t = 0; t < s.frame_count(); ++t) {
        registered.push_back(unregistered_mean(s.frames, t));
        fields.emplace_back((s.frame_count() - 1) * 2 * s.plane(), 0.0f);
    }
    return evaluate_registered(eval_view(s), registered, method, &fields);
}

std::string format_number(double v) {
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

void write_report_csv(const std::filesystem::path& file, const MetricReport& report) {
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out << "method,snr_db,target_idx,rsnr_db,ssim,epe_px\n";
    for (const auto& r : report.rows) {
        out << r.method << ',' << (r.snr_db ? format_number(*r.snr_db) : "") << ',' << r.target_idx
            << ',' << format_number(r.rsnr_db) << ',' << format_number(r.ssim) << ','
            << (r.epe_px ? format_number(*r.epe_px) : "") << '\n';
    }
    if (!out) throw DataError("write failed: " + file.string());
}

namespace {

json number_or_null(const std::optional<double>& v) {
    if (!v) return nullptr;
    if (std::isinf(*v)) return *v > 0 ? "inf" : "-inf";
    return *v;
}

}  // namespace

void write_report_json(const std::filesystem::path& file, const MetricReport& report) {
    json arr = json::array();
    for (const auto& s : report.aggregate()) {
        arr.push_back({{"method", s.method},
                       {"snr_db", number_or_null(s.snr_db)},
                       {"count", s.count},
                       {"rsnr_db_mean", number_or_null(s.rsnr_mean)},
                       {"rsnr_db_std", number_or_null(s.rsnr_std)},
                       {"ssim_mean", s.ssim_mean},
                       {"ssim_std", s.ssim_std},
                       {"epe_px_mean", number_or_null(s.epe_mean)},
                       {"epe_px_std", number_or_null(s.epe_std)},
                       {"motion_px_mean", number_or_null(s.motion_mean)}});
    }
    std::ofstream out(file, std::ios::trunc);
    if (!out) throw DataError("cannot write " + file.string());
    out << json{{"summary", arr}}.dump(2) << '\n';
}

}  // namespace groupreg
