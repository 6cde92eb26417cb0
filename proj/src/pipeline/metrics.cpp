#include "groupreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "groupreg/error.hpp"
#include "groupreg/kernels.hpp"
#include "groupreg/phantom.hpp"

namespace groupreg {

template <typename T>
double rsnr(std::span<const T> ref, std::span<const T> x) {
    if (ref.size() != x.size())
        throw DimensionError("rsnr: size mismatch " + std::to_string(ref.size()) + " vs " +
                             std::to_string(x.size()));
    double err = 0, power = 0;
    for (std::size_t i = 0; i < ref.size(); ++i) {
        const double d = static_cast<double>(x[i]) - static_cast<double>(ref[i]);
        err += d * d;
        power += static_cast<double>(ref[i]) * static_cast<double>(ref[i]);
    }
    if (power == 0) throw DataError("rsnr: reference is all zeros");
    if (err == 0) return kRsnrExact;
    return -10.0 * std::log10(err / power);
}

std::string format_rsnr(double db) {
    if (std::isinf(db) && db > 0) return "> 300 dB";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f dB", db);
    return buf;
}

namespace {

std::vector<double> gaussian_window(std::size_t size, double sigma) {
    std::vector<double> g(size * size);
    const double c = (static_cast<double>(size) - 1) / 2;
    double total = 0;
    for (std::size_t i = 0; i < size; ++i)
        for (std::size_t j = 0; j < size; ++j) {
            const double y = static_cast<double>(i) - c, x = static_cast<double>(j) - c;
            g[i * size + j] = std::exp(-(x * x + y * y) / (2 * sigma * sigma));
            total += g[i * size + j];
        }
    for (auto& v : g) v /= total;
    return g;
}

}  // namespace

template <typename T>
double ssim(std::span<const T> ref, std::span<const T> x, std::size_t h, std::size_t w) {
    constexpr std::size_t win = 11;
    if (ref.size() != x.size() || ref.size() != h * w)
        throw DimensionError("ssim: images must both be h x w");
    if (h < win || w < win) throw DimensionError("ssim: image smaller than the 11x11 window");
    const auto [rmin, rmax] = std::minmax_element(ref.begin(), ref.end());
    const auto [xmin, xmax] = std::minmax_element(x.begin(), x.end());
    const double range = std::max<double>(*rmax, *xmax) - std::min<double>(*rmin, *xmin);
    if (!(range > 0)) throw DataError("ssim: zero dynamic range");
    const double c1 = (0.01 * range) * (0.01 * range), c2 = (0.03 * range) * (0.03 * range);
    static const auto g = gaussian_window(win, 1.5);

    double total = 0;
    const std::size_t oh = h - win + 1, ow = w - win + 1;
    for (std::size_t i = 0; i < oh; ++i)
        for (std::size_t j = 0; j < ow; ++j) {
            double mr = 0, mx = 0, rr = 0, xx = 0, rx = 0;
            for (std::size_t a = 0; a < win; ++a)
                for (std::size_t b = 0; b < win; ++b) {
                    const double wt = g[a * win + b];
                    const double r = ref[(i + a) * w + j + b], v = x[(i + a) * w + j + b];
                    mr += wt * r;
                    mx += wt * v;
                    rr += wt * r * r;
                    xx += wt * v * v;
                    rx += wt * r * v;
                }
            const double vr = rr - mr * mr, vx = xx - mx * mx, cov = rx - mr * mx;
            total += ((2 * mr * mx + c1) * (2 * cov + c2)) /
                     ((mr * mr + mx * mx + c1) * (vr + vx + c2));
        }
    return total / static_cast<double>(oh * ow);
}

template <typename T>
double endpoint_error(std::span<const T> est, std::span<const T> gt,
                      std::span<const unsigned char> mask) {
    if (est.size() != gt.size() || est.size() != 2 * mask.size())
        throw DimensionError("endpoint_error: fields must be [2,H,W] with an H x W mask");
    const std::size_t plane = mask.size();
    double total = 0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < plane; ++i) {
        if (!mask[i]) continue;
        const double dr = static_cast<double>(est[i]) - gt[i];
        const double dc = static_cast<double>(est[plane + i]) - gt[plane + i];
        total += std::sqrt(dr * dr + dc * dc);
        ++count;
    }
    if (count == 0) throw DataError("endpoint_error: empty mask");
    return total / static_cast<double>(count);
}

namespace {

// Bilinear sample of one field component with border clamping.
double sample_clamped(std::span<const float> plane, std::size_t h, std::size_t w, double y,
                      double x) {
    y = std::clamp(y, 0.0, static_cast<double>(h - 1));
    x = std::clamp(x, 0.0, static_cast<double>(w - 1));
    const std::size_t y0 = std::min(static_cast<std::size_t>(y), h - 1);
    const std::size_t x0 = std::min(static_cast<std::size_t>(x), w - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    return (1 - fy) * ((1 - fx) * plane[y0 * w + x0] + fx * plane[y0 * w + x1]) +
           fy * ((1 - fx) * plane[y1 * w + x0] + fx * plane[y1 * w + x1]);
}

}  // namespace

std::vector<float> relative_ground_truth(std::span<const float> g_target,
                                         std::span<const float> g_source, std::size_t h,
                                         std::size_t w, int iterations) {
    const std::size_t plane = h * w;
    if (g_target.size() != 2 * plane || g_source.size() != 2 * plane)
        throw DimensionError("relative_ground_truth: fields must be [2,H,W]");
    const auto sr = g_source.subspan(0, plane), sc = g_source.subspan(plane, plane);
    std::vector<float> u(2 * plane);
    for (std::size_t i = 0; i < h; ++i)
        for (std::size_t j = 0; j < w; ++j) {
            const std::size_t p = i * w + j;
            double ur = g_target[p] - g_source[p], uc = g_target[plane + p] - g_source[plane + p];
            for (int it = 0; it < iterations; ++it) {
                const double y = static_cast<double>(i) + ur, x = static_cast<double>(j) + uc;
                ur = g_target[p] - sample_clamped(sr, h, w, y, x);
                uc = g_target[plane + p] - sample_clamped(sc, h, w, y, x);
            }
            u[p] = static_cast<float>(ur);
            u[plane + p] = static_cast<float>(uc);
        }
    return u;
}

std::vector<MetricSummary> MetricReport::aggregate() const {
    std::vector<MetricSummary> out;
    auto same_key = [](const MetricSummary& s, const MetricRow& r) {
        return s.method == r.method && s.snr_db == r.snr_db;
    };
    for (const auto& r : rows) {
        auto it = std::find_if(out.begin(), out.end(), [&](const auto& s) { return same_key(s, r); });
        if (it != out.end()) continue;
        MetricSummary s;
        s.method = r.method;
        s.snr_db = r.snr_db;
        std::vector<double> rs, ss, es, ms;
        for (const auto& q : rows) {
            if (!same_key(s, q)) continue;
            rs.push_back(q.rsnr_db);
            ss.push_back(q.ssim);
            if (q.epe_px) es.push_back(*q.epe_px);
            if (q.motion_px) ms.push_back(*q.motion_px);
        }
        auto stats = [](const std::vector<double>& v, double& mean, double& sd) {
            if (std::all_of(v.begin(), v.end(), [](double x) { return std::isinf(x) && x > 0; })) {
                mean = kRsnrExact;
                sd = 0;
                return;
            }
            mean = 0;
            for (double x : v) mean += x;
            mean /= static_cast<double>(v.size());
            sd = 0;
            for (double x : v) sd += (x - mean) * (x - mean);
            sd = std::sqrt(sd / static_cast<double>(v.size()));
        };
        s.count = rs.size();
        stats(rs, s.rsnr_mean, s.rsnr_std);
        stats(ss, s.ssim_mean, s.ssim_std);
        if (!es.empty()) {
            double m, d;
            stats(es, m, d);
            s.epe_mean = m;
            s.epe_std = d;
        }
        if (!ms.empty()) {
            double m, d;
            stats(ms, m, d);
            s.motion_mean = m;
        }
        out.push_back(s);
    }
    return out;
}

std::vector<float> reference_for_target(const EvalSeries& s, std::size_t target) {
    if (s.gt_fields.empty()) return s.reference;
    if (target >= s.gt_fields.size()) throw DataError("reference_for_target: bad target index");
    std::vector<float> out(s.reference.size());
    const kernels::ImageGeometry g{1, 1, s.height, s.width};
    kernels::warp_bilinear_forward<float>(g, s.reference, s.gt_fields[target], out);
    return out;
}

MetricRow score_target(const EvalSeries& s, std::size_t target, std::span<const float> registered,
                       const std::string& method, std::optional<std::span<const float>> fields) {
    const std::size_t plane = s.height * s.width;
    if (registered.size() != plane) throw DimensionError("score_target: registered image size");
    const auto ref = reference_for_target(s, target);
    MetricRow row;
    row.method = method;
    row.snr_db = s.snr_db;
    row.target_idx = target;
    row.rsnr_db = rsnr<float>(ref, registered);
    row.ssim = ssim<float>(ref, registered, s.height, s.width);

    if (fields && !s.gt_fields.empty() && s.heart_row && s.heart_col && s.heart_radius) {
        const auto& gt = s.gt_fields;
        const std::size_t k = gt.size() - 1;
        if (fields->size() != k * 2 * plane)
            throw DimensionError("score_target: expected " + std::to_string(k) + " fields");
        // Heart position in the target frame: t(p) = ref(p + g_t(p)).
        const auto& gtt = gt[target];
        const std::size_t hr = std::min(static_cast<std::size_t>(std::lround(std::max(0.0, *s.heart_row))), s.height - 1);
        const std::size_t hc = std::min(static_cast<std::size_t>(std::lround(std::max(0.0, *s.heart_col))), s.width - 1);
        const double row_t = *s.heart_row - gtt[hr * s.width + hc];
        const double col_t = *s.heart_col - gtt[plane + hr * s.width + hc];
        const auto mask = heart_mask(s.height, s.width, row_t, col_t, *s.heart_radius);
        const std::vector<float> zero(2 * plane, 0.0f);
        double epe = 0, motion = 0;
        std::size_t slot = 0;
        for (std::size_t j = 0; j < gt.size(); ++j) {
            if (j == target) continue;
            const auto rel = relative_ground_truth(gtt, gt[j], s.height, s.width);
            epe += endpoint_error<float>(fields->subspan(slot * 2 * plane, 2 * plane), rel, mask);
            motion += endpoint_error<float>(zero, rel, mask);
            ++slot;
        }
        row.epe_px = epe / static_cast<double>(k);
        row.motion_px = motion / static_cast<double>(k);
    }
    return row;
}

MetricReport evaluate_registered(const EvalSeries& s,
                                 const std::vector<std::vector<float>>& registered,
                                 const std::string& method,
                                 const std::vector<std::vector<float>>* fields) {
    if (registered.size() != s.frames)
        throw DimensionError("evaluate_registered: need one registered image per target");
    MetricReport report;
    for (std::size_t t = 0; t < s.frames; ++t) {
        std::optional<std::span<const float>> f;
        if (fields) f = std::span<const float>((*fields)[t]);
        report.rows.push_back(score_target(s, t, registered[t], method, f));
    }
    return report;
}

std::vector<float> unregistered_mean(const std::vector<std::vector<float>>& frames,
                                     std::size_t target) {
    if (frames.size() < 2 || target >= frames.size())
        throw DimensionError("unregistered_mean: need a valid target and at least one source");
    std::vector<float> acc;
    for (std::size_t j = 0; j < frames.size(); ++j) {
        if (j == target) continue;
        if (acc.empty())
            acc = frames[j];
        else
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += frames[j][i];
    }
    const float inv = 1.0f / static_cast<float>(frames.size() - 1);
    for (auto& v : acc) v *= inv;
    return acc;
}

template double rsnr<float>(std::span<const float>, std::span<const float>);
template double rsnr<double>(std::span<const double>, std::span<const double>);
template double ssim<float>(std::span<const float>, std::span<const float>, std::size_t, std::size_t);
template double ssim<double>(std::span<const double>, std::span<const double>, std::size_t,
                             std::size_t);
template double endpoint_error<float>(std::span<const float>, std::span<const float>,
                                      std::span<const unsigned char>);
template double endpoint_error<double>(std::span<const double>, std::span<const double>,
                                       std::span<const unsigned char>);

}  // namespace groupreg
