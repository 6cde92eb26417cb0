#include <gtest/gtest.h>

#include <omp.h>

#include "groupreg/kernels.hpp"
#include "groupreg/random.hpp"

using namespace groupreg;
using namespace groupreg::kernels;

namespace {

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo = -1, double hi = 1) {
    Rng rng(seed);
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return v;
}

void expect_close(const std::vector<double>& a, const std::vector<double>& b, double tol) {
    ASSERT_EQ(a.size(), b.size());
    for (std::size_t i = 0; i < a.size(); ++i) ASSERT_NEAR(a[i], b[i], tol) << "index " << i;
}

}  // namespace

class ConvAgainstReference : public ::testing::TestWithParam<std::size_t> {};

TEST_P(ConvAgainstReference, ForwardAndBackwardAgree) {
    const std::size_t stride = GetParam();
    ConvGeometry g{3, 4, 10, 12, 5, 3, 3, stride, 1};
    const auto in = random_vec(g.input_size(), 1);
    const auto wt = random_vec(g.weight_size(), 2);
    const auto bias = random_vec(g.out_channels, 3);
    const auto go = random_vec(g.output_size(), 4);

    std::vector<double> y(g.output_size()), y_ref(g.output_size());
    conv2d_forward<double>(g, in, wt, bias, y);
    reference::conv2d_forward<double>(g, in, wt, bias, y_ref);
    expect_close(y, y_ref, 1e-12);

    std::vector<double> gi(in.size()), gw(wt.size()), gb(bias.size());
    std::vector<double> gi_ref(in.size()), gw_ref(wt.size()), gb_ref(bias.size());
    conv2d_backward<double>(g, in, wt, go, gi, gw, gb);
    reference::conv2d_backward<double>(g, in, wt, go, gi_ref, gw_ref, gb_ref);
    expect_close(gi, gi_ref, 1e-12);
    expect_close(gw, gw_ref, 1e-11);
    expect_close(gb, gb_ref, 1e-12);
}

INSTANTIATE_TEST_SUITE_P(Strides, ConvAgainstReference, ::testing::Values(1u, 2u));

TEST(Kernels, WarpMatchesReferenceExactly) {
    ImageGeometry g{2, 3, 9, 11};
    const auto src = random_vec(g.size(), 5);
    const auto disp = random_vec(g.batch * 2 * g.plane(), 6, -3, 3);
    const auto go = random_vec(g.size(), 7);
    std::vector<double> out(g.size()), out_ref(g.size());
    warp_bilinear_forward<double>(g, src, disp, out);
    reference::warp_bilinear_forward<double>(g, src, disp, out_ref);
    EXPECT_EQ(out, out_ref);

    std::vector<double> gs(src.size()), gd(disp.size()), gs_ref(src.size()), gd_ref(disp.size());
    warp_bilinear_backward<double>(g, src, disp, go, gs, gd);
    reference::warp_bilinear_backward<double>(g, src, disp, go, gs_ref, gd_ref);
    expect_close(gs, gs_ref, 1e-13);
    expect_close(gd, gd_ref, 1e-13);
}

TEST(Kernels, BoxSumMatchesReference) {
    ImageGeometry g{2, 2, 13, 10};
    const auto in = random_vec(g.size(), 8);
    for (std::size_t win : {1u, 3u, 9u, 15u}) {
        std::vector<double> out(g.size()), out_ref(g.size());
        box_sum<double>(g, win, in, out);
        reference::box_sum<double>(g, win, in, out_ref);
        expect_close(out, out_ref, 1e-12);
    }
}

TEST(Kernels, BoxSumIsSelfAdjoint) {
    ImageGeometry g{1, 1, 11, 8};
    const auto x = random_vec(g.size(), 9), y = random_vec(g.size(), 10);
    std::vector<double> bx(g.size()), by(g.size());
    box_sum<double>(g, 5, x, bx);
    box_sum<double>(g, 5, y, by);
    double lhs = 0, rhs = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        lhs += bx[i] * y[i];
        rhs += x[i] * by[i];
    }
    EXPECT_NEAR(lhs, rhs, 1e-12);
}

TEST(Kernels, ResultsIndependentOfThreadCount) {
    ConvGeometry g{4, 3, 16, 16, 6, 3, 3, 1, 1};
    const auto in = random_vec(g.input_size(), 11);
    const auto wt = random_vec(g.weight_size(), 12);
    const auto go = random_vec(g.output_size(), 13);
    auto run = [&](int threads) {
        omp_set_num_threads(threads);
        std::vector<double> y(g.output_size()), gw(wt.size()), gi(in.size());
        conv2d_forward<double>(g, in, wt, {}, y);
        conv2d_backward<double>(g, in, wt, go, gi, gw, {});
        y.insert(y.end(), gw.begin(), gw.end());
        y.insert(y.end(), gi.begin(), gi.end());
        return y;
    };
    const auto one = run(1);
    const auto four = run(4);
    omp_set_num_threads(omp_get_num_procs());
    EXPECT_EQ(one, four);
}
