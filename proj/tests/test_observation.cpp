#include "common.hpp"

#include "koopeq/observation.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

using namespace koopeq;
using koopeq::testing::random_field;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Trajectory random_trajectory(std::size_t n, std::size_t snaps, std::uint64_t seed) {
    std::vector<GridField> v;
    for (std::size_t k = 0; k < snaps; ++k) v.push_back(random_field(n, seed * 1000 + k));
    return Trajectory::from_snapshots(v, 0.1);
}

}  // namespace

TEST(ConvolveObserve, DiracIsPointEvaluation) {
    const auto y = random_field(32, 1);
    for (long s = 0; s < 32; ++s) EXPECT_EQ(convolve_observe(y, DiracKernel{}, s), y[static_cast<std::size_t>(s)]);
}

TEST(ConvolveObserve, ConstantFieldWithGaussian) {
    const auto y = GridField::sample(32, kTwoPi, [](double) { return 1.0; });
    const auto w = kernel_weights(GaussianKernel{2.0}, 32, kTwoPi);
    double sum = 0.0;
    for (double v : w) sum += v;
    for (long s = 0; s < 32; ++s) EXPECT_NEAR(convolve_observe(y, GaussianKernel{2.0}, s), y.dx() * sum, 1e-14);
}

TEST(ConvolveObserve, DiscreteDeltaCustomKernel) {
    const auto y = GridField::sample(32, kTwoPi, [](double x) { return std::sin(x); });
    std::vector<double> w(32, 0.0);
    w[0] = 1.0 / y.dx();  // unit mass at offset 0 under the dx quadrature
    for (long s = 0; s < 32; ++s) EXPECT_NEAR(convolve_observe(y, CustomKernel{w}, s), std::sin(y.x(s)), 1e-14);
}

TEST(ConvolveObserve, IndexOutOfRange) {
    const auto y = random_field(16, 2);
    EXPECT_THROW((void)convolve_observe(y, DiracKernel{}, 16), Error);
    EXPECT_THROW((void)convolve_observe(y, DiracKernel{}, -1), Error);
}

TEST(ConvolveObserve, KernelValidation) {
    const auto y = random_field(16, 2);
    EXPECT_THROW((void)convolve_observe(y, GaussianKernel{-1.0}, 0), Error);
    EXPECT_THROW((void)convolve_observe(y, CustomKernel{std::vector<double>(15, 1.0)}, 0), Error);
}

TEST(ConvolveObserve, PreTransformAppliedBeforeKernel) {
    const auto y = random_field(16, 3);
    const auto sq = [](double v) { return v * v; };
    for (long s = 0; s < 16; ++s) EXPECT_EQ(convolve_observe(y, DiracKernel{}, s, sq), sq(y[static_cast<std::size_t>(s)]));
}

TEST(ShiftField, GroupAction) {
    const auto y = random_field(32, 4);
    EXPECT_EQ(shift_field(y, 0), y);
    EXPECT_EQ(shift_field(y, 32), y);
    EXPECT_EQ(shift_field(y, -3), shift_field(y, 29));
    for (long g : {1L, 7L, -5L})
        for (long h : {2L, 31L, -9L}) EXPECT_EQ(shift_field(shift_field(y, g), h), shift_field(y, g + h));
}

TEST(ShiftField, SineQuarterShiftIsExact) {
    const auto y = GridField::sample(32, kTwoPi, [](double x) { return std::sin(x); });
    const auto s = shift_field(y, 8);
    for (std::size_t i = 0; i < 32; ++i) EXPECT_EQ(s[i], y[(i + 24) % 32]);
    const auto expect = GridField::sample(32, kTwoPi, [](double x) { return std::sin(x - std::numbers::pi / 2); });
    EXPECT_LT((s.eigen() - expect.eigen()).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(ConvolveObserve, ShiftCommutesWithObservation) {
    // f_{s}(g . y) = f_{s-g}(y) for every kernel, shift and site.
    const std::vector<Kernel> kernels{DiracKernel{}, GaussianKernel{1.5},
                                      CustomKernel{random_field(32, 77).vector()}};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto y = random_field(32, seed);
        for (const auto& k : kernels)
            for (long g = 0; g < 32; ++g) {
                const auto sy = shift_field(y, g);
                for (long s = 0; s < 32; ++s)
                    EXPECT_NEAR(convolve_observe(sy, k, s), convolve_observe(y, k, static_cast<long>(wrap_index(s - g, 32))),
                                1e-12);
            }
    }
}

TEST(WindowDelayObserve, FullStateObservable) {
    const auto t = random_trajectory(16, 5, 1);
    const auto m = ObservationMap::full_state(16, 1);
    for (std::size_t k = 0; k < 5; ++k) EXPECT_TRUE(window_delay_observe(t, m, k) == t.data.col(k));
}

TEST(WindowDelayObserve, DelayStackingMostRecentFirst) {
    const auto t = random_trajectory(8, 6, 2);
    ObservationMap m;
    m.window_width = 1;
    m.delays = 3;
    m.anchor = 5;
    const auto z = window_delay_observe(t, m, 4);
    ASSERT_EQ(z.size(), 3);
    EXPECT_EQ(z(0), t.data(5, 4));
    EXPECT_EQ(z(1), t.data(5, 3));
    EXPECT_EQ(z(2), t.data(5, 2));
}

TEST(WindowDelayObserve, OrderingContract) {
    const auto t = random_trajectory(16, 4, 3);
    ObservationMap m;
    m.window_width = 3;
    m.delays = 2;
    m.anchor = 14;
    m.stride = 2;
    const auto z = window_delay_observe(t, m, 3);
    for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t i = 0; i < 3; ++i)
            EXPECT_EQ(z(static_cast<Eigen::Index>(j * 3 + i)),
                      t.data(static_cast<Eigen::Index>((14 + 2 * i) % 16), static_cast<Eigen::Index>(3 - j)));
}

TEST(WindowDelayObserve, InsufficientHistory) {
    const auto t = random_trajectory(8, 6, 4);
    ObservationMap m;
    m.delays = 3;
    EXPECT_THROW((void)window_delay_observe(t, m, 1), Error);
    EXPECT_NO_THROW((void)window_delay_observe(t, m, 2));
}

TEST(WindowDelayObserve, EquivarianceWitness) {
    const auto t = random_trajectory(16, 4, 5);
    ObservationMap m;
    m.window_width = 5;
    m.delays = 2;
    m.kernel = GaussianKernel{3.0};
    for (long g = 0; g < 16; ++g) {
        const auto st = shift_trajectory(t, g);
        for (long a = 0; a < 16; ++a) {
            const auto lhs = window_delay_observe(st, m.at_anchor(a), 3);
            const auto rhs = window_delay_observe(t, m.at_anchor(static_cast<long>(wrap_index(a - g, 16))), 3);
            EXPECT_EQ((lhs - rhs).cwiseAbs().maxCoeff(), 0.0) << "g=" << g << " a=" << a;
        }
    }
}

TEST(ObservationMap, Validation) {
    ObservationMap m;
    m.window_width = 9;
    m.stride = 2;
    EXPECT_THROW(m.validate(16), Error);
    m.window_width = 8;
    EXPECT_NO_THROW(m.validate(16));
    m.anchor = 16;
    EXPECT_THROW(m.validate(16), Error);
    m.anchor = 0;
    m.delays = 0;
    EXPECT_THROW(m.validate(16), Error);
    EXPECT_EQ(ObservationMap::full_state(32, 50).dim(), 1600u);
}

TEST(BuildDataset, PairCounting) {
    const auto t2 = random_trajectory(8, 2, 6);
    const auto ds = build_dataset(t2, ObservationMap::full_state(8, 1));
    ASSERT_EQ(ds.pairs(), 1u);
    EXPECT_TRUE(ds.inputs.col(0) == t2.data.col(0));
    EXPECT_TRUE(ds.outputs.col(0) == t2.data.col(1));

    const auto t = random_trajectory(8, 1001, 7);
    ObservationMap m;
    m.delays = 50;
    EXPECT_EQ(build_dataset(t, m).pairs(), 951u);
}

TEST(BuildDataset, FullStateGivesDmdSnapshotMatrices) {
    const auto t = random_trajectory(8, 12, 8);
    const auto ds = build_dataset(t, ObservationMap::full_state(8, 1));
    EXPECT_TRUE(ds.inputs == t.data.leftCols(11));
    EXPECT_TRUE(ds.outputs == t.data.rightCols(11));
}

TEST(BuildDataset, SuccessorInvariant) {
    const auto t = random_trajectory(16, 20, 9);
    ObservationMap m;
    m.window_width = 4;
    m.delays = 3;
    m.anchor = 13;
    const auto ds = build_dataset(t, m);
    for (std::size_t j = 0; j < ds.pairs(); ++j) {
        EXPECT_TRUE(ds.inputs.col(j) == window_delay_observe(t, m, 2 + j));
        EXPECT_TRUE(ds.outputs.col(j) == window_delay_observe(t, m, 3 + j));
    }
}

TEST(BuildDataset, TooShort) {
    const auto t = random_trajectory(8, 3, 10);
    ObservationMap m;
    m.delays = 3;
    EXPECT_THROW((void)build_dataset(t, m), Error);
}

TEST(BuildDataset, ShiftedTrajectoryEqualsShiftedAnchors) {
    const auto t = random_trajectory(16, 10, 11);
    ObservationMap m;
    m.window_width = 3;
    m.delays = 2;
    const auto pooled = build_pooled_dataset(t, m);
    for (long g : {1L, 6L, 15L}) {
        const auto shifted = build_pooled_dataset(shift_trajectory(t, g), m);
        const std::size_t per = pooled.pairs() / 16;
        for (long a = 0; a < 16; ++a) {
            const auto src = static_cast<Eigen::Index>(wrap_index(a - g, 16) * per);
            EXPECT_TRUE(shifted.inputs.middleCols(a * static_cast<long>(per), per) == pooled.inputs.middleCols(src, per));
        }
    }
}

TEST(BuildControlDataset, NeighbourValues) {
    const auto t = random_trajectory(8, 6, 12);
    ObservationMap m;
    m.window_width = 2;
    m.delays = 2;
    m.anchor = 7;
    const auto ds = build_control_dataset(t, m);
    ASSERT_EQ(ds.control.rows(), 4);
    // left of anchor 7 is site 6, right of the window {7, 0} is site 1.
    for (std::size_t c = 0; c < ds.pairs(); ++c) {
        const auto k = static_cast<Eigen::Index>(1 + c);
        EXPECT_EQ(ds.control(0, c), t.data(6, k));
        EXPECT_EQ(ds.control(1, c), t.data(6, k - 1));
        EXPECT_EQ(ds.control(2, c), t.data(1, k));
        EXPECT_EQ(ds.control(3, c), t.data(1, k - 1));
        EXPECT_EQ(ds.control_next(0, c), t.data(6, k + 1));
    }
}

TEST(FourierObserve, Examples) {
    const auto one = GridField::sample(32, kTwoPi, [](double) { return 1.0; });
    EXPECT_LT(std::abs(fourier_observe(one, 1)), 1e-12);
    const auto c = GridField::sample(32, kTwoPi, [](double x) { return std::cos(x); });
    EXPECT_NEAR(fourier_observe(c, 1).real(), std::numbers::pi, 1e-10);
    EXPECT_NEAR(fourier_observe(c, 1).imag(), 0.0, 1e-10);
    EXPECT_THROW((void)fourier_observe(c, 16), Error);
    EXPECT_THROW((void)fourier_observe(c, -16), Error);
}

TEST(FourierObserve, PhaseLaw) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto y = random_field(32, seed, 5.0);
        for (long k = -15; k < 16; ++k)
            for (long g = 0; g < 32; ++g) {
                const auto lhs = fourier_observe(shift_field(y, g), k);
                const auto rhs = std::polar(1.0, -kTwoPi * k / 5.0 * g * y.dx()) * fourier_observe(y, k);
                EXPECT_LT(std::abs(lhs - rhs), 1e-10);
            }
    }
}

TEST(MinEmbeddingDim, Examples) {
    EXPECT_EQ(min_embedding_dim(0.0, 0.0), 1);
    EXPECT_EQ(min_embedding_dim(2.0, 0.0), 5);
    EXPECT_EQ(min_embedding_dim(1.3, 0.5), 4);
    EXPECT_THROW((void)min_embedding_dim(-1.0, 0.0), Error);
    EXPECT_THROW((void)min_embedding_dim(1.0, std::nan("")), Error);
}

TEST(MinEmbeddingDim, MonotoneInBothArguments) {
    long prev_d = 0;
    for (double d = 0.0; d <= 10.0; d += 0.05) {
        const long q = min_embedding_dim(d, 0.3);
        EXPECT_GE(q, prev_d);
        EXPECT_GT(static_cast<double>(q), 2.0 * 1.3 * d);
        prev_d = q;
        long prev_s = 0;
        for (double s = 0.0; s <= 2.0; s += 0.1) {
            const long qs = min_embedding_dim(d, s);
            EXPECT_GE(qs, prev_s);
            prev_s = qs;
        }
    }
}

TEST(BoxCounting, SingleRepeatedPointIsZero) {
    const std::vector<std::vector<double>> pts(50, {0.3, 0.4});
    EXPECT_NEAR(box_counting_dim(pts, log_spaced_scales(0.5, 0.005, 8)), 0.0, 1e-12);
}

TEST(BoxCounting, Preconditions) {
    const std::vector<std::vector<double>> pts(50, {0.3, 0.4});
    EXPECT_THROW((void)box_counting_dim(pts, {0.1}), Error);
    EXPECT_THROW((void)box_counting_dim(pts, {0.1, 0.2}), Error);
    EXPECT_THROW((void)box_counting_dim(std::vector<std::vector<double>>(5, {0.0}), {0.1, 0.01}), Error);
}

TEST(BoxCounting, LineAndSquare) {
    std::mt19937_64 rng(42);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<std::vector<double>> line, square;
    for (int i = 0; i < 10000; ++i) {
        const double s = u(rng);
        line.push_back({s, 0.5 * s + 0.1, -0.3 * s});
        square.push_back({u(rng), u(rng)});
    }
    const double dl = box_counting_dim(line, log_spaced_scales(0.1, 0.001, 8));
    const double ds = box_counting_dim(square, log_spaced_scales(0.2, 0.02, 8));
    EXPECT_GE(dl, 0.9);
    EXPECT_LE(dl, 1.1);
    EXPECT_GE(ds, 1.8);
    EXPECT_LE(ds, 2.05);
}
