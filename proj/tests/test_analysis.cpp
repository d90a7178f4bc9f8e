#include "common.hpp"

#include "koopeq/analysis.hpp"
#include "koopeq/koopman.hpp"
#include "koopeq/observation.hpp"
#include "koopeq/spectral.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

using namespace koopeq;
using koopeq::testing::random_field;
using koopeq::testing::random_matrix;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

Trajectory from_matrix(const Eigen::MatrixXd& data, double tau = 0.1) {
    Trajectory t;
    t.data = data;
    t.tau = tau;
    t.dt = tau;
    return t;
}

Spectrum make_spectrum(std::vector<std::complex<double>> ev) {
    sort_spectrum(ev);
    return {ev, ModelKind::global};
}

}  // namespace

TEST(SplitTrainTest, ChronologicalEightyTwenty) {
    const auto t = from_matrix(random_matrix(4, 1001, 1));
    const auto s = split_train_test(t, 1);
    EXPECT_EQ(s.train_pairs, 800u);
    EXPECT_EQ(s.test_pairs, 200u);
    EXPECT_EQ(s.train.num_snapshots(), 801u);
    EXPECT_EQ(s.test.num_snapshots(), 201u);
    EXPECT_EQ(s.test.data.col(0), t.data.col(800));
    // Training successors never reach into the test pairs' successors.
    EXPECT_EQ(build_dataset(s.train, ObservationMap::full_state(4)).pairs(), 800u);
    EXPECT_EQ(build_dataset(s.test, ObservationMap::full_state(4)).pairs(), 200u);
}

TEST(SplitTrainTest, WithDelays) {
    const auto t = from_matrix(random_matrix(4, 1001, 2));
    const auto s = split_train_test(t, 50);
    EXPECT_EQ(s.train_pairs + s.test_pairs, 951u);
    ObservationMap m;
    m.delays = 50;
    EXPECT_EQ(build_dataset(s.train, m).pairs(), s.train_pairs);
    EXPECT_EQ(build_dataset(s.test, m).pairs(), s.test_pairs);
    // first test input is the last snapshot after the train inputs
    EXPECT_EQ(build_dataset(s.test, m).inputs.col(0), build_dataset(t, m).inputs.col(static_cast<Eigen::Index>(s.train_pairs)));
}

TEST(SplitTrainTest, Preconditions) {
    EXPECT_THROW((void)split_train_test(from_matrix(random_matrix(4, 2, 3)), 1), Error);
    EXPECT_THROW((void)split_train_test(from_matrix(random_matrix(4, 20, 3)), 1, 1.0), Error);
}

TEST(OneStepError, ExactModelOnItsOwnData) {
    const Eigen::MatrixXd a = random_matrix(4, 4, 4);
    EmbeddedDataset ds;
    ds.inputs = random_matrix(4, 20, 6);
    ds.outputs = a * ds.inputs;
    KoopmanModel m;
    m.dictionary = Dictionary::identity(4);
    m.K = edmd_fit(ds.inputs, ds.outputs, m.dictionary);
    EXPECT_LT(one_step_error(m, ds), 1e-8);
}

TEST(OneStepError, ZeroModelGivesOne) {
    EmbeddedDataset ds;
    ds.inputs = random_matrix(3, 10, 7);
    ds.outputs = random_matrix(3, 10, 8);
    KoopmanModel m;
    m.dictionary = Dictionary::identity(3);
    m.K = Eigen::MatrixXd::Zero(3, 3);
    EXPECT_DOUBLE_EQ(one_step_error(m, ds), 1.0);
    m.dictionary = Dictionary::polynomial(3, 2);
    m.K = Eigen::MatrixXd::Zero(10, 10);
    EXPECT_DOUBLE_EQ(one_step_error(m, ds), 1.0);
}

TEST(OneStepError, EmptyTestSet) {
    EmbeddedDataset ds;
    ds.inputs.resize(3, 0);
    ds.outputs.resize(3, 0);
    KoopmanModel m;
    m.dictionary = Dictionary::identity(3);
    m.K = Eigen::MatrixXd::Identity(3, 3);
    EXPECT_THROW((void)one_step_error(m, ds), Error);
}

TEST(RolloutError, IdenticalTrajectoriesAreZero) {
    const auto t = from_matrix(random_matrix(8, 20, 9));
    const auto r = rollout_error(t, t);
    ASSERT_EQ(r.step_errors.size(), 20u);
    for (double e : r.step_errors) EXPECT_EQ(e, 0.0);
    EXPECT_FALSE(r.first_exceeding_one.has_value());
    EXPECT_FALSE(r.diverged_at.has_value());
}

TEST(RolloutError, OneStepLagOnTravelingWave) {
    const auto y0 = random_smooth_field(32, kTwoPi, 3);
    const auto t = advection_trajectory(y0, 1.0, 0.1, 41);
    const auto r = rollout_error(t.slice(1, 40), t.slice(0, 40));
    const double expect = (t.data.col(1) - t.data.col(0)).norm() / t.data.col(1).norm();
    for (double e : r.step_errors) EXPECT_NEAR(e, expect, 1e-12);
}

TEST(RolloutError, FirstExceedingOneAndTruncation) {
    Eigen::MatrixXd truth = Eigen::MatrixXd::Ones(4, 6);
    Eigen::MatrixXd pred = truth;
    pred.col(3) *= 3.0;  // relative error 2
    const auto r = rollout_error(from_matrix(truth), from_matrix(pred));
    ASSERT_TRUE(r.first_exceeding_one.has_value());
    EXPECT_EQ(*r.first_exceeding_one, 3u);
    EXPECT_DOUBLE_EQ(r.max_error(), 2.0);

    const auto shorter = rollout_error(from_matrix(truth), from_matrix(pred.leftCols(2)));
    ASSERT_TRUE(shorter.diverged_at.has_value());
    EXPECT_EQ(*shorter.diverged_at, 2u);
    EXPECT_EQ(shorter.step_errors.size(), 2u);

    pred(1, 4) = std::numeric_limits<double>::infinity();
    const auto inf = rollout_error(from_matrix(truth), from_matrix(pred));
    EXPECT_EQ(*inf.diverged_at, 4u);
    EXPECT_EQ(inf.step_errors.size(), 4u);
}

TEST(RolloutError, ShapeMismatch) {
    EXPECT_THROW((void)rollout_error(from_matrix(random_matrix(4, 5, 1)), from_matrix(random_matrix(6, 5, 1))), Error);
    EXPECT_THROW((void)rollout_error(from_matrix(random_matrix(4, 5, 1)), from_matrix(random_matrix(4, 6, 1))), Error);
}

TEST(TravelingWaveFrequency, AdvectionPhase) {
    const auto y0 = GridField::sample(32, kTwoPi, [](double x) { return std::cos(x) + 0.2 * std::sin(2 * x); });
    const double tau = 0.1;
    const auto t = advection_trajectory(y0, 1.0, tau, 50);
    const auto f = traveling_wave_frequency(t);
    EXPECT_EQ(f.mode, 1);
    EXPECT_NEAR(f.phase_per_step, -tau, 1e-8);
    EXPECT_NEAR(f.angular_frequency(tau), -1.0, 1e-7);
}

TEST(TravelingWaveFrequency, StaticTrajectory) {
    const auto y0 = GridField::sample(16, kTwoPi, [](double x) { return std::cos(x); });
    const auto t = Trajectory::from_snapshots(std::vector<GridField>(5, y0), 0.1);
    EXPECT_NEAR(traveling_wave_frequency(t).phase_per_step, 0.0, 1e-14);
    const auto flat = Trajectory::from_snapshots(std::vector<GridField>(5, GridField::zeros(16, kTwoPi)), 0.1);
    EXPECT_THROW((void)traveling_wave_frequency(flat), Error);
}

TEST(CompareSpectra, IdenticalIsZero) {
    const auto s = spectrum_of(random_matrix(6, 6, 10), ModelKind::global);
    const auto c = compare_spectra(s, s, 6);
    EXPECT_EQ(c.leading_hausdorff, 0.0);
    EXPECT_EQ(c.matches.size(), 6u);
}

TEST(CompareSpectra, PerturbationBound) {
    const auto g = spectrum_of(random_matrix(8, 8, 11), ModelKind::global);
    std::vector<std::complex<double>> ev = g.eigenvalues;
    for (auto& z : ev) z += std::complex<double>(1e-3, -1e-3) / std::sqrt(2.0) * 0.999;
    const auto c = compare_spectra(g, make_spectrum(ev), 6);
    EXPECT_LE(c.leading_hausdorff, 1e-3 * std::sqrt(2.0));
    EXPECT_GT(c.leading_hausdorff, 0.0);
}

TEST(CompareSpectra, ConjugateRelabelingSymmetric) {
    const std::complex<double> a(0.9, 0.3), b(0.5, 0.1);
    const auto g = make_spectrum({a, std::conj(a), b, std::conj(b)});
    const auto l1 = make_spectrum({a + 0.01, std::conj(a) + 0.01, b, std::conj(b)});
    auto l2 = l1;
    std::swap(l2.eigenvalues[0], l2.eigenvalues[1]);
    EXPECT_DOUBLE_EQ(compare_spectra(g, l1, 2).leading_hausdorff, compare_spectra(g, l2, 2).leading_hausdorff);
}

TEST(CompareSpectra, Preconditions) {
    const auto s = spectrum_of(random_matrix(3, 3, 12), ModelKind::global);
    EXPECT_THROW((void)compare_spectra(s, s, 0), Error);
    EXPECT_THROW((void)compare_spectra(s, s, 4), Error);
}

TEST(BoundaryJump, SmoothVersusBlocky) {
    const auto smooth = advection_trajectory(random_smooth_field(32, kTwoPi, 1), 1.0, 0.1, 10);
    Eigen::MatrixXd blocky = smooth.data;
    for (int b = 0; b < 32; b += 4) blocky.middleRows(b, 4).array() += 0.5 * (b / 4 % 2);
    const double s = boundary_jump_statistic(smooth, 4);
    const double k = boundary_jump_statistic(from_matrix(blocky), 4);
    EXPECT_GT(k, 5.0 * s);
    EXPECT_NEAR(decoherence_ratio(smooth, smooth, 4), 1.0, 1e-15);
    EXPECT_THROW((void)boundary_jump_statistic(smooth, 5), Error);
    EXPECT_THROW((void)boundary_jump_statistic(smooth, 32), Error);
}

TEST(BoundaryJump, ShiftCovariant) {
    const auto t = advection_trajectory(random_smooth_field(32, kTwoPi, 2), 1.0, 0.1, 5);
    for (long g : {1L, 3L})
        EXPECT_NEAR(boundary_jump_statistic(shift_trajectory(t, g), 8, g), boundary_jump_statistic(t, 8, 0), 1e-13);
}

TEST(ErrorReport, Summaries) {
    ErrorReport r;
    EXPECT_EQ(r.max_error(), 0.0);
    r.step_errors = {0.0, 0.5, 0.25};
    EXPECT_DOUBLE_EQ(r.max_error(), 0.5);
    EXPECT_DOUBLE_EQ(r.mean_error(), 0.25);
}
