// SPDX-License-Identifier: Apache-2.0
//
// rischan - channel estimation and Cramer-Rao bounds for RIS-aided MIMO links
// Copyright (C) 2026 The rischan authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
// http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
// ------------------------------------------------------------------------

#include "rischan/geometric.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace rischan;
using rischan::testing::rel_fro;

namespace
{
    // Grid point i of a uniform n-point axis
    double grid_w(Index i, Index n) { return -pi + 2.0 * pi * static_cast<double>(i + 1) / static_cast<double>(n); }

    bool contains(const std::vector<SpatialFreq> &v, const SpatialFreq &w, double tol)
    {
        return std::any_of(v.begin(), v.end(), [&](const SpatialFreq &x) { return freq_distance(x, w) <= tol; });
    }

    UserPaths user(std::vector<SpatialFreq> w_RG, std::vector<SpatialFreq> w_UG, std::vector<cd> g)
    {
        UserPaths u;
        u.w_RG = std::move(w_RG);
        u.w_UG = std::move(w_UG);
        u.gamma_G = std::move(g);
        return u;
    }

    // Stage-2 data for a block plan without direct column, generated straight from the channel matrices
    CMat stage2_data(const GeometricParams &gp, const SystemGeometry &g, const TrainingPlan &plan)
    {
        const ChannelSet ch = synth_geometric(gp, g);
        SystemGeometry g0 = g;
        g0.sigma2 = 0.0;
        Rng rng(0);
        return as_sample_matrix(simulate_uplink(ch, plan, g0, rng), g.M());
    }
} // namespace

TEST(SampleCovariance, Basics)
{
    Rng rng(1);
    const CVec y = complex_normal(rng, 5, 1);
    EXPECT_LT((sample_covariance(y) - y * y.adjoint()).norm(), 1e-15);
    EXPECT_EQ(sample_covariance(CMat::Zero(3, 4)).norm(), 0.0);
    EXPECT_THROW(sample_covariance(CMat(3, 0)), std::invalid_argument);

    const CMat Y = complex_normal(rng, 4, 100000);
    const CMat R = sample_covariance(Y);
    EXPECT_LT((R - R.adjoint()).norm(), 1e-15);
    EXPECT_LT((R.diagonal().real().array() - 1.0).abs().maxCoeff(), 0.02);
}

TEST(BeamformPeaks, NoiselessOnGridSinglePath)
{
    const ArraySpec bs = ArraySpec::ula(8);
    const FreqGrid grid = FreqGrid::uniform(256);
    for (Index i : {Index(3), Index(100), Index(200)})
    {
        const SpatialFreq w = grid.points[static_cast<size_t>(i)];
        AoaProblem prob{steering(w, bs) * cd(0.3, -1.1), array_manifold(bs), 1};
        const auto peaks = beamform_peaks(prob, grid);
        ASSERT_EQ(peaks.size(), 1u);
        EXPECT_TRUE(peaks[0] == w);
        // |a^H a s|^2 / ||a||^2 = ||a||^2 |s|^2
        EXPECT_NEAR(beamform_spectrum(prob, grid)(i), 8.0 * std::norm(cd(0.3, -1.1)), 1e-12);
    }
}

TEST(BeamformPeaks, TwoPathsAt20dB)
{
    Rng rng(2);
    const Index M = 16, n = 32;
    const ArraySpec bs = ArraySpec::ula(M);
    const FreqGrid grid = FreqGrid::uniform(256);
    // beamwidth 2 pi / M; separation 8 beamwidths
    const SpatialFreq w1(-1.3), w2(-1.3 + 8 * 2 * pi / M);
    const CMat A = steering_matrix({w1, w2}, bs);
    const CMat S = complex_normal(rng, 2, n);
    const CMat Y = A * S + std::sqrt(0.01) * complex_normal(rng, M, n);
    AoaProblem prob{Y, array_manifold(bs), 2};
    const auto peaks = beamform_peaks(prob, grid);
    ASSERT_EQ(peaks.size(), 2u);
    EXPECT_TRUE(contains(peaks, w1, grid.cell(0)));
    EXPECT_TRUE(contains(peaks, w2, grid.cell(0)));
    const RVec p = beamform_spectrum(prob, grid);
    const auto idx = local_maxima(p, {256, 1});
    EXPECT_GE(p(idx[0]), p(idx[1]));
}

TEST(BeamformPeaks, FlatSpectrumFails)
{
    const ArraySpec bs = ArraySpec::ula(4);
    AoaProblem prob{CMat::Zero(4, 3), array_manifold(bs), 1};
    EXPECT_THROW(beamform_peaks(prob, FreqGrid::uniform(64)), std::runtime_error);
}

TEST(LocalMaxima, HandExamples)
{
    RVec v(5);
    v << 0, 3, 1, 2, 0;
    EXPECT_EQ(local_maxima(v, {5}), (std::vector<Index>{1, 3}));
    RVec c(4);
    c << 5, 1, 1, 4; // circular: index 3 neighbours index 0
    EXPECT_EQ(local_maxima(c, {4}), (std::vector<Index>{0}));
    RVec t(3);
    t << 1, 2, 2; // plateau is not strict
    EXPECT_TRUE(local_maxima(t, {3}).empty());
    // 3 x 3 grid, single interior peak; diagonal neighbours count
    RVec g = RVec::Zero(9);
    g(4) = 1.0;
    g(8) = 0.5;
    EXPECT_EQ(local_maxima(g, {3, 3}), (std::vector<Index>{4}));
    EXPECT_THROW(local_maxima(g, {2, 3}), std::invalid_argument);
}

TEST(DmlObjective, SpanAndComplement)
{
    Rng rng(3);
    const CMat A = complex_normal(rng, 6, 2);
    const CVec in = A * complex_normal(rng, 2, 1);
    EXPECT_LT(dml_objective(in, A), 1e-18 * in.squaredNorm() + 1e-28);
    const CMat Q = Eigen::HouseholderQR<CMat>(A).householderQ() * CMat::Identity(6, 6);
    const CVec out = Q.rightCols(4) * complex_normal(rng, 4, 1);
    EXPECT_NEAR(dml_objective(out, A), out.squaredNorm(), 1e-12 * out.squaredNorm());
    // trace form over snapshots
    const CMat Y = Q.rightCols(4) * complex_normal(rng, 4, 5);
    EXPECT_NEAR(dml_objective(Y, A), sample_covariance(Y).trace().real(), 1e-12 * Y.squaredNorm());

    CMat D = A;
    D.col(1) = 2.0 * D.col(0);
    EXPECT_THROW(dml_objective(in, D), identifiability_error);
}

TEST(DmlObjective, TruthIsGridMinimum)
{
    const ArraySpec bs = ArraySpec::ula(8);
    const FreqGrid grid = FreqGrid::uniform(64);
    const SpatialFreq w1 = grid.points[10], w2 = grid.points[40];
    const CVec y = steering_matrix({w1, w2}, bs) * CVec::Constant(2, cd(1.0, 0.5));
    double best = 1e300;
    for (Index i = 0; i < grid.size(); ++i)
        for (Index j = i + 1; j < grid.size(); ++j)
            best = std::min(best, dml_objective(y, steering_matrix({grid.points[size_t(i)], grid.points[size_t(j)]}, bs)));
    EXPECT_LT(dml_objective(y, steering_matrix({w1, w2}, bs)), 1e-20);
    EXPECT_LE(dml_objective(y, steering_matrix({w1, w2}, bs)), best);
}

TEST(RefineRotation, OnGridAndHalfCell)
{
    const ArraySpec bs = ArraySpec::ula(8);
    const FreqGrid grid = FreqGrid::uniform(128);
    const Manifold man = array_manifold(bs);
    const SpatialFreq coarse = grid.points[50];
    const CVec y_on = steering(coarse, bs);
    const SpatialFreq off0 = refine_rotation(y_on, coarse, man, grid);
    EXPECT_LT(std::abs(off0.w1), 1e-6);

    const SpatialFreq truth(coarse.w1 + 0.5 * grid.cell(0));
    const CVec y = steering(truth, bs) * cd(-0.4, 0.9);
    const SpatialFreq off = refine_rotation(y, coarse, man, grid);
    EXPECT_LT(std::abs(coarse.w1 + off.w1 - truth.w1), 1e-4);
    auto score = [&](const SpatialFreq &w) { return std::norm(steering(w, bs).dot(y)) / 8.0; };
    EXPECT_GE(score(coarse + off), score(coarse));
}

TEST(RefineRotation, RectangularArray)
{
    const ArraySpec ris = ArraySpec::ura(4, 4);
    const FreqGrid grid = FreqGrid::uniform(32, 32);
    const SpatialFreq coarse(grid_w(9, 32), grid_w(20, 32));
    const SpatialFreq truth(coarse.w1 - 0.3 * grid.cell(0), coarse.w2 + 0.45 * grid.cell(1));
    const CVec y = steering(truth, ris);
    const SpatialFreq off = refine_rotation(y, coarse, array_manifold(ris), grid);
    EXPECT_LT(freq_distance(coarse + off, truth), 1e-4);
}

TEST(GreedyGridFit, OffGridPairNoiseless)
{
    const ArraySpec bs = ArraySpec::ula(16);
    const FreqGrid grid = FreqGrid::uniform(256);
    const SpatialFreq w1(0.4137), w2(-1.9021);
    CVec g(2);
    g << cd(1.0, 0.2), cd(-0.5, 0.6);
    const CVec y = steering_matrix({w1, w2}, bs) * g;
    const GridFit fit = greedy_grid_fit(y, array_manifold(bs), grid, 2);
    EXPECT_TRUE(contains(fit.freqs, w1, 1e-5));
    EXPECT_TRUE(contains(fit.freqs, w2, 1e-5));
    EXPECT_LT((steering_matrix(fit.freqs, bs) * fit.coef - y).norm() / y.norm(), 1e-4);
}

namespace
{
    // M = 8 ULA BS, one user with a 4-element ULA, on-grid orthogonal angles
    struct Stage1Case
    {
        SystemGeometry g;
        GeometricParams gp;
    };

    Stage1Case stage1_case(Index K)
    {
        Stage1Case c;
        c.g.bs = ArraySpec::ula(8);
        c.g.ris = ArraySpec::ula(8);
        c.g.ues = {ArraySpec::ula(K)};
        c.g.power = {2.0};
        c.g.sigma2 = 0.0;
        c.gp.w_BH = {SpatialFreq(pi / 4), SpatialFreq(-pi / 2)};
        c.gp.w_RH = {SpatialFreq(), SpatialFreq(pi / 2)};
        c.gp.gamma_H = {1.0, cd(0.6, -0.8)};
        c.gp.users = {user({SpatialFreq(pi / 2), SpatialFreq(-pi / 4)}, {SpatialFreq(0.0), SpatialFreq(pi)},
                           {cd(0.9, 0.3), cd(-0.5, 0.7)})};
        if (K == 1)
            c.gp.users[0].w_UG = {SpatialFreq(), SpatialFreq()};
        return c;
    }

    void stage1_data(const Stage1Case &c, Rng &rng, CMat &Y1, CMat &X1)
    {
        const Index K = c.g.K_total();
        const TrainingPlan plan = block_plan(orthogonal_pilots(K), random_phase_sequence(1, c.g.N(), false, rng), false);
        Y1 = as_sample_matrix(simulate_uplink(synth_geometric(c.gp, c.g), plan, c.g, rng), c.g.M());
        X1 = plan.X;
    }
} // namespace

TEST(Stage1Angles, NoiselessOnGrid)
{
    Rng rng(4);
    const Stage1Case c = stage1_case(4);
    CMat Y1, X1;
    stage1_data(c, rng, Y1, X1);
    const EstimatorGrids grids = EstimatorGrids::defaults(c.g);
    const Stage1Result r = stage1_angles(Y1, X1, c.g, 2, {2}, grids);
    ASSERT_EQ(r.w_BH.size(), 2u);
    for (const auto &w : c.gp.w_BH)
        EXPECT_TRUE(contains(r.w_BH, w, 1e-6));
    ASSERT_TRUE(r.ue_resolved[0]);
    for (const auto &w : c.gp.users[0].w_UG)
        EXPECT_TRUE(contains(r.w_UG[0], w, 1e-6));
}

TEST(Stage1Angles, LosMatchesBeamformPeak)
{
    Rng rng(5);
    Stage1Case c = stage1_case(4);
    c.gp.w_BH.resize(1);
    c.gp.w_RH.resize(1);
    c.gp.gamma_H.resize(1);
    CMat Y1, X1;
    stage1_data(c, rng, Y1, X1);
    const EstimatorGrids grids = EstimatorGrids::defaults(c.g);
    const Stage1Result r = stage1_angles(Y1, X1, c.g, 1, {2}, grids);
    const auto peaks = beamform_peaks(AoaProblem{Y1, array_manifold(c.g.bs), 1}, grids.bs);
    EXPECT_LT(freq_distance(r.w_BH[0], peaks[0]), 1e-9);
}

TEST(Stage1Angles, SingleAntennaUeSkipsUeStep)
{
    Rng rng(6);
    const Stage1Case c = stage1_case(1);
    CMat Y1, X1;
    stage1_data(c, rng, Y1, X1);
    const Stage1Result r = stage1_angles(Y1, X1, c.g, 2, {2}, EstimatorGrids::defaults(c.g));
    EXPECT_FALSE(r.ue_resolved[0]);
    EXPECT_TRUE(r.w_UG[0].empty());
    EXPECT_EQ(r.w_BH.size(), 2u);
}

TEST(Stage1Angles, RejectsOversizedModelOrder)
{
    Rng rng(7);
    const Stage1Case c = stage1_case(4);
    CMat Y1, X1;
    stage1_data(c, rng, Y1, X1);
    const EstimatorGrids grids = EstimatorGrids::defaults(c.g);
    EXPECT_THROW(stage1_angles(Y1, X1, c.g, 8, {2}, grids), std::invalid_argument);
    EXPECT_THROW(stage1_angles(Y1, X1, c.g, 2, {2, 2}, grids), std::invalid_argument);
}

namespace
{
    Stage1Result exact_stage1(const GeometricParams &gp, const SystemGeometry &g)
    {
        Stage1Result s;
        s.w_BH = gp.w_BH;
        for (Index u = 0; u < g.users(); ++u)
        {
            const bool res = g.K(u) > gp.users[size_t(u)].d_G();
            s.ue_resolved.push_back(res);
            s.w_UG.push_back(res ? gp.users[size_t(u)].w_UG : std::vector<SpatialFreq>{});
        }
        return s;
    }

    TrainingPlan stage2_plan(Index Kt, Index N)
    {
        return block_plan(orthogonal_pilots(Kt), without_direct_column(dft_ris_sequence(N + 1, N)), false);
    }
} // namespace

TEST(Stage2Reduce, DefiningIdentity)
{
    Stage1Case c = stage1_case(4);
    c.g.ris = ArraySpec::ula(16);
    const TrainingPlan plan = stage2_plan(4, 16);
    const CMat Y2 = stage2_data(c.gp, c.g, plan);
    const Stage1Result s1 = exact_stage1(c.gp, c.g);
    const ReducedData red = stage2_reduce(Y2, plan, s1, c.g);
    const Manifold man = ris_manifold(c.g.ris, plan.Psi);
    const CVec gains = composite_gains(c.gp, 0);
    ASSERT_EQ(red.YB[0].cols(), 4);
    for (Index l = 0; l < 2; ++l)
        for (Index p = 0; p < 2; ++p)
        {
            const CVec expect = gains(l * 2 + p) * man(c.gp.users[0].w_RG[size_t(l)] - c.gp.w_RH[size_t(p)]);
            EXPECT_LT((red.YB[0].col(l * 2 + p) - expect).norm(), 1e-10 * expect.norm());
        }
}

TEST(Stage2Reduce, LosSingleColumn)
{
    Stage1Case c = stage1_case(4);
    c.gp.w_BH.resize(1);
    c.gp.w_RH.resize(1);
    c.gp.gamma_H.resize(1);
    c.gp.users[0] = user({SpatialFreq(0.7)}, {SpatialFreq(-0.2)}, {cd(0.4, 0.1)});
    const TrainingPlan plan = stage2_plan(4, 8);
    const ReducedData red = stage2_reduce(stage2_data(c.gp, c.g, plan), plan, exact_stage1(c.gp, c.g), c.g);
    ASSERT_EQ(red.YB[0].cols(), 1);
    const CVec expect = std::conj(cd(0.4, 0.1)) * ris_manifold(c.g.ris, plan.Psi)(SpatialFreq(0.7));
    EXPECT_LT((red.YB[0].col(0) - expect).norm(), 1e-10 * expect.norm());
}

TEST(Stage2Reduce, SingleAntennaUeColumns)
{
    const Stage1Case c = stage1_case(1);
    const TrainingPlan plan = stage2_plan(1, 8);
    const ReducedData red = stage2_reduce(stage2_data(c.gp, c.g, plan), plan, exact_stage1(c.gp, c.g), c.g);
    EXPECT_FALSE(red.resolved[0]);
    ASSERT_EQ(red.YB[0].cols(), 2);
    // column p: sum_l conj(gamma_G,l) gamma_H,p conj(Psi) a_R(w_RG,l - w_RH,p)
    const Manifold man = ris_manifold(c.g.ris, plan.Psi);
    for (Index p = 0; p < 2; ++p)
    {
        CVec expect = CVec::Zero(8);
        for (Index l = 0; l < 2; ++l)
            expect += std::conj(c.gp.users[0].gamma_G[size_t(l)]) * c.gp.gamma_H[size_t(p)] *
                      man(c.gp.users[0].w_RG[size_t(l)] - c.gp.w_RH[size_t(p)]);
        EXPECT_LT((red.YB[0].col(p) - expect).norm(), 1e-10 * expect.norm());
    }
}

TEST(Stage2Reduce, RejectsDirectColumnAndPerSamplePlans)
{
    const Stage1Case c = stage1_case(4);
    const Stage1Result s1 = exact_stage1(c.gp, c.g);
    const TrainingPlan with_direct = block_plan(orthogonal_pilots(4), dft_ris_sequence(9, 8), true);
    EXPECT_THROW(stage2_reduce(CMat::Zero(8, with_direct.T), with_direct, s1, c.g), std::invalid_argument);
    Rng rng(8);
    const TrainingPlan ps = per_sample_plan(complex_normal(rng, 4, 8), random_phase_sequence(8, 8, false, rng), false);
    EXPECT_THROW(stage2_reduce(CMat::Zero(8, 8), ps, s1, c.g), std::invalid_argument);
}

TEST(Stage2Solve, GeneralModeReconstructs)
{
    for (Index K : {Index(4), Index(1)})
    {
        Stage1Case c = stage1_case(K);
        c.g.ris = ArraySpec::ula(16);
        const TrainingPlan plan = stage2_plan(K, 16);
        const Stage1Result s1 = exact_stage1(c.gp, c.g);
        const ReducedData red = stage2_reduce(stage2_data(c.gp, c.g, plan), plan, s1, c.g);
        const Stage2Result s2 = stage2_solve(red, s1, c.g, {2}, Stage2Mode::General, FreqGrid::uniform(256));
        EXPECT_FALSE(s2.separated);
        EXPECT_EQ(s2.terms[0].size(), 4u);
        const CVec truth = reconstruct_composite(c.gp, c.g);
        EXPECT_LT(rel_fro(reconstruct_composite(s1, s2, c.g), truth), 1e-8) << "K = " << K;
    }
}

TEST(Stage2Solve, SingleAntennaModeSeparatesParameters)
{
    SystemGeometry g;
    g.bs = ArraySpec::ula(8);
    g.ris = ArraySpec::ula(16);
    g.ues = {ArraySpec::ula(1), ArraySpec::ula(1)};
    g.power = {1.0, 1.0};
    g.sigma2 = 0.0;
    GeometricParams gp;
    gp.w_BH = {SpatialFreq(pi / 4), SpatialFreq(-pi / 2)};
    gp.w_RH = {SpatialFreq(), SpatialFreq(3 * pi / 8)};
    gp.gamma_H = {1.0, cd(-0.3, 0.7)};
    gp.users = {user({SpatialFreq(pi / 2), SpatialFreq(-pi / 4)}, {SpatialFreq(), SpatialFreq()}, {cd(0.8, -0.2), cd(0.1, 0.9)}),
                user({SpatialFreq(-7 * pi / 8), SpatialFreq(pi / 8)}, {SpatialFreq(), SpatialFreq()}, {cd(-1.0, 0.4), cd(0.5, 0.5)})};
    const TrainingPlan plan = stage2_plan(2, 16);
    const Stage1Result s1 = exact_stage1(gp, g);
    const ReducedData red = stage2_reduce(stage2_data(gp, g, plan), plan, s1, g);
    const Stage2Result s2 = stage2_solve(red, s1, g, {2, 2}, Stage2Mode::SingleAntennaUe, FreqGrid::uniform(256));
    ASSERT_TRUE(s2.separated);
    EXPECT_TRUE(s2.params.is_normalized());
    EXPECT_LT(freq_distance(s2.params.w_RH[1], gp.w_RH[1]), 1e-8);
    EXPECT_LT(std::abs(s2.params.gamma_H[1] - gp.gamma_H[1]), 1e-8);
    for (size_t u = 0; u < 2; ++u)
        for (size_t l = 0; l < 2; ++l)
        {
            EXPECT_TRUE(contains(s2.params.users[u].w_RG, gp.users[u].w_RG[l], 1e-8));
        }
    const CVec truth = reconstruct_composite(gp, g);
    EXPECT_LT(rel_fro(reconstruct_composite(s2.params, g), truth), 1e-8);
    EXPECT_LT(rel_fro(reconstruct_composite(s1, s2, g), truth), 1e-8);
}

TEST(Stage2Solve, LosModesCoincide)
{
    Stage1Case c = stage1_case(1);
    c.gp.w_BH.resize(1);
    c.gp.w_RH.resize(1);
    c.gp.gamma_H.resize(1);
    c.gp.users[0] = user({SpatialFreq(0.7)}, {SpatialFreq()}, {cd(0.4, 0.1)});
    const TrainingPlan plan = stage2_plan(1, 8);
    const Stage1Result s1 = exact_stage1(c.gp, c.g);
    const ReducedData red = stage2_reduce(stage2_data(c.gp, c.g, plan), plan, s1, c.g);
    const FreqGrid grid = FreqGrid::uniform(256);
    const CVec a = reconstruct_composite(s1, stage2_solve(red, s1, c.g, {1}, Stage2Mode::General, grid), c.g);
    const CVec b = reconstruct_composite(s1, stage2_solve(red, s1, c.g, {1}, Stage2Mode::SingleAntennaUe, grid), c.g);
    EXPECT_LT((a - b).norm(), 1e-10 * a.norm());
    EXPECT_LT(rel_fro(a, reconstruct_composite(c.gp, c.g)), 1e-8);
}

TEST(ReconstructComposite, RoundTripAndAmbiguities)
{
    Rng rng(9);
    SystemGeometry g;
    g.bs = ArraySpec::ula(3);
    g.ris = ArraySpec::ura(2, 3);
    g.ues = {ArraySpec::ula(2), ArraySpec::ula(1)};
    g.power = {1.0, 1.0};
    const GeometricParams gp = random_geometric(g, 2, {2, 1}, {0, 0}, GainVariance::Unit, rng);
    const CVec h = reconstruct_composite(gp, g);
    EXPECT_LT((h - composite_vector(synth_geometric(gp, g), false)).norm(), 1e-12 * h.norm());

    GeometricParams amb = gp;
    const SpatialFreq shift(0.37, -1.2);
    const cd scale(0.3, -1.7);
    for (auto &w : amb.w_RH)
        w = w + shift;
    for (auto &gh : amb.gamma_H)
        gh *= scale;
    for (auto &u : amb.users)
    {
        for (auto &w : u.w_RG)
            w = w + shift;
        for (auto &gg : u.gamma_G)
            gg /= std::conj(scale);
    }
    EXPECT_LT((reconstruct_composite(amb, g) - h).norm(), 1e-12 * h.norm());

    // LoS: gamma a_R (x) conj(a_U) (x) a_B
    GeometricParams los;
    los.w_BH = {SpatialFreq(0.2)};
    los.w_RH = {SpatialFreq()};
    los.gamma_H = {1.0};
    los.users = {user({SpatialFreq(0.5, -0.9)}, {SpatialFreq(1.1)}, {cd(0.3, 0.4)}), user({SpatialFreq(-2.0, 0.1)}, {SpatialFreq()}, {1.0})};
    const CVec hl = reconstruct_composite(los, g);
    const CVec first = std::conj(cd(0.3, 0.4)) *
                       kron(steering(SpatialFreq(0.5, -0.9), g.ris),
                            kron(CVec(steering(SpatialFreq(1.1), g.ues[0]).conjugate()), steering(SpatialFreq(0.2), g.bs)));
    EXPECT_LT((hl.head(first.size()) - first).norm(), 1e-14);
}

TEST(RefitGains, ExactAndMinimal)
{
    Rng rng(10);
    SystemGeometry g;
    g.bs = ArraySpec::ula(2);
    g.ris = ArraySpec::ula(6);
    g.ues = {ArraySpec::ula(1)};
    g.power = {3.0};
    const GeometricParams gp = random_geometric(g, 2, {2}, {0}, GainVariance::Unit, rng);
    const CMat A = composite_manifold_full(gp, g);
    const CVec gamma = composite_gains(gp, 0);

    // d_H d_G = 4 unknowns: 2 samples on 2 antennas is square
    for (Index T : {Index(2), Index(7)})
    {
        const TrainingPlan plan = per_sample_plan(CMat::Ones(1, T), random_phase_sequence(T, 6, false, rng), false);
        const MeasurementOperator Z(plan, g);
        const CVec y = std::sqrt(3.0) * Z.apply(A * gamma);
        EXPECT_LT((refit_gains(y, Z, 3.0, A) - gamma).norm(), 1e-10 * gamma.norm()) << "T = " << T;
    }

    // perturbed angles: the refit is the least-squares minimizer
    const TrainingPlan plan = per_sample_plan(CMat::Ones(1, 9), random_phase_sequence(9, 6, false, rng), false);
    const MeasurementOperator Z(plan, g);
    const CVec y = std::sqrt(3.0) * Z.apply(A * gamma) + 0.01 * complex_normal(rng, Z.rows(), 1);
    GeometricParams pert = gp;
    pert.w_BH[1] = pert.w_BH[1] + SpatialFreq(1e-3);
    pert.users[0].w_RG[0] = pert.users[0].w_RG[0] + SpatialFreq(-1e-3);
    const CMat Ap = composite_manifold_full(pert, g);
    const CVec gh = refit_gains(y, Z, 3.0, Ap);
    auto resid = [&](const CVec &gm) { return (y - std::sqrt(3.0) * Z.apply(Ap * gm)).norm(); };
    for (int i = 0; i < 20; ++i)
        EXPECT_LE(resid(gh), resid(gh + 0.01 * complex_normal(rng, 4, 1)));

    CMat Ad = A;
    Ad.col(3) = Ad.col(2);
    EXPECT_THROW(refit_gains(y, Z, 3.0, Ad), identifiability_error);
}

TEST(CompositeBeamformPeaks, NoiselessOnGridPath)
{
    Rng rng(11);
    SystemGeometry g;
    g.bs = ArraySpec::ula(4);
    g.ris = ArraySpec::ula(4);
    g.ues = {ArraySpec::ula(2)};
    g.power = {1.0};
    EstimatorGrids grids;
    grids.bs = grids.ue = grids.ris = FreqGrid::uniform(16);
    const SpatialFreq wB(grid_w(3, 16)), wU(grid_w(12, 16)), wR(grid_w(6, 16));
    const CVec h = kron(steering(wR, g.ris), kron(CVec(steering(wU, g.ues[0]).conjugate()), steering(wB, g.bs)));
    const TrainingPlan plan = block_plan(orthogonal_pilots(2), random_phase_sequence(6, 4, false, rng), false);
    const MeasurementOperator Z(plan, g);
    const auto peaks = composite_beamform_peaks(Z.apply(h), Z, g, grids, 1);
    ASSERT_EQ(peaks.size(), 1u);
    EXPECT_TRUE(peaks[0].w_B == wB);
    EXPECT_TRUE(peaks[0].w_U == wU);
    EXPECT_TRUE(peaks[0].w_R == wR);
}

TEST(DecoupledEstimate, NoiselessSmallCase)
{
    Rng rng(12);
    Stage1Case c = stage1_case(4);
    c.g.ris = ArraySpec::ula(16);
    CMat Y1, X1;
    stage1_data(c, rng, Y1, X1);
    const TrainingPlan plan2 = stage2_plan(4, 16);
    const CMat Y2 = stage2_data(c.gp, c.g, plan2);
    const CVec h = decoupled_estimate(Y1, X1, Y2, plan2, c.g, 2, {2}, Stage2Mode::General, EstimatorGrids::defaults(c.g));
    EXPECT_LT(rel_fro(h, reconstruct_composite(c.gp, c.g)), 1e-6);
}
