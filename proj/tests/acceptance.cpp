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

// Acceptance checks. One PASS/FAIL line per criterion; exit status is the number of failures.

#include "rischan/geometric.hpp"
#include "rischan/harness.hpp"
#include "rischan/unstructured.hpp"
#include "test_support.hpp"

#include <Eigen/Eigenvalues>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

using namespace rischan;
using namespace rischan::testing;

namespace
{
    struct Outcome
    {
        bool pass = false;
        std::string detail;
    };

    int failures = 0;

    void run(int id, const char *name, double limit_s, const std::function<Outcome()> &body)
    {
        const auto t0 = std::chrono::steady_clock::now();
        Outcome o;
        try
        {
            o = body();
        }
        catch (const std::exception &e)
        {
            o = {false, std::string("exception: ") + e.what()};
        }
        const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        const bool in_time = s < limit_s;
        const bool pass = o.pass && in_time;
        if (!pass)
            ++failures;
        std::printf("%s  criterion %2d  %-44s %s  [%.2f s, limit %.0f s%s]\n", pass ? "PASS" : "FAIL", id, name,
                    o.detail.c_str(), s, limit_s, in_time ? "" : ", too slow");
        std::fflush(stdout);
    }

    std::string fmt(const char *f, double a, double b = 0.0, double c = 0.0)
    {
        char buf[256];
        std::snprintf(buf, sizeof buf, f, a, b, c);
        return buf;
    }

    SystemGeometry simple_geometry(Index M, Index N, std::vector<Index> K, double P, double sigma2)
    {
        SystemGeometry g;
        g.bs = ArraySpec::ula(M);
        g.ris = ArraySpec::ula(N);
        g.ues.clear();
        for (Index k : K)
            g.ues.push_back(ArraySpec::ula(k));
        g.power.assign(K.size(), P);
        g.sigma2 = sigma2;
        return g;
    }

    // Closed-form unstructured CRB on the 8-point DFT plan
    Outcome c1()
    {
        const SystemGeometry g = simple_geometry(2, 7, {1}, 1.0, 1.0);
        const TrainingPlan plan = block_plan(orthogonal_pilots(1), dft_ris_sequence(8, 7), true);
        const CrbReport r = crb_unstructured(MeasurementOperator(plan, g), 1.0, 1.0);
        const double err = (r.diagonal.array() - 0.0625).abs().maxCoeff();
        return {err <= 1e-12 && r.diagonal.size() == 2 * 2 * 8, fmt("max |diag - 0.0625| = %.3g", err)};
    }

    // General FIM vs (2P/sigma2) Zr^T Zr with Z built entry by entry
    Outcome c2()
    {
        Rng rng(11);
        SystemGeometry g = simple_geometry(2, 3, {1}, 1.7, 0.6);
        const TrainingPlan plan = block_plan(orthogonal_pilots(1), random_phase_sequence(8, 3, true, rng), true);
        const MeasurementOperator Z(plan, g);
        const RMat fim = fim_from_jacobian(unstructured_mean_jacobian(Z, g.P(0)), g.sigma2);
        const RMat Zr = naive_real_block(naive_Z(plan, g));
        const RMat oracle = (2.0 * g.P(0) / g.sigma2) * Zr.transpose() * Zr;
        const double err = rel_fro(fim, oracle);
        return {err < 1e-9, fmt("relative Frobenius error %.3g", err)};
    }

    // Analytic Jacobians vs central differences
    Outcome c3()
    {
        Rng rng(2024);
        std::vector<ScenarioShape> shapes(6);
        shapes[0] = {4, ArraySpec::ula(6), {2}, 2, 2, 0, 2};
        shapes[1] = {3, ArraySpec::ura(3, 3), {1}, 2, 1, 1, 1};
        shapes[2] = {6, ArraySpec::ura(2, 4), {1, 2}, 1, 2, 1, 2};
        shapes[3] = {1, ArraySpec::ula(5), {3}, 2, 2, 2, 3};
        shapes[4] = {5, ArraySpec::ura(3, 3), {2}, 2, 2, 0, 1};
        shapes[5] = {2, ArraySpec::ura(2, 2), {2, 1}, 2, 2, 1, 2};
        double worst = 0.0;
        for (size_t i = 0; i < shapes.size(); ++i)
        {
            const Scenario sc = make_scenario(shapes[i], rng);
            for (bool free_ref : {false, true})
            {
                const EtaLayout L = EtaLayout::make(sc.params, sc.geometry, free_ref);
                const RVec eta = pack_eta(sc.params, L);
                const RMat Jm = mean_jacobian(sc.params, sc.plan, sc.geometry, L);
                const RMat Fm = fd_jacobian(
                    [&](const RVec &x) { return RVec(stack_real(noiseless_mean(unpack_eta(x, L), sc.plan, sc.geometry))); },
                    eta);
                const RMat Jh = channel_jacobian(sc.params, sc.geometry, L, sc.plan.include_direct);
                const RMat Fh = fd_jacobian(
                    [&](const RVec &x) {
                        return RVec(stack_real(composite_vector(synth_geometric(unpack_eta(x, L), sc.geometry),
                                                                sc.plan.include_direct)));
                    },
                    eta);
                worst = std::max({worst, max_column_error(Jm, Fm), max_column_error(Jh, Fh)});
            }
        }
        return {worst < 1e-5, fmt("6 scenarios x 2 layouts, max relative column error %.3g", worst)};
    }

    // Monte Carlo LS error vs covariance trace
    Outcome c4()
    {
        const double P = 10.0, sigma2 = 1.0;
        const SystemGeometry g = simple_geometry(4, 8, {2}, P, sigma2);
        const TrainingPlan plan = block_plan(orthogonal_pilots(2), dft_ris_sequence(9, 8), true);
        const MeasurementOperator Z(plan, g);
        const CorrelationModel corr = CorrelationModel::uncorrelated(4, 2, 8, 1.0, 1.0, 1.0);
        const Index trials = 1000;
        double mse = 0.0;
        Index dim = 0;
        for (Index t = 0; t < trials; ++t)
        {
            Rng rng = derive_rng(99, 0, static_cast<std::uint64_t>(t));
            const ChannelSet ch = synth_unstructured(corr, g, rng);
            const CVec h = composite_vector(ch, true);
            dim = h.size();
            const CVec y = simulate_uplink(ch, plan, g, rng);
            mse += (ls_estimate(y, Z, P, sigma2, false).h_hat - h).squaredNorm();
        }
        mse /= static_cast<double>(trials);
        // Orthogonal plan: covariance (sigma2 / (P T)) I
        const double trace = sigma2 / (P * static_cast<double>(plan.T)) * static_cast<double>(dim);
        const double ratio = mse / trace;
        return {std::abs(ratio - 1.0) <= 0.05 && plan.T == 18, fmt("MSE / trace = %.4f (T = %.0f)", ratio, plan.T)};
    }

    // Structured vs unstructured mean-diagonal gap
    Outcome c5()
    {
        ExperimentConfig cfg;
        cfg.M = 30;
        cfg.ris_nx = 6;
        cfg.ris_ny = 5;
        cfg.ue_antennas = {2};
        cfg.model = ChannelModel::Geometric;
        cfg.d_H = 2;
        cfg.d_G = 5;
        cfg.d_F = 0;
        cfg.plan = PlanKind::Dft;
        cfg.T = 62;
        cfg.sweep_var = SweepVar::Snr;
        cfg.sweep_values = {5.0};
        cfg.realizations = 100;
        cfg.seed = 5;
        const auto rows = run_crb_sweep(cfg, 4);
        const double gap = rows.at(0).mean_diag_db - rows.at(1).mean_diag_db;
        const bool ok = gap >= 8.0 && gap <= 18.0 && rows[1].realizations == 100;
        return {ok, fmt("gap %.3f dB over %.0f realizations (required [8, 18])", gap,
                        static_cast<double>(rows[1].realizations))};
    }

    // CRB_u - CRB_s is PSD
    Outcome c6()
    {
        Rng rng(606);
        std::uniform_int_distribution<int> Mi(2, 4), Ni(3, 7), Ki(1, 2), di(1, 2), coin(0, 1);
        double worst = std::numeric_limits<double>::infinity();
        int ill = 0;
        for (int s = 0; s < 20; ++s)
        {
            ScenarioShape sh;
            sh.M = Mi(rng);
            sh.ris = coin(rng) ? ArraySpec::ula(Ni(rng)) : ArraySpec::ura(2, Ni(rng) / 2 + 1);
            sh.K = coin(rng) ? std::vector<Index>{Ki(rng)} : std::vector<Index>{Ki(rng), Ki(rng)};
            sh.d_H = di(rng);
            sh.d_G = di(rng);
            sh.d_F = coin(rng);
            sh.extra_blocks = 1 + coin(rng);
            const Scenario sc = make_scenario(sh, rng);
            const CrbReport u = crb_unstructured(MeasurementOperator(sc.plan, sc.geometry), sc.geometry.P(0),
                                                 sc.geometry.sigma2);
            const CrbReport st = crb_structured(sc.params, sc.plan, sc.geometry);
            ill += st.ill_conditioned;
            const RMat D = u.matrix - st.matrix;
            Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (D + D.transpose()), Eigen::EigenvaluesOnly);
            Eigen::SelfAdjointEigenSolver<RMat> eu(u.matrix, Eigen::EigenvaluesOnly);
            worst = std::min(worst, es.eigenvalues().minCoeff() / eu.eigenvalues().cwiseAbs().maxCoeff());
        }
        return {worst >= -1e-9 && ill == 0, fmt("min eig(CRB_u - CRB_s) / ||CRB_u|| = %.3g, ill-conditioned %.0f", worst,
                                                 static_cast<double>(ill))};
    }

    // Noiseless on-grid decoupled estimation
    Outcome c7()
    {
        SystemGeometry g;
        g.bs = ArraySpec::ula(8);
        g.ris = ArraySpec::ura(4, 4);
        g.ues = {ArraySpec::ula(2)};
        g.power = {1.0};
        g.sigma2 = 0.0;
        const double q = pi / 2;
        GeometricParams p;
        p.w_BH = {SpatialFreq(pi / 4, 0), SpatialFreq(-pi / 2, 0)};
        p.w_RH = {SpatialFreq(0, 0), SpatialFreq(q, -q)};
        p.gamma_H = {1.0, cd(0.6, -0.8)};
        UserPaths u;
        u.w_RG = {SpatialFreq(q, 0), SpatialFreq(-q, q)};
        u.w_UG = {SpatialFreq(0, 0), SpatialFreq(pi, 0)};
        u.gamma_G = {cd(0.9, 0.3), cd(-0.5, 0.7)};
        p.users = {u};
        const ChannelSet ch = synth_geometric(p, g);
        const CVec truth = composite_vector(ch, false);

        Rng rng(7);
        const CMat X1 = orthogonal_pilots(2);
        const TrainingPlan plan1 = block_plan(X1, random_phase_sequence(1, 16, false, rng), false);
        const CMat Y1 = as_sample_matrix(simulate_uplink(ch, plan1, g, rng), 8);
        const TrainingPlan plan2 = block_plan(X1, without_direct_column(dft_ris_sequence(32, 16)), false);
        const CMat Y2 = as_sample_matrix(simulate_uplink(ch, plan2, g, rng), 8);
        const CVec est = decoupled_estimate(Y1, X1, Y2, plan2, g, 2, {2}, Stage2Mode::General,
                                            EstimatorGrids::defaults(g));
        const double err = (est - truth).norm() / truth.norm();
        return {err < 1e-6 && plan1.T == 2 && plan2.T == 64, fmt("relative composite error %.3g", err)};
    }

    // Two-step shared-channel estimation at the minimum training length
    Outcome c8()
    {
        const Index M = 30, N = 30, K = 2;
        const Index t_min = (N + 1) + ((K - 1) * (N + M) + M - 1) / M;
        Rng rng(808);
        const Index T1 = N + 1, T2 = t_min - T1;
        const TwoStepPlans plans = two_step_plans(M, N, K, T1, T2, rng);
        const SystemGeometry g = simple_geometry(M, N, {K}, 1.0, 0.0);
        ChannelSet ch;
        ch.H = complex_normal(rng, M, N);
        ch.G = {complex_normal(rng, K, N)};
        ch.Hd = {complex_normal(rng, M, K)};
        const CVec y1 = simulate_uplink(ch, plans.step1, g, rng);
        const CVec y2 = simulate_uplink(ch, plans.step2, g, rng);
        const TwoStepResult r = two_step_common(y1, y2, plans, M, N, K, 1.0);
        const CMat Hc = composite_channel(ch, true);
        const double err = rel_fro(r.Hc, Hc);

        bool ls_rejected = false;
        try
        {
            const TrainingPlan full = per_sample_plan(complex_normal(rng, K, t_min),
                                                      random_phase_sequence(t_min, N, true, rng), true);
            const CVec y = simulate_uplink(ch, full, g, rng);
            ls_estimate(y, MeasurementOperator(full, g), 1.0, 0.0, false);
        }
        catch (const identifiability_error &)
        {
            ls_rejected = true;
        }
        const bool ok = t_min == 33 && two_step_min_training(M, N, K) == 33 && T1 + T2 == 33 && err < 1e-8 && ls_rejected;
        return {ok, fmt("T_min = %.0f, relative error %.3g, LS rejected = %.0f", static_cast<double>(t_min), err,
                        ls_rejected ? 1.0 : 0.0)};
    }

    CMat random_psd(Rng &rng, Index n)
    {
        const CMat A = complex_normal(rng, n, n);
        return A * A.adjoint() / static_cast<double>(n);
    }

    // Composite covariance vs sample covariance
    Outcome c9()
    {
        Rng rng(909);
        const SystemGeometry g = simple_geometry(2, 3, {2}, 1.0, 1.0);
        CorrelationModel c;
        c.R_HB = random_psd(rng, 2);
        c.R_HR = random_psd(rng, 3);
        c.R_GU = random_psd(rng, 2);
        c.R_GR = random_psd(rng, 3);
        c.R_HdB = random_psd(rng, 2);
        c.R_HdU = random_psd(rng, 2);
        const CMat R = composite_covariance(c, g, true);
        CMat S = CMat::Zero(R.rows(), R.cols());
        const int draws = 100000;
        for (int i = 0; i < draws; ++i)
        {
            const CVec h = composite_vector(synth_unstructured(c, g, rng), true);
            S.noalias() += h * h.adjoint();
        }
        S /= static_cast<double>(draws);
        const double err = rel_fro(S, R);
        return {err <= 0.05, fmt("relative Frobenius error %.4f", err)};
    }

    // LMMSE shrinkage factor and high-SNR limit
    Outcome c10()
    {
        Rng rng(1010);
        // nu = P T v / (P T v + sigma2) on an orthogonal plan, v = 1, P = 1, T = 10, sigma2 = 1
        const SystemGeometry g = simple_geometry(3, 9, {1}, 1.0, 1.0);
        const TrainingPlan plan = block_plan(orthogonal_pilots(1), dft_ris_sequence(10, 9), true);
        const MeasurementOperator Z(plan, g);
        const Index n = Z.cols();
        const CVec h = complex_normal(rng, n, 1);
        const CVec y = std::sqrt(1.0) * Z.apply(h) + complex_normal(rng, Z.rows(), 1);
        const double nu = 10.0 / 11.0;
        const CVec lm = lmmse_estimate(y, Z, CMat::Identity(n, n), 1.0, 1.0).h_hat;
        const CVec ls = ls_estimate(y, Z, 1.0, 1.0, false).h_hat;
        const double e1 = (lm - nu * ls).norm() / (nu * ls).norm();

        // 80 dB on a non-orthogonal plan with a correlated prior
        const SystemGeometry g2 = simple_geometry(2, 4, {2}, 1e8, 1.0);
        const TrainingPlan p2 = block_plan(orthogonal_pilots(2), random_phase_sequence(7, 4, true, rng), true);
        const MeasurementOperator Z2(p2, g2);
        const Index n2 = Z2.cols();
        const CMat R = random_psd(rng, n2) + CMat::Identity(n2, n2);
        const CVec h2 = hermitian_sqrt(R) * complex_normal(rng, n2, 1);
        const CVec y2 = std::sqrt(1e8) * Z2.apply(h2) + complex_normal(rng, Z2.rows(), 1);
        const CVec lm2 = lmmse_estimate(y2, Z2, R, 1e8, 1.0).h_hat;
        const CVec ls2 = ls_estimate(y2, Z2, 1e8, 1.0, false).h_hat;
        const double e2 = (lm2 - ls2).norm() / ls2.norm();
        return {e1 < 1e-10 && e2 < 1e-3, fmt("nu-form error %.3g, 80 dB LMMSE vs LS %.3g", e1, e2)};
    }

    std::string slurp(const std::string &path)
    {
        std::ifstream in(path, std::ios::binary);
        std::stringstream ss;
        ss << in.rdbuf();
        return ss.str();
    }

    // crb-sweep determinism through the command-line tool
    Outcome c11()
    {
        const std::string dir = RISCHAN_TEST_TMPDIR;
        const std::string ini = dir + "/acceptance_det.ini";
        std::ofstream(ini) << "[geometry]\nM = 4\nris_nx = 3\nris_ny = 2\nue_antennas = 2\n"
                              "[channel]\nmodel = geometric\nd_H = 2\nd_G = 2\n"
                              "[training]\nplan = random\n"
                              "[sweep]\nsnr = 0, 10, 20\n"
                              "[mc]\nseed = 31337\n"
                              "[crb]\nrealizations = 40\n";
        const std::string cli = RISCHAN_CLI;
        auto go = [&](const std::string &out, int threads) {
            const std::string cmd = "\"" + cli + "\" crb-sweep \"" + ini + "\" --threads " + std::to_string(threads) +
                                    " --out \"" + out + "\"";
            return std::system(cmd.c_str());
        };
        const int a = go(dir + "/det_a.csv", 1), b = go(dir + "/det_b.csv", 1), c = go(dir + "/det_c.csv", 8);
        const std::string A = slurp(dir + "/det_a.csv"), B = slurp(dir + "/det_b.csv"), C = slurp(dir + "/det_c.csv");
        const bool ok = a == 0 && b == 0 && c == 0 && !A.empty() && A == B && A == C;
        return {ok, fmt("exit codes %.0f/%.0f/%.0f", a, b, c) + ", repeat identical " + (A == B ? "yes" : "no") +
                        ", 1 vs 8 threads identical " + (A == C ? "yes" : "no")};
    }
} // namespace

int main()
{
    run(1, "closed-form unstructured CRB", 1, c1);
    run(2, "FIM machinery vs closed form", 1, c2);
    run(3, "analytic Jacobians vs finite differences", 10, c3);
    run(4, "LS efficiency (1000 trials)", 30, c4);
    run(5, "structured vs unstructured CRB gap", 300, c5);
    run(6, "bound ordering CRB_s <= CRB_u", 120, c6);
    run(7, "decoupled estimator, noiseless on-grid", 30, c7);
    run(8, "two-step shared-channel training", 10, c8);
    run(9, "composite covariance vs sample covariance", 60, c9);
    run(10, "LMMSE limits", 5, c10);
    run(11, "crb-sweep determinism", 60, c11);
    std::printf("%d of 11 criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}
