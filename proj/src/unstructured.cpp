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

#include "rischan/unstructured.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>

namespace rischan
{
    // (G (x) I_M) v for the coefficient Gram G
    static CVec apply_gram(const CMat &G, const CVec &v, Index M)
    {
        const Eigen::Map<const CMat> V(v.data(), M, G.rows());
        const CMat W = V * G.transpose();
        return Eigen::Map<const CVec>(W.data(), W.size());
    }

    static CMat apply_gram(const CMat &G, const CMat &V, Index M)
    {
        CMat out(V.rows(), V.cols());
        for (Index i = 0; i < V.cols(); ++i)
            out.col(i) = apply_gram(G, CVec(V.col(i)), M);
        return out;
    }

    // Returns c when G = c I within 1e-10 c, otherwise 0
    static double scaled_identity(const CMat &G)
    {
        const double c = G.diagonal().real().mean();
        if (!(c > 0.0))
            return 0.0;
        const CMat D = G - c * CMat::Identity(G.rows(), G.cols());
        return D.cwiseAbs().maxCoeff() <= 1e-10 * c ? c : 0.0;
    }

    LsResult ls_estimate(const CVec &y, const MeasurementOperator &Z, double P, double sigma2, bool with_covariance)
    {
        if (!(P > 0.0))
            throw std::invalid_argument("ls_estimate: power must be positive");
        if (y.size() != Z.rows())
            throw std::invalid_argument("ls_estimate: data length does not match the operator");
        if (Z.cols() > Z.rows())
            throw identifiability_error("LS needs M T >= number of unknowns (" + std::to_string(Z.rows()) + " < " +
                                        std::to_string(Z.cols()) + ")");
        const CMat Ginv = hermitian_inverse(Z.gram());
        LsResult r;
        r.h_hat = apply_gram(Ginv, Z.apply_adjoint(y), Z.M()) / std::sqrt(P);
        if (with_covariance)
            r.covariance = (sigma2 / P) * kron(Ginv, CMat(CMat::Identity(Z.M(), Z.M())));
        return r;
    }

    CMat subblock_ls(const std::vector<CMat> &Y_blocks, const CMat &X, const CMat &Psi, double P)
    {
        const Index K = X.rows();
        if (X.cols() != K)
            throw std::invalid_argument("subblock_ls: pilot block must be K x K");
        if ((X * X.adjoint() - static_cast<double>(K) * CMat::Identity(K, K)).cwiseAbs().maxCoeff() > 1e-10 * K)
            throw std::invalid_argument("subblock_ls: pilots are not orthogonal");
        const CMat PP = Psi.adjoint() * Psi;
        const double c = scaled_identity(PP);
        if (c == 0.0)
            throw std::invalid_argument("subblock_ls: RIS schedule is not orthogonal");
        if (static_cast<Index>(Y_blocks.size()) != Psi.rows())
            throw std::invalid_argument("subblock_ls: one data block per schedule row is required");
        const Index M = Y_blocks.empty() ? 0 : Y_blocks[0].rows();
        CMat Yc(M * K, Psi.rows());
        for (Index b = 0; b < Psi.rows(); ++b)
        {
            const CMat &Yb = Y_blocks[static_cast<size_t>(b)];
            if (Yb.rows() != M || Yb.cols() != K)
                throw std::invalid_argument("subblock_ls: data blocks must be M x K");
            const CMat R = Yb * X.adjoint() / (static_cast<double>(K) * std::sqrt(P));
            Yc.col(b) = Eigen::Map<const CVec>(R.data(), R.size());
        }
        return Yc * Psi / c;
    }

    static CMat symmetrize(const CMat &A) { return 0.5 * (A + A.adjoint()); }

    LmmseResult lmmse_estimate(const CVec &y, const MeasurementOperator &Z, const CMat &R, double P, double sigma2)
    {
        const Index n = Z.cols();
        if (R.rows() != n || R.cols() != n)
            throw std::invalid_argument("lmmse_estimate: prior covariance has the wrong dimension");
        if (y.size() != Z.rows())
            throw std::invalid_argument("lmmse_estimate: data length does not match the operator");
        const CMat G = Z.gram();
        const CVec zy = Z.apply_adjoint(y);
        LmmseResult r;
        const double c = scaled_identity(G);
        if (c > 0.0)
        {
            const double s = sigma2 / (P * c);
            Eigen::SelfAdjointEigenSolver<CMat> es(symmetrize(R));
            const RVec &lam = es.eigenvalues();
            RVec w(lam.size()), e(lam.size());
            for (Index i = 0; i < lam.size(); ++i)
            {
                const double l = std::max(lam(i), 0.0);
                w(i) = l + s > 0.0 ? l / (l + s) : 0.0;
                e(i) = l + s > 0.0 ? l * s / (l + s) : 0.0;
            }
            const CMat &V = es.eigenvectors();
            const CVec h_ls = zy / (std::sqrt(P) * c);
            r.h_hat = V * (w.asDiagonal() * (V.adjoint() * h_ls));
            r.error_cov = V * e.asDiagonal() * V.adjoint();
            return r;
        }
        // Parameter-space form (P R Z^H Z + sigma2 I)^{-1} R Z^H, equal to the data-space form by push-through
        const CMat RG = P * apply_gram(G, CMat(R.adjoint()), Z.M()).adjoint(); // P R (G (x) I)
        CMat A = RG + sigma2 * CMat::Identity(n, n);
        const CVec rhs = std::sqrt(P) * (R * zy);
        const CMat RGR = RG * R;
        if (sigma2 > 0.0)
        {
            Eigen::PartialPivLU<CMat> lu(A);
            r.h_hat = lu.solve(rhs);
            r.error_cov = symmetrize(R - lu.solve(RGR));
        }
        else
        {
            Eigen::CompleteOrthogonalDecomposition<CMat> cod(A);
            r.h_hat = cod.solve(rhs);
            r.error_cov = symmetrize(R - cod.solve(RGR));
        }
        return r;
    }

    CVec lowrank_lmmse(const CVec &y, const MeasurementOperator &Z, const CMat &U, double P, double sigma2)
    {
        if (U.rows() != Z.cols())
            throw std::invalid_argument("lowrank_lmmse: U has the wrong row count");
        const CMat W = U.adjoint() * apply_gram(Z.gram(), U, Z.M());
        const CMat A = W + (sigma2 / P) * CMat::Identity(U.cols(), U.cols());
        const CVec rhs = U.adjoint() * Z.apply_adjoint(y);
        Eigen::CompleteOrthogonalDecomposition<CMat> cod(A);
        return U * cod.solve(rhs) / std::sqrt(P);
    }

    Index two_step_min_training(Index M, Index N, Index K)
    {
        const Index unknowns = (K - 1) * (N + M);
        return (N + 1) + (unknowns + M - 1) / M;
    }

    TwoStepPlans two_step_plans(Index M, Index N, Index K, Index T1, Index T2, Rng &rng)
    {
        if (T1 < N + 1)
            throw identifiability_error("two-step training: step 1 needs T1 >= N + 1");
        if (K > 1 && M * T2 < (K - 1) * (M + N))
            throw identifiability_error("two-step training: step 2 needs T2 >= (K - 1)(N / M + 1)");
        TwoStepPlans plans;
        CMat X1 = CMat::Zero(K, T1);
        X1.row(0).setOnes();
        plans.step1 = per_sample_plan(X1, dft_ris_sequence(T1, N), true);
        std::uniform_real_distribution<double> ph(-pi, pi);
        CMat X2 = CMat::Zero(K, T2);
        for (Index k = 1; k < K; ++k)
            for (Index t = 0; t < T2; ++t)
                X2(k, t) = std::polar(1.0, ph(rng));
        plans.step2 = per_sample_plan(X2, random_phase_sequence(T2, N, true, rng), true);
        return plans;
    }

    TwoStepResult two_step_common(const CVec &y1, const CVec &y2, const TwoStepPlans &plans, Index M, Index N, Index K,
                                  double P)
    {
        const Index T1 = plans.step1.T, T2 = plans.step2.T;
        if (T1 < N + 1)
            throw identifiability_error("two-step estimation: step 1 needs T1 >= N + 1");
        if (K > 1 && M * T2 < (K - 1) * (M + N))
            throw identifiability_error("two-step estimation: step 2 needs T2 >= (K - 1)(N / M + 1)");

        SystemGeometry g1;
        g1.bs = ArraySpec::ula(M);
        g1.ris = ArraySpec::ula(N);
        g1.ues = {ArraySpec::ula(1)};
        g1.power = {P};
        const TrainingPlan p1 = per_sample_plan(plans.step1.X.topRows(1), plans.step1.Psi, true);
        const MeasurementOperator op1(p1, g1);
        const CVec h1 = ls_estimate(y1, op1, P, 0.0, false).h_hat;

        TwoStepResult r;
        r.Hd = CMat::Zero(M, K);
        r.Hd.col(0) = h1.head(M);
        r.H_tilde = Eigen::Map<const CMat>(h1.data() + M, M, N);
        r.G_tilde = CMat::Ones(K, N);

        if (K > 1)
        {
            const Index per = M + N;
            CMat Zt = CMat::Zero(M * T2, (K - 1) * per);
            for (Index t = 0; t < T2; ++t)
            {
                const CVec phi = plans.step2.phi_tilde(t).tail(N);
                const CMat Hphi = r.H_tilde * phi.asDiagonal();
                for (Index k = 1; k < K; ++k)
                {
                    const cd x = plans.step2.X(k, t);
                    Zt.block(t * M, (k - 1) * per, M, M) = x * CMat::Identity(M, M);
                    Zt.block(t * M, (k - 1) * per + M, M, N) = x * Hphi;
                }
            }
            const CMat Ginv = hermitian_inverse(Zt.adjoint() * Zt);
            const CVec h2 = Ginv * (Zt.adjoint() * y2) / std::sqrt(P);
            for (Index k = 1; k < K; ++k)
            {
                r.Hd.col(k) = h2.segment((k - 1) * per, M);
                r.G_tilde.row(k) = h2.segment((k - 1) * per + M, N).conjugate().transpose();
            }
        }

        r.Hc.resize(M * K, N + 1);
        for (Index k = 0; k < K; ++k)
        {
            r.Hc.block(k * M, 0, M, 1) = r.Hd.col(k);
            r.Hc.block(k * M, 1, M, N) = r.H_tilde * r.G_tilde.row(k).conjugate().asDiagonal();
        }
        return r;
    }

} // namespace rischan
