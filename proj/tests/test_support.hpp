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

// Shared oracles and scenario generators for the test binaries

#ifndef RISCHAN_TEST_SUPPORT_HPP
#define RISCHAN_TEST_SUPPORT_HPP

#include "rischan/crb.hpp"

#include <functional>

namespace rischan::testing
{
    // Z assembled entry by entry: row t*M + m, user-major column, weight sqrt(P_u/P_0) phi_t[c] x_{t,k}
    inline CMat naive_Z(const TrainingPlan &plan, const SystemGeometry &g)
    {
        const Index M = g.M(), cols = plan.Psi.cols();
        CMat Z = CMat::Zero(M * plan.T, M * g.K_total() * cols);
        for (Index t = 0; t < plan.T; ++t)
        {
            const CVec phi = plan.phi_tilde(t);
            Index base = 0;
            for (Index u = 0; u < g.users(); ++u)
            {
                const double w = std::sqrt(g.P(u) / g.P(0));
                const Index Ku = g.K(u);
                for (Index c = 0; c < cols; ++c)
                    for (Index k = 0; k < Ku; ++k)
                        for (Index m = 0; m < M; ++m)
                            Z(t * M + m, base + c * M * Ku + k * M + m) =
                                w * phi(c) * plan.X(g.antenna_offset(u) + k, t);
                base += M * Ku * cols;
            }
        }
        return Z;
    }

    // [Re -Im; Im Re] assembled without library helpers
    inline RMat naive_real_block(const CMat &A)
    {
        RMat R(2 * A.rows(), 2 * A.cols());
        for (Index i = 0; i < A.rows(); ++i)
            for (Index j = 0; j < A.cols(); ++j)
            {
                R(i, j) = A(i, j).real();
                R(i, A.cols() + j) = -A(i, j).imag();
                R(A.rows() + i, j) = A(i, j).imag();
                R(A.rows() + i, A.cols() + j) = A(i, j).real();
            }
        return R;
    }

    // Central differences of f at x
    inline RMat fd_jacobian(const std::function<RVec(const RVec &)> &f, const RVec &x, double h = 1e-6)
    {
        const RVec f0 = f(x);
        RMat J(f0.size(), x.size());
        for (Index i = 0; i < x.size(); ++i)
        {
            RVec xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            J.col(i) = (f(xp) - f(xm)) / (2.0 * h);
        }
        return J;
    }

    // Largest per-column relative error; columns far below the overall scale are compared against it
    inline double max_column_error(const RMat &A, const RMat &B)
    {
        const double scale = B.colwise().norm().maxCoeff();
        double worst = 0.0;
        for (Index i = 0; i < A.cols(); ++i)
        {
            const double den = std::max(B.col(i).norm(), 1e-6 * scale);
            worst = std::max(worst, (A.col(i) - B.col(i)).norm() / den);
        }
        return worst;
    }

    inline double rel_fro(const CMat &A, const CMat &B) { return (A - B).norm() / B.norm(); }
    inline double rel_fro(const RMat &A, const RMat &B) { return (A - B).norm() / B.norm(); }
    inline double rel_fro(const CVec &a, const CVec &b) { return (a - b).norm() / b.norm(); }

    struct Scenario
    {
        SystemGeometry geometry;
        GeometricParams params;
        TrainingPlan plan;
    };

    struct ScenarioShape
    {
        Index M = 3;
        ArraySpec ris = ArraySpec::ula(4);
        std::vector<Index> K{1};
        Index d_H = 1;
        Index d_G = 1;
        Index d_F = 0; // > 0 adds the direct column
        Index extra_blocks = 2;
    };

    // Random normalized parameters with a random-phase block plan that over-determines the composite channel
    inline Scenario make_scenario(const ScenarioShape &s, Rng &rng)
    {
        Scenario sc;
        sc.geometry.bs = ArraySpec::ula(s.M);
        sc.geometry.ris = s.ris;
        sc.geometry.ues.clear();
        sc.geometry.power.clear();
        std::uniform_real_distribution<double> pw(0.5, 2.0);
        for (Index k : s.K)
        {
            sc.geometry.ues.push_back(ArraySpec::ula(k));
            sc.geometry.power.push_back(sc.geometry.ues.size() == 1 ? 1.0 : pw(rng));
        }
        sc.geometry.sigma2 = 0.7;
        const std::vector<Index> dG(s.K.size(), s.d_G), dF(s.K.size(), s.d_F);
        sc.params = random_geometric(sc.geometry, s.d_H, dG, dF, GainVariance::Unit, rng);
        const bool direct = s.d_F > 0;
        const Index blocks = sc.geometry.N() + (direct ? 1 : 0) + s.extra_blocks;
        sc.plan = block_plan(orthogonal_pilots(sc.geometry.K_total()),
                             random_phase_sequence(blocks, sc.geometry.N(), direct, rng), direct);
        return sc;
    }

} // namespace rischan::testing

#endif
