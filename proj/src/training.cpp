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

#include "rischan/training.hpp"

#include <cmath>

namespace rischan
{
    Index TrainingPlan::psi_row(Index t) const
    {
        if (protocol == Protocol::PerSample)
            return t;
        const Index K = X.rows();
        return t / K;
    }

    CVec TrainingPlan::phi_tilde(Index t) const
    {
        return Psi.row(psi_row(t)).adjoint();
    }

    void TrainingPlan::validate(const SystemGeometry &geometry) const
    {
        const Index K = geometry.K_total();
        if (X.rows() != K || X.cols() != T)
            throw std::invalid_argument("pilot matrix must be K_total x T");
        const Index cols = geometry.N() + (include_direct ? 1 : 0);
        if (Psi.cols() != cols)
            throw std::invalid_argument("RIS schedule has " + std::to_string(Psi.cols()) + " columns, expected " +
                                        std::to_string(cols));
        if (protocol == Protocol::BlockRepeat)
        {
            if (T % K != 0)
                throw std::invalid_argument("block-repeat protocol needs T divisible by K");
            if (Psi.rows() != T / K)
                throw std::invalid_argument("block-repeat protocol needs T / K schedule rows");
        }
        else if (Psi.rows() != T)
            throw std::invalid_argument("per-sample protocol needs T schedule rows");
    }

    CMat dft_ris_sequence(Index blocks, Index N)
    {
        if (N < 0 || blocks < N + 1)
            throw std::invalid_argument("dft_ris_sequence: needs blocks >= N + 1");
        CMat Psi(blocks, N + 1);
        for (Index m = 0; m < blocks; ++m)
            for (Index n = 0; n <= N; ++n)
            {
                const Index e = (m * n) % blocks; // exact phase index
                Psi(m, n) = std::polar(1.0, 2.0 * pi * static_cast<double>(e) / static_cast<double>(blocks));
            }
        return Psi;
    }

    CMat hadamard_ris_sequence(Index blocks, Index N)
    {
        if (blocks < 1 || (blocks & (blocks - 1)) != 0)
            throw std::invalid_argument("hadamard_ris_sequence: block count must be a power of two");
        if (blocks < N + 1)
            throw std::invalid_argument("hadamard_ris_sequence: needs blocks >= N + 1");
        RMat H = RMat::Ones(1, 1);
        while (H.rows() < blocks)
        {
            const Index n = H.rows();
            RMat next(2 * n, 2 * n);
            next << H, H, H, -H;
            H = next;
        }
        return H.leftCols(N + 1).cast<cd>();
    }

    CMat one_hot_ris_sequence(Index N, bool include_direct)
    {
        if (include_direct)
            throw std::invalid_argument("one_hot_ris_sequence: the direct path cannot be included");
        return CMat::Identity(N, N);
    }

    CMat random_phase_sequence(Index rows, Index N, bool include_direct, Rng &rng)
    {
        std::uniform_real_distribution<double> ph(-pi, pi);
        const Index off = include_direct ? 1 : 0;
        CMat Psi(rows, N + off);
        for (Index r = 0; r < rows; ++r)
        {
            if (include_direct)
                Psi(r, 0) = 1.0;
            for (Index n = 0; n < N; ++n)
                Psi(r, n + off) = std::polar(1.0, ph(rng));
        }
        return Psi;
    }

    CMat without_direct_column(const CMat &Psi)
    {
        if (Psi.cols() < 1)
            throw std::invalid_argument("without_direct_column: empty schedule");
        return Psi.rightCols(Psi.cols() - 1);
    }

    CMat orthogonal_pilots(Index K)
    {
        if (K < 1)
            throw std::invalid_argument("orthogonal_pilots: K must be >= 1");
        CMat X(K, K);
        for (Index k = 0; k < K; ++k)
            for (Index t = 0; t < K; ++t)
                X(k, t) = std::polar(1.0, -2.0 * pi * static_cast<double>((k * t) % K) / static_cast<double>(K));
        return X;
    }

    TrainingPlan block_plan(const CMat &X_block, const CMat &Psi, bool include_direct)
    {
        const Index K = X_block.rows();
        if (X_block.cols() != K)
            throw std::invalid_argument("block_plan: pilot block must be K x K");
        TrainingPlan plan;
        plan.T = K * Psi.rows();
        plan.X.resize(K, plan.T);
        for (Index b = 0; b < Psi.rows(); ++b)
            plan.X.middleCols(b * K, K) = X_block;
        plan.Psi = Psi;
        plan.protocol = Protocol::BlockRepeat;
        plan.include_direct = include_direct;
        return plan;
    }

    TrainingPlan per_sample_plan(const CMat &X, const CMat &Psi, bool include_direct)
    {
        if (Psi.rows() != X.cols())
            throw std::invalid_argument("per_sample_plan: schedule needs one row per sample");
        TrainingPlan plan;
        plan.T = X.cols();
        plan.X = X;
        plan.Psi = Psi;
        plan.protocol = Protocol::PerSample;
        plan.include_direct = include_direct;
        return plan;
    }

    MeasurementOperator::MeasurementOperator(const TrainingPlan &plan, const SystemGeometry &geometry)
        : M_(geometry.M()), include_direct_(plan.include_direct)
    {
        plan.validate(geometry);
        const Index ncols = plan.Psi.cols();
        const Index C = geometry.K_total() * ncols;
        A_.resize(plan.T, C);
        const double p0 = geometry.P(0);
        for (Index t = 0; t < plan.T; ++t)
        {
            const CVec phi = plan.phi_tilde(t);
            Index c = 0;
            for (Index u = 0; u < geometry.users(); ++u)
            {
                const double s = std::sqrt(geometry.P(u) / p0);
                const Index Ku = geometry.K(u), k0 = geometry.antenna_offset(u);
                for (Index n = 0; n < ncols; ++n)
                    for (Index k = 0; k < Ku; ++k)
                        A_(t, c++) = s * phi(n) * plan.X(k0 + k, t);
            }
        }
    }

    CMat MeasurementOperator::dense(std::size_t cap_bytes) const
    {
        const double bytes = static_cast<double>(rows()) * static_cast<double>(cols()) * sizeof(cd);
        if (bytes > static_cast<double>(cap_bytes))
            throw std::length_error("dense measurement operator exceeds the memory cap");
        CMat Z = CMat::Zero(rows(), cols());
        for (Index t = 0; t < A_.rows(); ++t)
            for (Index c = 0; c < A_.cols(); ++c)
                if (A_(t, c) != cd(0.0, 0.0))
                    for (Index m = 0; m < M_; ++m)
                        Z(t * M_ + m, c * M_ + m) = A_(t, c);
        return Z;
    }

    CVec MeasurementOperator::apply(const CVec &h) const
    {
        if (h.size() != cols())
            throw std::invalid_argument("MeasurementOperator::apply: dimension mismatch");
        const Eigen::Map<const CMat> Hm(h.data(), M_, A_.cols());
        const CMat Y = Hm * A_.transpose();
        return Eigen::Map<const CVec>(Y.data(), Y.size());
    }

    CVec MeasurementOperator::apply_adjoint(const CVec &y) const
    {
        if (y.size() != rows())
            throw std::invalid_argument("MeasurementOperator::apply_adjoint: dimension mismatch");
        const Eigen::Map<const CMat> Ym(y.data(), M_, A_.rows());
        const CMat W = Ym * A_.conjugate();
        return Eigen::Map<const CVec>(W.data(), W.size());
    }

    CMat MeasurementOperator::gram() const { return A_.adjoint() * A_; }

    CMat MeasurementOperator::gram_full() const
    {
        return kron(gram(), CMat(CMat::Identity(M_, M_)));
    }

    CVec simulate_uplink(const ChannelSet &channels, const TrainingPlan &plan, const SystemGeometry &geometry, Rng &rng)
    {
        const MeasurementOperator op(plan, geometry);
        const CVec h = composite_vector(channels, plan.include_direct);
        CVec y = std::sqrt(geometry.P(0)) * op.apply(h);
        if (geometry.sigma2 > 0.0)
            y += complex_normal(rng, y.size(), 1, geometry.sigma2);
        return y;
    }

    CMat as_sample_matrix(const CVec &y, Index M)
    {
        if (M < 1 || y.size() % M != 0)
            throw std::invalid_argument("as_sample_matrix: length is not a multiple of M");
        return Eigen::Map<const CMat>(y.data(), M, y.size() / M);
    }

} // namespace rischan
