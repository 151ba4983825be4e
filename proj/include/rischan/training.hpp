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

#ifndef RISCHAN_TRAINING_HPP
#define RISCHAN_TRAINING_HPP

#include "rischan/channel_models.hpp"

#include <cstddef>

namespace rischan
{
    enum class Protocol
    {
        BlockRepeat, // RIS state held for K consecutive samples, Psi has T/K rows
        PerSample    // RIS state changes every sample, Psi has T rows
    };

    // Pilot and RIS schedule. Row b of Psi is the conjugated reflection vector of block b, with an optional
    // leading all-ones column for the direct path.
    struct TrainingPlan
    {
        Index T = 0;
        CMat X;   // K_total x T
        CMat Psi; // blocks x (N or N + 1)
        Protocol protocol = Protocol::BlockRepeat;
        bool include_direct = false;

        // RIS schedule row used at sample t
        Index psi_row(Index t) const;

        // phi_tilde_t = conj(row of Psi)^T
        CVec phi_tilde(Index t) const;

        // Throws std::invalid_argument when the plan does not fit the geometry
        void validate(const SystemGeometry &geometry) const;
    };

    // [Psi]_{mn} = exp(j 2 pi m n / blocks), blocks x (N + 1); needs blocks >= N + 1
    CMat dft_ris_sequence(Index blocks, Index N);

    // First N + 1 columns of the Sylvester-Hadamard matrix; blocks must be a power of two >= N + 1
    CMat hadamard_ris_sequence(Index blocks, Index N);

    // I_N (one element on per block); only valid without a direct column
    CMat one_hot_ris_sequence(Index N, bool include_direct = false);

    // Unit-modulus random phases, rows x N, plus a leading ones column when include_direct is set
    CMat random_phase_sequence(Index rows, Index N, bool include_direct, Rng &rng);

    // Drops the leading (direct path) column
    CMat without_direct_column(const CMat &Psi);

    // X(k, t) = exp(-j 2 pi k t / K), so X X^H = K I
    CMat orthogonal_pilots(Index K);

    // Block-repeat plan: the K x K pilot block is repeated once per row of Psi
    TrainingPlan block_plan(const CMat &X_block, const CMat &Psi, bool include_direct);

    // Per-sample plan with X (K x T) and Psi (T rows)
    TrainingPlan per_sample_plan(const CMat &X, const CMat &Psi, bool include_direct);

    inline constexpr std::size_t default_dense_cap = std::size_t(2) << 30;

    // Stacked measurement operator Z with rows phi_tilde_t^T (x) x_t^T (x) I_M, acting on the user-major
    // composite vector. Per-user powers enter as sqrt(P_u / P_0) so that y = sqrt(P_0) Z h_c + n.
    // Z = A (x) I_M where A (T x C) holds the per-coefficient weights; C = sum_u K_u * columns.
    class MeasurementOperator
    {
    public:
        MeasurementOperator(const TrainingPlan &plan, const SystemGeometry &geometry);

        Index M() const { return M_; }
        Index T() const { return A_.rows(); }
        Index rows() const { return M_ * A_.rows(); }
        Index cols() const { return M_ * A_.cols(); }
        Index coefficients() const { return A_.cols(); }
        bool include_direct() const { return include_direct_; }

        // Coefficient weights A
        const CMat &weights() const { return A_; }

        // Dense Z; throws std::length_error when the matrix would exceed the byte cap
        CMat dense(std::size_t cap_bytes = default_dense_cap) const;

        CVec apply(const CVec &h) const;
        CVec apply_adjoint(const CVec &y) const;

        // Coefficient Gram matrix A^H A, so Z^H Z = gram() (x) I_M
        CMat gram() const;

        // Full Z^H Z
        CMat gram_full() const;

    private:
        Index M_;
        bool include_direct_;
        CMat A_;
    };

    // sqrt(P_0) Z h_c + CN(0, sigma2) noise, h_c = composite_vector(channels, plan.include_direct)
    CVec simulate_uplink(const ChannelSet &channels, const TrainingPlan &plan, const SystemGeometry &geometry, Rng &rng);

    // Received samples y (M T) as an M x T matrix
    CMat as_sample_matrix(const CVec &y, Index M);

} // namespace rischan

#endif
