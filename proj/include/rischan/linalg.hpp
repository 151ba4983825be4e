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

#ifndef RISCHAN_LINALG_HPP
#define RISCHAN_LINALG_HPP

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace rischan
{
    using cd = std::complex<double>;
    using CMat = Eigen::MatrixXcd;
    using CVec = Eigen::VectorXcd;
    using RMat = Eigen::MatrixXd;
    using RVec = Eigen::VectorXd;
    using Index = Eigen::Index;
    using Rng = std::mt19937_64;

    inline constexpr double pi = 3.14159265358979323846;
    inline constexpr cd j1{0.0, 1.0};

    // Condition-number ceiling above which a system is treated as unidentifiable
    inline constexpr double max_condition = 1e12;

    // Raised when the data cannot determine the requested unknowns (rank-deficient operator or singular FIM)
    class identifiability_error : public std::runtime_error
    {
    public:
        using std::runtime_error::runtime_error;
    };

    // Kronecker product A (x) B
    CMat kron(const CMat &A, const CMat &B);
    RMat kron(const RMat &A, const RMat &B);
    CVec kron(const CVec &a, const CVec &b);

    // Column-wise Kronecker (Khatri-Rao) product; both inputs need the same column count
    CMat khatri_rao(const CMat &A, const CMat &B);

    // Hermitian square root via eigendecomposition; eigenvalues in [-1e-10*scale, 0) are clipped to zero,
    // anything more negative throws std::invalid_argument
    CMat hermitian_sqrt(const CMat &R);

    // Inverse of a Hermitian positive definite matrix via eigendecomposition.
    // Throws identifiability_error when the condition number exceeds max_condition.
    CMat hermitian_inverse(const CMat &A);

    // Moore-Penrose pseudo-inverse with threshold max(rows,cols) * eps * sigma_max.
    // When require_full_rank is set, a rank-deficient input throws identifiability_error.
    CMat pinv(const CMat &A, bool require_full_rank = false);

    // Real block form [Re -Im; Im Re] of a complex matrix
    RMat real_block(const CMat &A);

    // [Re(v); Im(v)]
    RVec stack_real(const CVec &v);
    CVec unstack_real(const RVec &v);

    // Wrap an angle into (-pi, pi]
    double wrap_phase(double w);

    // Circular complex Gaussian sample with E|z|^2 = variance
    cd complex_normal(Rng &rng, double variance = 1.0);
    CMat complex_normal(Rng &rng, Index rows, Index cols, double variance = 1.0);

    // Independent generator for (seed, stream, substream); identical inputs give identical streams
    Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream = 0);

    // True when A is Hermitian within tol (absolute, relative to max |A_ij|)
    bool is_hermitian(const CMat &A, double tol = 1e-12);

} // namespace rischan

#endif
