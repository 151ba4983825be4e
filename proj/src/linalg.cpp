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

#include "rischan/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>

namespace rischan
{
    template <typename Mat>
    static Mat kron_impl(const Mat &A, const Mat &B)
    {
        Mat C(A.rows() * B.rows(), A.cols() * B.cols());
        for (Index i = 0; i < A.rows(); ++i)
            for (Index k = 0; k < A.cols(); ++k)
                C.block(i * B.rows(), k * B.cols(), B.rows(), B.cols()) = A(i, k) * B;
        return C;
    }

    CMat kron(const CMat &A, const CMat &B) { return kron_impl(A, B); }
    RMat kron(const RMat &A, const RMat &B) { return kron_impl(A, B); }

    CVec kron(const CVec &a, const CVec &b)
    {
        CVec c(a.size() * b.size());
        for (Index i = 0; i < a.size(); ++i)
            c.segment(i * b.size(), b.size()) = a(i) * b;
        return c;
    }

    CMat khatri_rao(const CMat &A, const CMat &B)
    {
        if (A.cols() != B.cols())
            throw std::invalid_argument("khatri_rao: column counts differ");
        CMat C(A.rows() * B.rows(), A.cols());
        for (Index n = 0; n < A.cols(); ++n)
            for (Index i = 0; i < A.rows(); ++i)
                C.col(n).segment(i * B.rows(), B.rows()) = A(i, n) * B.col(n);
        return C;
    }

    CMat hermitian_sqrt(const CMat &R)
    {
        if (R.rows() != R.cols())
            throw std::invalid_argument("hermitian_sqrt: matrix is not square");
        if (R.size() == 0)
            return R;
        const CMat Rh = 0.5 * (R + R.adjoint());
        Eigen::SelfAdjointEigenSolver<CMat> es(Rh);
        RVec ev = es.eigenvalues();
        const double scale = std::max(1.0, ev.cwiseAbs().maxCoeff());
        for (Index i = 0; i < ev.size(); ++i)
        {
            if (ev(i) < -1e-10 * scale)
                throw std::invalid_argument("hermitian_sqrt: matrix is indefinite (eigenvalue " +
                                            std::to_string(ev(i)) + ")");
            ev(i) = std::sqrt(std::max(ev(i), 0.0));
        }
        return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
    }

    CMat hermitian_inverse(const CMat &A)
    {
        if (A.rows() != A.cols())
            throw std::invalid_argument("hermitian_inverse: matrix is not square");
        const CMat Ah = 0.5 * (A + A.adjoint());
        Eigen::SelfAdjointEigenSolver<CMat> es(Ah);
        const RVec &ev = es.eigenvalues();
        const double hi = ev.cwiseAbs().maxCoeff();
        const double lo = ev.minCoeff();
        if (!(hi > 0.0) || lo <= hi / max_condition)
            throw identifiability_error("matrix is singular or ill-conditioned (condition number above 1e12)");
        return es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
    }

    CMat pinv(const CMat &A, bool require_full_rank)
    {
        if (A.size() == 0)
            return CMat(A.cols(), A.rows());
        Eigen::BDCSVD<CMat> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const RVec &s = svd.singularValues();
        const double tol = static_cast<double>(std::max(A.rows(), A.cols())) *
                           std::numeric_limits<double>::epsilon() * (s.size() ? s(0) : 0.0);
        RVec s_inv = RVec::Zero(s.size());
        Index rank = 0;
        for (Index i = 0; i < s.size(); ++i)
            if (s(i) > tol)
            {
                s_inv(i) = 1.0 / s(i);
                ++rank;
            }
        if (require_full_rank && rank < std::min(A.rows(), A.cols()))
            throw identifiability_error("pseudo-inverse: matrix is rank deficient (rank " + std::to_string(rank) +
                                        " of " + std::to_string(std::min(A.rows(), A.cols())) + ")");
        return svd.matrixV() * s_inv.asDiagonal() * svd.matrixU().adjoint();
    }

    RMat real_block(const CMat &A)
    {
        const Index r = A.rows(), c = A.cols();
        RMat B(2 * r, 2 * c);
        B.topLeftCorner(r, c) = A.real();
        B.topRightCorner(r, c) = -A.imag();
        B.bottomLeftCorner(r, c) = A.imag();
        B.bottomRightCorner(r, c) = A.real();
        return B;
    }

    RVec stack_real(const CVec &v)
    {
        RVec s(2 * v.size());
        s.head(v.size()) = v.real();
        s.tail(v.size()) = v.imag();
        return s;
    }

    CVec unstack_real(const RVec &v)
    {
        if (v.size() % 2 != 0)
            throw std::invalid_argument("unstack_real: odd length");
        const Index n = v.size() / 2;
        CVec c(n);
        for (Index i = 0; i < n; ++i)
            c(i) = cd(v(i), v(n + i));
        return c;
    }

    double wrap_phase(double w)
    {
        double r = std::remainder(w, 2.0 * pi); // [-pi, pi]
        if (r <= -pi)
            r += 2.0 * pi;
        return r;
    }

    cd complex_normal(Rng &rng, double variance)
    {
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * variance));
        const double re = nd(rng);
        const double im = nd(rng);
        return {re, im};
    }

    CMat complex_normal(Rng &rng, Index rows, Index cols, double variance)
    {
        std::normal_distribution<double> nd(0.0, std::sqrt(0.5 * variance));
        CMat M(rows, cols);
        for (Index c = 0; c < cols; ++c)
            for (Index r = 0; r < rows; ++r)
            {
                const double re = nd(rng);
                const double im = nd(rng);
                M(r, c) = cd(re, im);
            }
        return M;
    }

    static std::uint64_t splitmix64(std::uint64_t x)
    {
        x += 0x9e3779b97f4a7c15ULL;
        x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
        x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
        return x ^ (x >> 31);
    }

    Rng derive_rng(std::uint64_t seed, std::uint64_t stream, std::uint64_t substream)
    {
        const std::uint64_t a = splitmix64(seed);
        const std::uint64_t b = splitmix64(a ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
        const std::uint64_t c = splitmix64(b ^ splitmix64(substream + 0x8cb92ba72f3d8dd7ULL));
        std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                          static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                          static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
        return Rng(seq);
    }

    bool is_hermitian(const CMat &A, double tol)
    {
        if (A.rows() != A.cols())
            return false;
        if (A.size() == 0)
            return true;
        const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
        return (A - A.adjoint()).cwiseAbs().maxCoeff() <= tol * scale;
    }

} // namespace rischan
