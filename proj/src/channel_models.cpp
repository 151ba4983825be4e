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

#include "rischan/channel_models.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>
#include <numeric>

namespace rischan
{
    Index SystemGeometry::K_total() const
    {
        Index k = 0;
        for (const auto &ue : ues)
            k += ue.elements();
        return k;
    }

    Index SystemGeometry::antenna_offset(Index u) const
    {
        Index k = 0;
        for (Index v = 0; v < u; ++v)
            k += K(v);
        return k;
    }

    void SystemGeometry::validate() const
    {
        bs.validate();
        ris.validate();
        if (ues.empty())
            throw std::invalid_argument("geometry needs at least one user");
        for (const auto &ue : ues)
        {
            ue.validate();
            if (ue.kind != ArrayKind::ULA)
                throw std::invalid_argument("UE arrays must be linear");
        }
        if (bs.kind != ArrayKind::ULA)
            throw std::invalid_argument("the BS array must be linear");
        if (power.size() != ues.size())
            throw std::invalid_argument("one transmit power per user is required");
        for (double p : power)
            if (!(p > 0.0))
                throw std::invalid_argument("transmit powers must be positive");
        if (!(sigma2 >= 0.0))
            throw std::invalid_argument("noise variance must be non-negative");
    }

    bool GeometricParams::has_direct() const
    {
        for (const auto &u : users)
            if (u.d_F() > 0)
                return true;
        return false;
    }

    bool GeometricParams::is_normalized(double tol) const
    {
        if (gamma_H.empty() || w_RH.empty())
            return false;
        return std::abs(w_RH[0].w1) <= tol && std::abs(w_RH[0].w2) <= tol && std::abs(gamma_H[0] - cd(1.0, 0.0)) <= tol;
    }

    void GeometricParams::validate(const SystemGeometry &geometry) const
    {
        if (w_BH.size() != gamma_H.size() || w_RH.size() != gamma_H.size())
            throw std::invalid_argument("RIS-BS path lists have inconsistent lengths");
        if (static_cast<Index>(users.size()) != geometry.users())
            throw std::invalid_argument("path sets do not match the number of users");
        for (const auto &u : users)
        {
            if (u.w_RG.size() != u.gamma_G.size() || u.w_UG.size() != u.gamma_G.size())
                throw std::invalid_argument("UE-RIS path lists have inconsistent lengths");
            if (u.w_BF.size() != u.gamma_F.size() || u.w_UF.size() != u.gamma_F.size())
                throw std::invalid_argument("direct path lists have inconsistent lengths");
        }
        // linear arrays only use the first frequency component
        auto linear = [](const std::vector<SpatialFreq> &w, const ArraySpec &spec, const char *name) {
            if (spec.kind == ArrayKind::ULA)
                for (const auto &x : w)
                    if (x.w2 != 0.0)
                        throw std::invalid_argument(std::string(name) + " has a second component on a linear array");
        };
        linear(w_BH, geometry.bs, "w_BH");
        linear(w_RH, geometry.ris, "w_RH");
        for (size_t u = 0; u < users.size(); ++u)
        {
            linear(users[u].w_RG, geometry.ris, "w_RG");
            linear(users[u].w_UG, geometry.ues[u], "w_UG");
            linear(users[u].w_BF, geometry.bs, "w_BF");
            linear(users[u].w_UF, geometry.ues[u], "w_UF");
        }
    }

    CorrelationModel CorrelationModel::uncorrelated(Index M, Index K, Index N, double sigma2_Hd, double sigma2_H,
                                                    double sigma2_G)
    {
        CorrelationModel c;
        c.R_HB = sigma2_H * CMat::Identity(M, M);
        c.R_HR = CMat::Identity(N, N);
        c.R_GU = sigma2_G * CMat::Identity(K, K);
        c.R_GR = CMat::Identity(N, N);
        if (sigma2_Hd > 0.0)
        {
            c.R_HdB = sigma2_Hd * CMat::Identity(M, M);
            c.R_HdU = CMat::Identity(K, K);
        }
        return c;
    }

    static void check_psd(const CMat &R, Index n, const char *name)
    {
        if (R.rows() != n || R.cols() != n)
            throw std::invalid_argument(std::string(name) + " has the wrong dimension");
        if (!is_hermitian(R, 1e-12))
            throw std::invalid_argument(std::string(name) + " is not Hermitian");
        Eigen::SelfAdjointEigenSolver<CMat> es(0.5 * (R + R.adjoint()), Eigen::EigenvaluesOnly);
        const double scale = std::max(1.0, es.eigenvalues().cwiseAbs().maxCoeff());
        if (es.eigenvalues().minCoeff() < -1e-10 * scale)
            throw std::invalid_argument(std::string(name) + " is not positive semidefinite");
    }

    void CorrelationModel::validate(const SystemGeometry &geometry) const
    {
        const Index M = geometry.M(), N = geometry.N(), K = geometry.K_total();
        check_psd(R_HB, M, "R_HB");
        check_psd(R_HR, N, "R_HR");
        check_psd(R_GU, K, "R_GU");
        check_psd(R_GR, N, "R_GR");
        if (has_direct())
        {
            check_psd(R_HdB, M, "R_HdB");
            check_psd(R_HdU, K, "R_HdU");
        }
    }

    static CMat gains_diag(const std::vector<cd> &g)
    {
        CVec v(static_cast<Index>(g.size()));
        for (size_t i = 0; i < g.size(); ++i)
            v(static_cast<Index>(i)) = g[i];
        return v.asDiagonal();
    }

    ChannelSet synth_geometric(const GeometricParams &params, const SystemGeometry &geometry)
    {
        params.validate(geometry);
        ChannelSet ch;
        ch.H = steering_matrix(params.w_BH, geometry.bs) * gains_diag(params.gamma_H) *
               steering_matrix(params.w_RH, geometry.ris).adjoint();
        const bool direct = params.has_direct();
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const UserPaths &up = params.users[static_cast<size_t>(u)];
            const ArraySpec &ue = geometry.ues[static_cast<size_t>(u)];
            ch.G.push_back(steering_matrix(up.w_UG, ue) * gains_diag(up.gamma_G) *
                           steering_matrix(up.w_RG, geometry.ris).adjoint());
            if (direct)
            {
                if (up.d_F() > 0)
                    ch.Hd.push_back(steering_matrix(up.w_BF, geometry.bs) * gains_diag(up.gamma_F) *
                                    steering_matrix(up.w_UF, ue).adjoint());
                else
                    ch.Hd.push_back(CMat::Zero(geometry.M(), ue.elements()));
            }
        }
        return ch;
    }

    CMat composite_channel(const ChannelSet &channels, bool include_direct)
    {
        const Index M = channels.H.rows(), N = channels.H.cols();
        Index rows = 0;
        for (const auto &G : channels.G)
        {
            if (G.cols() != N)
                throw std::invalid_argument("composite_channel: G and H disagree on the RIS size");
            rows += M * G.rows();
        }
        const Index off = include_direct ? 1 : 0;
        CMat Hc = CMat::Zero(rows, N + off);
        Index r = 0;
        for (size_t u = 0; u < channels.G.size(); ++u)
        {
            const CMat &G = channels.G[u];
            const Index Ku = G.rows();
            if (include_direct && channels.has_direct())
            {
                const CMat &Hd = channels.Hd[u];
                if (Hd.rows() != M || Hd.cols() != Ku)
                    throw std::invalid_argument("composite_channel: direct channel has the wrong dimension");
                Hc.col(0).segment(r, M * Ku) = Eigen::Map<const CVec>(Hd.data(), M * Ku);
            }
            Hc.block(r, off, M * Ku, N) = khatri_rao(G.conjugate(), channels.H);
            r += M * Ku;
        }
        return Hc;
    }

    CVec composite_vector(const ChannelSet &channels, bool include_direct)
    {
        const CMat Hc = composite_channel(channels, include_direct);
        const Index M = channels.H.rows();
        CVec h(Hc.size());
        Index pos = 0, r = 0;
        for (const auto &G : channels.G)
        {
            const Index rows = M * G.rows();
            for (Index n = 0; n < Hc.cols(); ++n)
            {
                h.segment(pos, rows) = Hc.col(n).segment(r, rows);
                pos += rows;
            }
            r += rows;
        }
        return h;
    }

    ChannelSet synth_unstructured(const CorrelationModel &corr, const SystemGeometry &geometry, Rng &rng)
    {
        corr.validate(geometry);
        const Index M = geometry.M(), N = geometry.N(), K = geometry.K_total();
        const CMat sHB = hermitian_sqrt(corr.R_HB), sHR = hermitian_sqrt(corr.R_HR);
        const CMat sGU = hermitian_sqrt(corr.R_GU), sGR = hermitian_sqrt(corr.R_GR);
        ChannelSet ch;
        ch.H = sHB * complex_normal(rng, M, N) * sHR;
        const CMat G = sGU * complex_normal(rng, K, N) * sGR;
        CMat Hd;
        if (corr.has_direct())
            Hd = hermitian_sqrt(corr.R_HdB) * complex_normal(rng, M, K) * hermitian_sqrt(corr.R_HdU);
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const Index k0 = geometry.antenna_offset(u), Ku = geometry.K(u);
            ch.G.push_back(G.middleRows(k0, Ku));
            if (corr.has_direct())
                ch.Hd.push_back(Hd.middleCols(k0, Ku));
        }
        return ch;
    }

    // Position of (column n, global antenna k, BS antenna m) of the stacked composite matrix in the user-major vector
    static std::vector<Index> user_major_permutation(const SystemGeometry &geometry, Index ncols)
    {
        const Index M = geometry.M(), Kt = geometry.K_total();
        std::vector<Index> perm(static_cast<size_t>(M * Kt * ncols));
        Index block = 0;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const Index Ku = geometry.K(u), k0 = geometry.antenna_offset(u);
            for (Index n = 0; n < ncols; ++n)
                for (Index k = 0; k < Ku; ++k)
                    for (Index m = 0; m < M; ++m)
                        perm[static_cast<size_t>(n * M * Kt + (k0 + k) * M + m)] = block + n * M * Ku + k * M + m;
            block += M * Ku * ncols;
        }
        return perm;
    }

    CMat composite_covariance(const CorrelationModel &corr, const SystemGeometry &geometry, bool include_direct)
    {
        const Index M = geometry.M(), N = geometry.N(), K = geometry.K_total();
        const Index off = include_direct ? M * K : 0;
        const Index dim = off + M * K * N;
        CMat R = CMat::Zero(dim, dim);
        if (include_direct && corr.has_direct())
            R.topLeftCorner(off, off) = kron(CMat(corr.R_HdU.transpose()), corr.R_HdB);
        const CMat RR = corr.R_GR.cwiseProduct(corr.R_HR.transpose());
        R.bottomRightCorner(M * K * N, M * K * N) = kron(RR, kron(CMat(corr.R_GU.transpose()), corr.R_HB));
        if (geometry.users() == 1)
            return R;
        const auto perm = user_major_permutation(geometry, include_direct ? N + 1 : N);
        CMat P(dim, dim);
        for (Index i = 0; i < dim; ++i)
            for (Index k = 0; k < dim; ++k)
                P(perm[static_cast<size_t>(i)], perm[static_cast<size_t>(k)]) = R(i, k);
        return P;
    }

    GeometricParams normalize_identifiability(const GeometricParams &params)
    {
        if (params.gamma_H.empty() || params.w_RH.empty())
            throw std::invalid_argument("normalize_identifiability: no RIS-BS paths");
        const cd g0 = params.gamma_H[0];
        if (std::abs(g0) == 0.0)
            throw std::invalid_argument("normalize_identifiability: leading RIS-BS gain is zero");
        const SpatialFreq shift = params.w_RH[0];
        GeometricParams out = params;
        for (auto &w : out.w_RH)
            w = w - shift;
        out.w_RH[0] = SpatialFreq(0.0, 0.0);
        for (auto &g : out.gamma_H)
            g /= g0;
        out.gamma_H[0] = cd(1.0, 0.0);
        for (auto &u : out.users)
        {
            for (auto &w : u.w_RG)
                w = w - shift;
            for (auto &g : u.gamma_G)
                g *= std::conj(g0);
        }
        return out;
    }

    CMat group_channel(const CMat &Hc, Index group_size)
    {
        if (group_size < 1 || Hc.cols() % group_size != 0)
            throw std::invalid_argument("group_channel: RIS size is not divisible by the group size");
        const Index groups = Hc.cols() / group_size;
        CMat out = CMat::Zero(Hc.rows(), groups);
        for (Index g = 0; g < groups; ++g)
            for (Index j = 0; j < group_size; ++j)
                out.col(g) += Hc.col(g * group_size + j);
        return out;
    }

    CMat composite_manifold(const GeometricParams &params, const SystemGeometry &geometry, Index u)
    {
        const UserPaths &up = params.users[static_cast<size_t>(u)];
        const ArraySpec &ue = geometry.ues[static_cast<size_t>(u)];
        const Index dH = params.d_H(), dG = up.d_G();
        const Index len = geometry.N() * ue.elements() * geometry.M();
        CMat A(len, dG * dH);
        for (Index l = 0; l < dG; ++l)
        {
            const CVec aU = steering(up.w_UG[static_cast<size_t>(l)], ue).conjugate();
            for (Index p = 0; p < dH; ++p)
            {
                const CVec aR = steering(up.w_RG[static_cast<size_t>(l)] - params.w_RH[static_cast<size_t>(p)],
                                         geometry.ris);
                A.col(l * dH + p) = kron(aR, kron(aU, steering(params.w_BH[static_cast<size_t>(p)], geometry.bs)));
            }
        }
        return A;
    }

    CVec composite_gains(const GeometricParams &params, Index u)
    {
        const UserPaths &up = params.users[static_cast<size_t>(u)];
        const Index dH = params.d_H(), dG = up.d_G();
        CVec g(dG * dH);
        for (Index l = 0; l < dG; ++l)
            for (Index p = 0; p < dH; ++p)
                g(l * dH + p) = std::conj(up.gamma_G[static_cast<size_t>(l)]) * params.gamma_H[static_cast<size_t>(p)];
        return g;
    }

    GeometricParams random_geometric(const SystemGeometry &geometry, Index d_H, const std::vector<Index> &d_G,
                                     const std::vector<Index> &d_F, GainVariance rule, Rng &rng)
    {
        if (d_H < 1)
            throw std::invalid_argument("random_geometric: d_H must be >= 1");
        if (static_cast<Index>(d_G.size()) != geometry.users() || static_cast<Index>(d_F.size()) != geometry.users())
            throw std::invalid_argument("random_geometric: one path count per user is required");
        std::uniform_real_distribution<double> az(-90.0, 90.0), el(0.0, 90.0);
        auto var = [rule](Index d) { return rule == GainVariance::Unit ? 1.0 : 1.0 / static_cast<double>(d); };
        auto draw = [&](const ArraySpec &spec) {
            const double a = az(rng);
            const double e = el(rng);
            return freq_from_angles(a, e, spec);
        };
        GeometricParams p;
        for (Index i = 0; i < d_H; ++i)
        {
            p.w_BH.push_back(draw(geometry.bs));
            p.w_RH.push_back(draw(geometry.ris));
            p.gamma_H.push_back(complex_normal(rng, var(d_H)));
        }
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const ArraySpec &ue = geometry.ues[static_cast<size_t>(u)];
            UserPaths up;
            const Index dg = d_G[static_cast<size_t>(u)], df = d_F[static_cast<size_t>(u)];
            for (Index i = 0; i < dg; ++i)
            {
                up.w_RG.push_back(draw(geometry.ris));
                up.w_UG.push_back(draw(ue));
                up.gamma_G.push_back(complex_normal(rng, var(dg)));
            }
            for (Index i = 0; i < df; ++i)
            {
                up.w_BF.push_back(draw(geometry.bs));
                up.w_UF.push_back(draw(ue));
                up.gamma_F.push_back(complex_normal(rng, var(df)));
            }
            p.users.push_back(up);
        }
        return normalize_identifiability(p);
    }

} // namespace rischan
