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

#include "rischan/crb.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace rischan
{
    EtaLayout EtaLayout::make(const GeometricParams &params, const SystemGeometry &geometry, bool free_reference)
    {
        params.validate(geometry);
        EtaLayout L;
        L.d_H = params.d_H();
        if (L.d_H < 1)
            throw std::invalid_argument("EtaLayout: at least one RIS-BS path is required");
        L.ris_dims = geometry.ris.freq_dims();
        L.bs_freqs = geometry.M() > 1;
        L.free_reference = free_reference;
        const Index r = free_reference ? 0 : 1;
        Index off = 0;
        auto add = [&](const std::string &name, Index user, Index len) {
            L.segments.push_back({name, user, off, len});
            off += len;
        };
        add("w_BH", -1, L.bs_freqs ? L.d_H : 0);
        add("gamma_H", -1, 2 * (L.d_H - r));
        add("w_RH", -1, L.ris_dims * (L.d_H - r));
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const UserPaths &up = params.users[static_cast<size_t>(u)];
            const bool ue = geometry.K(u) > 1;
            L.d_G.push_back(up.d_G());
            L.d_F.push_back(up.d_F());
            L.ue_freqs.push_back(ue);
            add("w_RG", u, L.ris_dims * up.d_G());
            add("gamma_G", u, 2 * up.d_G());
            add("w_UG", u, ue ? up.d_G() : 0);
            add("w_BF", u, L.bs_freqs ? up.d_F() : 0);
            add("gamma_F", u, 2 * up.d_F());
            add("w_UF", u, ue ? up.d_F() : 0);
        }
        L.size = off;
        return L;
    }

    const EtaSegment &EtaLayout::segment(const std::string &name, Index user) const
    {
        for (const auto &s : segments)
            if (s.name == name && s.user == user)
                return s;
        throw std::out_of_range("EtaLayout: no segment " + name);
    }

    namespace
    {
        // Sequential reader/writer over the layout order
        struct Cursor
        {
            Index pos = 0;
        };

        void put_freqs(RVec &v, Cursor &c, const std::vector<SpatialFreq> &w, Index from, int dims, bool active)
        {
            if (!active)
                return;
            for (size_t i = static_cast<size_t>(from); i < w.size(); ++i)
            {
                v(c.pos++) = w[i].w1;
                if (dims == 2)
                    v(c.pos++) = w[i].w2;
            }
        }

        void put_gains(RVec &v, Cursor &c, const std::vector<cd> &g, Index from)
        {
            for (size_t i = static_cast<size_t>(from); i < g.size(); ++i)
            {
                v(c.pos++) = g[i].real();
                v(c.pos++) = g[i].imag();
            }
        }

        std::vector<SpatialFreq> get_freqs(const RVec &v, Cursor &c, Index count, int dims, bool active)
        {
            std::vector<SpatialFreq> w(static_cast<size_t>(count));
            if (!active)
                return w;
            for (auto &x : w)
            {
                const double a = v(c.pos++);
                const double b = dims == 2 ? v(c.pos++) : 0.0;
                x = SpatialFreq(a, b);
            }
            return w;
        }

        std::vector<cd> get_gains(const RVec &v, Cursor &c, Index count)
        {
            std::vector<cd> g(static_cast<size_t>(count));
            for (auto &x : g)
            {
                const double re = v(c.pos++);
                const double im = v(c.pos++);
                x = cd(re, im);
            }
            return g;
        }
    } // namespace

    RVec pack_eta(const GeometricParams &params, const EtaLayout &layout)
    {
        if (!layout.free_reference && !params.is_normalized())
            throw std::invalid_argument("pack_eta: parameters are not normalized (w_RH[0] = 0, gamma_H[0] = 1)");
        if (params.d_H() != layout.d_H || params.users.size() != layout.d_G.size())
            throw std::invalid_argument("pack_eta: parameters do not match the layout");
        const Index r = layout.free_reference ? 0 : 1;
        RVec v(layout.size);
        Cursor c;
        put_freqs(v, c, params.w_BH, 0, 1, layout.bs_freqs);
        put_gains(v, c, params.gamma_H, r);
        put_freqs(v, c, params.w_RH, r, layout.ris_dims, true);
        for (size_t u = 0; u < params.users.size(); ++u)
        {
            const UserPaths &up = params.users[u];
            if (up.d_G() != layout.d_G[u] || up.d_F() != layout.d_F[u])
                throw std::invalid_argument("pack_eta: path counts do not match the layout");
            put_freqs(v, c, up.w_RG, 0, layout.ris_dims, true);
            put_gains(v, c, up.gamma_G, 0);
            put_freqs(v, c, up.w_UG, 0, 1, layout.ue_freqs[u]);
            put_freqs(v, c, up.w_BF, 0, 1, layout.bs_freqs);
            put_gains(v, c, up.gamma_F, 0);
            put_freqs(v, c, up.w_UF, 0, 1, layout.ue_freqs[u]);
        }
        return v;
    }

    GeometricParams unpack_eta(const RVec &eta, const EtaLayout &layout)
    {
        if (eta.size() != layout.size)
            throw std::invalid_argument("unpack_eta: vector length does not match the layout");
        const Index r = layout.free_reference ? 0 : 1;
        GeometricParams p;
        Cursor c;
        p.w_BH = get_freqs(eta, c, layout.d_H, 1, layout.bs_freqs);
        auto gH = get_gains(eta, c, layout.d_H - r);
        auto wRH = get_freqs(eta, c, layout.d_H - r, layout.ris_dims, true);
        if (r == 1)
        {
            gH.insert(gH.begin(), cd(1.0, 0.0));
            wRH.insert(wRH.begin(), SpatialFreq(0.0, 0.0));
        }
        p.gamma_H = gH;
        p.w_RH = wRH;
        for (size_t u = 0; u < layout.d_G.size(); ++u)
        {
            UserPaths up;
            const Index dG = layout.d_G[u], dF = layout.d_F[u];
            up.w_RG = get_freqs(eta, c, dG, layout.ris_dims, true);
            up.gamma_G = get_gains(eta, c, dG);
            up.w_UG = get_freqs(eta, c, dG, 1, layout.ue_freqs[u]);
            up.w_BF = get_freqs(eta, c, dF, 1, layout.bs_freqs);
            up.gamma_F = get_gains(eta, c, dF);
            up.w_UF = get_freqs(eta, c, dF, 1, layout.ue_freqs[u]);
            p.users.push_back(up);
        }
        return p;
    }

    namespace
    {
        // Per-sample factors of the mean: RIS weights Phi (N x T), direct weights (T), per-user pilots
        struct MeanContext
        {
            CMat Phi;
            CVec direct;
            std::vector<CMat> X;
            std::vector<double> amp;
            bool with_direct = false;
        };

        MeanContext mean_context(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry)
        {
            plan.validate(geometry);
            if (params.has_direct() && !plan.include_direct)
                throw std::invalid_argument("direct paths need a plan with a direct column");
            const Index N = geometry.N(), T = plan.T;
            MeanContext ctx;
            ctx.with_direct = plan.include_direct;
            ctx.Phi.resize(N, T);
            ctx.direct = CVec::Zero(T);
            for (Index t = 0; t < T; ++t)
            {
                const CVec ph = plan.phi_tilde(t);
                ctx.Phi.col(t) = ph.tail(N);
                if (plan.include_direct)
                    ctx.direct(t) = ph(0);
            }
            for (Index u = 0; u < geometry.users(); ++u)
            {
                ctx.X.push_back(plan.X.middleRows(geometry.antenna_offset(u), geometry.K(u)));
                ctx.amp.push_back(std::sqrt(geometry.P(u)));
            }
            return ctx;
        }

        // M x T contribution of H through all users
        CMat through_H(const CMat &dH, const std::vector<CMat> &G, const MeanContext &ctx)
        {
            CMat V = CMat::Zero(dH.cols(), ctx.Phi.cols());
            for (size_t u = 0; u < G.size(); ++u)
                V += ctx.amp[u] * ctx.Phi.cwiseProduct(G[u].adjoint() * ctx.X[u]);
            return dH * V;
        }

        CMat through_G(const CMat &H, const CMat &dG, size_t u, const MeanContext &ctx)
        {
            return ctx.amp[u] * (H * ctx.Phi.cwiseProduct(dG.adjoint() * ctx.X[u]));
        }

        CMat through_F(const CMat &dF, size_t u, const MeanContext &ctx)
        {
            return ctx.amp[u] * ((dF * ctx.X[u]) * ctx.direct.asDiagonal());
        }

        RVec real_column(const CMat &Y)
        {
            return stack_real(Eigen::Map<const CVec>(Y.data(), Y.size()));
        }
    } // namespace

    CVec noiseless_mean(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry)
    {
        const MeanContext ctx = mean_context(params, plan, geometry);
        const ChannelSet ch = synth_geometric(params, geometry);
        CMat Y = through_H(ch.H, ch.G, ctx);
        if (ch.has_direct() && ctx.with_direct)
            for (size_t u = 0; u < ch.Hd.size(); ++u)
                Y += through_F(ch.Hd[u], u, ctx);
        return Eigen::Map<const CVec>(Y.data(), Y.size());
    }

    RMat mean_jacobian(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry,
                       const EtaLayout &layout)
    {
        const MeanContext ctx = mean_context(params, plan, geometry);
        const ChannelSet ch = synth_geometric(params, geometry);
        const ArraySpec &bs = geometry.bs, &ris = geometry.ris;
        const Index r = layout.free_reference ? 0 : 1;
        RMat J(2 * geometry.M() * plan.T, layout.size);
        Index col = 0;
        auto emit = [&](const CMat &Y) { J.col(col++) = real_column(Y); };

        const Index dH = params.d_H();
        if (layout.bs_freqs)
            for (Index p = 0; p < dH; ++p)
            {
                const CVec aR = steering(params.w_RH[static_cast<size_t>(p)], ris);
                const CMat dHm = params.gamma_H[static_cast<size_t>(p)] *
                                 steering_derivative(params.w_BH[static_cast<size_t>(p)], bs, 0) * aR.adjoint();
                emit(through_H(dHm, ch.G, ctx));
            }
        for (Index p = r; p < dH; ++p)
        {
            const CMat outer = steering(params.w_BH[static_cast<size_t>(p)], bs) *
                               steering(params.w_RH[static_cast<size_t>(p)], ris).adjoint();
            emit(through_H(outer, ch.G, ctx));
            emit(through_H(j1 * outer, ch.G, ctx));
        }
        for (Index p = r; p < dH; ++p)
        {
            const CVec aB = steering(params.w_BH[static_cast<size_t>(p)], bs);
            for (int axis = 0; axis < layout.ris_dims; ++axis)
            {
                const CMat dHm = params.gamma_H[static_cast<size_t>(p)] * aB *
                                 steering_derivative(params.w_RH[static_cast<size_t>(p)], ris, axis).adjoint();
                emit(through_H(dHm, ch.G, ctx));
            }
        }
        for (size_t u = 0; u < params.users.size(); ++u)
        {
            const UserPaths &up = params.users[u];
            const ArraySpec &ue = geometry.ues[u];
            for (Index l = 0; l < up.d_G(); ++l)
            {
                const CVec aU = steering(up.w_UG[static_cast<size_t>(l)], ue);
                for (int axis = 0; axis < layout.ris_dims; ++axis)
                {
                    const CMat dG = up.gamma_G[static_cast<size_t>(l)] * aU *
                                    steering_derivative(up.w_RG[static_cast<size_t>(l)], ris, axis).adjoint();
                    emit(through_G(ch.H, dG, u, ctx));
                }
            }
            for (Index l = 0; l < up.d_G(); ++l)
            {
                const CMat outer =
                    steering(up.w_UG[static_cast<size_t>(l)], ue) * steering(up.w_RG[static_cast<size_t>(l)], ris).adjoint();
                emit(through_G(ch.H, outer, u, ctx));
                emit(through_G(ch.H, j1 * outer, u, ctx));
            }
            if (layout.ue_freqs[u])
                for (Index l = 0; l < up.d_G(); ++l)
                {
                    const CMat dG = up.gamma_G[static_cast<size_t>(l)] *
                                    steering_derivative(up.w_UG[static_cast<size_t>(l)], ue, 0) *
                                    steering(up.w_RG[static_cast<size_t>(l)], ris).adjoint();
                    emit(through_G(ch.H, dG, u, ctx));
                }
            if (layout.bs_freqs)
                for (Index q = 0; q < up.d_F(); ++q)
                {
                    const CMat dF = up.gamma_F[static_cast<size_t>(q)] *
                                    steering_derivative(up.w_BF[static_cast<size_t>(q)], bs, 0) *
                                    steering(up.w_UF[static_cast<size_t>(q)], ue).adjoint();
                    emit(through_F(dF, u, ctx));
                }
            for (Index q = 0; q < up.d_F(); ++q)
            {
                const CMat outer =
                    steering(up.w_BF[static_cast<size_t>(q)], bs) * steering(up.w_UF[static_cast<size_t>(q)], ue).adjoint();
                emit(through_F(outer, u, ctx));
                emit(through_F(j1 * outer, u, ctx));
            }
            if (layout.ue_freqs[u])
                for (Index q = 0; q < up.d_F(); ++q)
                {
                    const CMat dF = up.gamma_F[static_cast<size_t>(q)] * steering(up.w_BF[static_cast<size_t>(q)], bs) *
                                    steering_derivative(up.w_UF[static_cast<size_t>(q)], ue, 0).adjoint();
                    emit(through_F(dF, u, ctx));
                }
        }
        if (col != layout.size)
            throw std::logic_error("mean_jacobian: layout mismatch");
        return J;
    }

    RMat channel_jacobian(const GeometricParams &params, const SystemGeometry &geometry, const EtaLayout &layout,
                          bool include_direct)
    {
        params.validate(geometry);
        const Index M = geometry.M(), N = geometry.N();
        const Index ncols = N + (include_direct ? 1 : 0);
        const Index dim = M * geometry.K_total() * ncols;
        if (params.has_direct() && !include_direct)
            throw std::invalid_argument("channel_jacobian: direct paths need the direct column");
        const ArraySpec &bs = geometry.bs, &ris = geometry.ris;
        const Index r = layout.free_reference ? 0 : 1;
        const Index dH = params.d_H();

        // user block offsets
        std::vector<Index> block(static_cast<size_t>(geometry.users()));
        Index acc = 0;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            block[static_cast<size_t>(u)] = acc;
            acc += M * geometry.K(u) * ncols;
        }
        const Index ris_off = include_direct ? 1 : 0;

        CMat Jc = CMat::Zero(dim, layout.size);
        auto add_ris = [&](Index col, size_t u, const CVec &v) {
            const Index len = M * geometry.K(static_cast<Index>(u)) * N;
            Jc.col(col).segment(block[u] + ris_off * M * geometry.K(static_cast<Index>(u)), len) += v;
        };
        auto add_direct = [&](Index col, size_t u, const CVec &v) {
            Jc.col(col).segment(block[u], v.size()) += v;
        };

        // For path (l, p) of user u: a_R(w_RG,l - w_RH,p) (x) conj(a_U) (x) a_B with optional derivative factors
        auto term = [&](size_t u, Index l, Index p, int ris_axis, bool d_ue, bool d_bs) {
            const UserPaths &up = params.users[u];
            const SpatialFreq wd = up.w_RG[static_cast<size_t>(l)] - params.w_RH[static_cast<size_t>(p)];
            const CVec aR = ris_axis < 0 ? steering(wd, ris) : steering_derivative(wd, ris, ris_axis);
            const CVec aU = (d_ue ? steering_derivative(up.w_UG[static_cast<size_t>(l)], geometry.ues[u], 0)
                                  : steering(up.w_UG[static_cast<size_t>(l)], geometry.ues[u]))
                                .conjugate();
            const CVec aB = d_bs ? steering_derivative(params.w_BH[static_cast<size_t>(p)], bs, 0)
                                 : steering(params.w_BH[static_cast<size_t>(p)], bs);
            return CVec(kron(aR, kron(aU, aB)));
        };
        auto gain = [&](size_t u, Index l, Index p) {
            return std::conj(params.users[u].gamma_G[static_cast<size_t>(l)]) * params.gamma_H[static_cast<size_t>(p)];
        };

        Index col = 0;
        if (layout.bs_freqs)
            for (Index p = 0; p < dH; ++p, ++col)
                for (size_t u = 0; u < params.users.size(); ++u)
                    for (Index l = 0; l < params.users[u].d_G(); ++l)
                        add_ris(col, u, gain(u, l, p) * term(u, l, p, -1, false, true));
        for (Index p = r; p < dH; ++p, col += 2)
            for (size_t u = 0; u < params.users.size(); ++u)
                for (Index l = 0; l < params.users[u].d_G(); ++l)
                {
                    const CVec v = std::conj(params.users[u].gamma_G[static_cast<size_t>(l)]) * term(u, l, p, -1, false, false);
                    add_ris(col, u, v);
                    add_ris(col + 1, u, j1 * v);
                }
        for (Index p = r; p < dH; ++p)
            for (int axis = 0; axis < layout.ris_dims; ++axis, ++col)
                for (size_t u = 0; u < params.users.size(); ++u)
                    for (Index l = 0; l < params.users[u].d_G(); ++l)
                        add_ris(col, u, -gain(u, l, p) * term(u, l, p, axis, false, false));
        for (size_t u = 0; u < params.users.size(); ++u)
        {
            const UserPaths &up = params.users[u];
            const ArraySpec &ue = geometry.ues[u];
            for (Index l = 0; l < up.d_G(); ++l)
                for (int axis = 0; axis < layout.ris_dims; ++axis, ++col)
                    for (Index p = 0; p < dH; ++p)
                        add_ris(col, u, gain(u, l, p) * term(u, l, p, axis, false, false));
            for (Index l = 0; l < up.d_G(); ++l, col += 2)
                for (Index p = 0; p < dH; ++p)
                {
                    const CVec v = params.gamma_H[static_cast<size_t>(p)] * term(u, l, p, -1, false, false);
                    add_ris(col, u, v);
                    add_ris(col + 1, u, -j1 * v);
                }
            if (layout.ue_freqs[u])
                for (Index l = 0; l < up.d_G(); ++l, ++col)
                    for (Index p = 0; p < dH; ++p)
                        add_ris(col, u, gain(u, l, p) * term(u, l, p, -1, true, false));
            if (layout.bs_freqs)
                for (Index q = 0; q < up.d_F(); ++q, ++col)
                    add_direct(col, u,
                               up.gamma_F[static_cast<size_t>(q)] *
                                   kron(CVec(steering(up.w_UF[static_cast<size_t>(q)], ue).conjugate()),
                                        steering_derivative(up.w_BF[static_cast<size_t>(q)], bs, 0)));
            for (Index q = 0; q < up.d_F(); ++q, col += 2)
            {
                const CVec v = kron(CVec(steering(up.w_UF[static_cast<size_t>(q)], ue).conjugate()),
                                    steering(up.w_BF[static_cast<size_t>(q)], bs));
                add_direct(col, u, v);
                add_direct(col + 1, u, j1 * v);
            }
            if (layout.ue_freqs[u])
                for (Index q = 0; q < up.d_F(); ++q, ++col)
                    add_direct(col, u,
                               up.gamma_F[static_cast<size_t>(q)] *
                                   kron(CVec(steering_derivative(up.w_UF[static_cast<size_t>(q)], ue, 0).conjugate()),
                                        steering(up.w_BF[static_cast<size_t>(q)], bs)));
        }
        if (col != layout.size)
            throw std::logic_error("channel_jacobian: layout mismatch");
        RMat J(2 * dim, layout.size);
        J.topRows(dim) = Jc.real();
        J.bottomRows(dim) = Jc.imag();
        return J;
    }

    RMat unstructured_mean_jacobian(const MeasurementOperator &Z, double P)
    {
        const Index n = Z.cols();
        RMat J(2 * Z.rows(), 2 * n);
        CVec e = CVec::Zero(n);
        for (Index i = 0; i < n; ++i)
        {
            e(i) = 1.0;
            J.col(i) = std::sqrt(P) * stack_real(Z.apply(e));
            e(i) = j1;
            J.col(n + i) = std::sqrt(P) * stack_real(Z.apply(e));
            e(i) = 0.0;
        }
        return J;
    }

    RMat fim_from_jacobian(const RMat &J, double sigma2)
    {
        if (!(sigma2 > 0.0))
            throw std::invalid_argument("fim_from_jacobian: noise variance must be positive");
        RMat F = (2.0 / sigma2) * (J.transpose() * J);
        return 0.5 * (F + F.transpose());
    }

    static void summarize(CrbReport &r)
    {
        r.mean_diag = r.diagonal.size() ? r.diagonal.mean() : 0.0;
        r.mean_diag_db = 10.0 * std::log10(r.mean_diag);
    }

    CrbReport crb_unstructured(const MeasurementOperator &Z, double P, double sigma2, bool full_matrix)
    {
        if (!(P > 0.0))
            throw std::invalid_argument("crb_unstructured: power must be positive");
        const CMat Ginv = hermitian_inverse(Z.gram());
        const Index M = Z.M(), C = Ginv.rows(), n = M * C;
        const double s = sigma2 / (2.0 * P);
        CrbReport r;
        r.diagonal.resize(2 * n);
        for (Index c = 0; c < C; ++c)
            for (Index m = 0; m < M; ++m)
            {
                r.diagonal(c * M + m) = s * Ginv(c, c).real();
                r.diagonal(n + c * M + m) = s * Ginv(c, c).real();
            }
        if (full_matrix)
            r.matrix = s * real_block(kron(Ginv, CMat(CMat::Identity(M, M))));
        Eigen::SelfAdjointEigenSolver<CMat> es(Z.gram(), Eigen::EigenvaluesOnly);
        r.condition = es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
        summarize(r);
        return r;
    }

    CrbReport crb_eta(const RMat &fim)
    {
        Eigen::SelfAdjointEigenSolver<RMat> es(0.5 * (fim + fim.transpose()));
        const RVec &lam = es.eigenvalues();
        const RMat &V = es.eigenvectors();
        const double hi = lam.cwiseAbs().maxCoeff();
        const double lo = lam.minCoeff();
        CrbReport r;
        r.condition = lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
        const double cut = hi / max_condition;
        RVec inv = RVec::Zero(lam.size());
        std::set<Index> nulls;
        for (Index i = 0; i < lam.size(); ++i)
        {
            if (lam(i) > cut && hi > 0.0)
                inv(i) = 1.0 / lam(i);
            else
            {
                r.ill_conditioned = true;
                for (Index k = 0; k < V.rows(); ++k)
                    if (std::abs(V(k, i)) > 0.1)
                        nulls.insert(k);
            }
        }
        r.null_params.assign(nulls.begin(), nulls.end());
        r.matrix = V * inv.asDiagonal() * V.transpose();
        r.matrix = 0.5 * (r.matrix + r.matrix.transpose());
        r.diagonal = r.matrix.diagonal();
        summarize(r);
        return r;
    }

    CrbReport crb_structured(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry,
                             bool full_matrix, bool free_reference)
    {
        const EtaLayout layout = EtaLayout::make(params, geometry, free_reference);
        if (!free_reference && !params.is_normalized())
            throw std::invalid_argument("crb_structured: parameters are not normalized");
        const RMat J = mean_jacobian(params, plan, geometry, layout);
        const CrbReport eta = crb_eta(fim_from_jacobian(J, geometry.sigma2));
        const RMat Jh = channel_jacobian(params, geometry, layout, plan.include_direct);
        const RMat JC = Jh * eta.matrix;
        CrbReport r;
        r.ill_conditioned = eta.ill_conditioned;
        r.condition = eta.condition;
        r.null_params = eta.null_params;
        r.diagonal = JC.cwiseProduct(Jh).rowwise().sum();
        if (full_matrix)
        {
            r.matrix = JC * Jh.transpose();
            r.matrix = 0.5 * (r.matrix + r.matrix.transpose());
        }
        summarize(r);
        return r;
    }

} // namespace rischan
