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

#include <Eigen/QR>

#include <algorithm>
#include <cmath>

namespace rischan
{
    Manifold array_manifold(const ArraySpec &spec)
    {
        return [spec](const SpatialFreq &w) { return steering(w, spec); };
    }

    Manifold ris_manifold(const ArraySpec &ris, const CMat &Psi)
    {
        if (Psi.cols() != ris.elements())
            throw std::invalid_argument("ris_manifold: schedule width does not match the RIS size");
        const CMat Pc = Psi.conjugate();
        return [ris, Pc](const SpatialFreq &w) -> CVec { return Pc * steering(w, ris); };
    }

    CMat sample_covariance(const CMat &Y)
    {
        if (Y.cols() < 1)
            throw std::invalid_argument("sample_covariance: needs at least one snapshot");
        CMat R = Y * Y.adjoint() / static_cast<double>(Y.cols());
        return 0.5 * (R + R.adjoint());
    }

    static CMat dictionary(const Manifold &manifold, const FreqGrid &grid)
    {
        const CVec a0 = manifold(grid.points.front());
        CMat D(a0.size(), grid.size());
        D.col(0) = a0;
        for (Index i = 1; i < grid.size(); ++i)
            D.col(i) = manifold(grid.points[static_cast<size_t>(i)]);
        return D;
    }

    RVec beamform_spectrum(const AoaProblem &problem, const FreqGrid &grid)
    {
        grid.validate();
        const CMat D = dictionary(problem.manifold, grid);
        const CMat C = D.adjoint() * problem.data;
        const double n = static_cast<double>(problem.data.cols());
        RVec p(grid.size());
        for (Index i = 0; i < grid.size(); ++i)
        {
            const double a2 = D.col(i).squaredNorm();
            p(i) = a2 > 0.0 ? C.row(i).squaredNorm() / (n * a2) : 0.0;
        }
        return p;
    }

    std::vector<Index> local_maxima(const RVec &values, const std::vector<Index> &dims)
    {
        Index total = 1;
        for (Index d : dims)
            total *= d;
        if (total != values.size())
            throw std::invalid_argument("local_maxima: dimensions do not match the value count");
        const size_t nd = dims.size();
        std::vector<Index> stride(nd, 1);
        for (size_t a = nd; a-- > 1;)
            stride[a - 1] = stride[a] * dims[a];

        // neighbour offsets in {-1, 0, 1}^nd, excluding the origin and axes of length 1
        std::vector<std::vector<int>> offsets;
        std::vector<int> cur(nd, -1);
        while (true)
        {
            bool origin = true, valid = true;
            for (size_t a = 0; a < nd; ++a)
            {
                if (cur[a] != 0)
                    origin = false;
                if (cur[a] != 0 && dims[a] == 1)
                    valid = false;
            }
            if (!origin && valid)
                offsets.push_back(cur);
            size_t a = 0;
            while (a < nd && cur[a] == 1)
                cur[a++] = -1;
            if (a == nd)
                break;
            ++cur[a];
        }

        std::vector<Index> peaks;
        std::vector<Index> coord(nd);
        for (Index i = 0; i < total; ++i)
        {
            Index rem = i;
            for (size_t a = 0; a < nd; ++a)
            {
                coord[a] = rem / stride[a];
                rem %= stride[a];
            }
            bool is_max = true;
            for (const auto &off : offsets)
            {
                Index j = 0;
                for (size_t a = 0; a < nd; ++a)
                    j += ((coord[a] + off[a] + dims[a]) % dims[a]) * stride[a];
                if (j != i && !(values(i) > values(j)))
                {
                    is_max = false;
                    break;
                }
            }
            if (is_max && !offsets.empty())
                peaks.push_back(i);
        }
        std::stable_sort(peaks.begin(), peaks.end(), [&](Index a, Index b) { return values(a) > values(b); });
        return peaks;
    }

    std::vector<SpatialFreq> beamform_peaks(const AoaProblem &problem, const FreqGrid &grid)
    {
        if (!grid.is_product())
            throw std::invalid_argument("beamform_peaks: grid must be a product grid");
        const RVec p = beamform_spectrum(problem, grid);
        const auto idx = local_maxima(p, {grid.res_x, grid.res_y});
        if (static_cast<Index>(idx.size()) < problem.d)
            throw std::runtime_error("beamform_peaks: found " + std::to_string(idx.size()) + " peaks, need " +
                                     std::to_string(problem.d));
        std::vector<SpatialFreq> out;
        for (Index k = 0; k < problem.d; ++k)
            out.push_back(grid.points[static_cast<size_t>(idx[static_cast<size_t>(k)])]);
        return out;
    }

    double dml_objective(const CMat &Y, const CMat &A)
    {
        if (A.rows() != Y.rows())
            throw std::invalid_argument("dml_objective: dimension mismatch");
        const CMat Ap = pinv(A, true);
        const CMat res = Y - A * (Ap * Y);
        return res.squaredNorm() / static_cast<double>(std::max<Index>(Y.cols(), 1));
    }

    static CMat orthonormal_basis(const CMat &A)
    {
        if (A.cols() == 0)
            return CMat(A.rows(), 0);
        Eigen::HouseholderQR<CMat> qr(A);
        return qr.householderQ() * CMat::Identity(A.rows(), A.cols());
    }

    namespace
    {
        // Projected atom score ||a^H P Y||^2 / ||P a||^2
        struct ProjectedScore
        {
            CMat Q;
            CMat PY;
            const Manifold &manifold;

            ProjectedScore(const CMat &Y, const CMat &others, const Manifold &m) : manifold(m)
            {
                Q = orthonormal_basis(others);
                PY = Q.cols() > 0 ? CMat(Y - Q * (Q.adjoint() * Y)) : Y;
            }

            double operator()(const SpatialFreq &w) const
            {
                const CVec a = manifold(w);
                double den = a.squaredNorm();
                if (Q.cols() > 0)
                    den -= (Q.adjoint() * a).squaredNorm();
                if (!(den > 1e-12 * a.squaredNorm()))
                    return 0.0;
                return (a.adjoint() * PY).squaredNorm() / den;
            }
        };

        SpatialFreq shifted(const SpatialFreq &w, int axis, double t)
        {
            return axis == 0 ? SpatialFreq(w.w1 + t, w.w2) : SpatialFreq(w.w1, w.w2 + t);
        }
    } // namespace

    SpatialFreq refine_rotation(const CMat &Y, const SpatialFreq &coarse, const Manifold &manifold,
                                const FreqGrid &grid, const CMat &others)
    {
        const ProjectedScore f(Y, others, manifold);
        const double f0 = f(coarse);
        const int axes = grid.res_y > 1 ? 2 : 1;
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double off[2] = {0.0, 0.0};
        bool peaked = false;
        for (int axis = 0; axis < axes; ++axis)
        {
            const double c = grid.cell(axis);
            const SpatialFreq base(coarse.w1 + off[0], coarse.w2 + off[1]);
            auto h = [&](double t) { return f(shifted(base, axis, t)); };
            double a = -c, b = c;
            double x1 = b - g * (b - a), x2 = a + g * (b - a);
            double f1 = h(x1), f2 = h(x2);
            for (int it = 0; it < 64; ++it)
            {
                if (f1 < f2)
                {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + g * (b - a);
                    f2 = h(x2);
                }
                else
                {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - g * (b - a);
                    f1 = h(x1);
                }
            }
            const double h0 = h(0.0);
            double t = f1 >= f2 ? x1 : x2;
            if (!(h(t) > h0))
                t = 0.0;
            // value comparisons stall near sqrt(eps); finish with Newton steps on central differences
            bool newton = false;
            double tn = t;
            for (int it = 0; it < 4; ++it)
            {
                const double e = 1e-6, fm = h(tn - e), fc = h(tn), fp = h(tn + e);
                const double d2 = (fp - 2.0 * fc + fm) / (e * e);
                if (!(d2 < 0.0) || !(-d2 * e * e > 1e-12 * std::abs(fc)))
                    break;
                const double step = -(fp - fm) / (2.0 * e) / d2;
                if (!(std::abs(tn + step) <= c))
                    break;
                tn += step;
                newton = true;
                if (std::abs(step) < 1e-14)
                    break;
            }
            if (newton && h(tn) >= h0 - 1e-12 * std::abs(h0))
            {
                t = tn;
                peaked = true;
            }
            off[axis] += t;
        }
        const SpatialFreq refined(coarse.w1 + off[0], coarse.w2 + off[1]);
        if (!(f(refined) > f0) && !(peaked && f(refined) >= f0 - 1e-12 * std::abs(f0)))
            return SpatialFreq(0.0, 0.0);
        return SpatialFreq(off[0], off[1]);
    }

    static CMat atoms(const Manifold &manifold, const std::vector<SpatialFreq> &w, Index len, Index skip = -1)
    {
        CMat A(len, static_cast<Index>(w.size()) - (skip >= 0 ? 1 : 0));
        Index c = 0;
        for (size_t i = 0; i < w.size(); ++i)
            if (static_cast<Index>(i) != skip)
                A.col(c++) = manifold(w[i]);
        return A;
    }

    GridFit greedy_grid_fit(const CMat &Y, const Manifold &manifold, const FreqGrid &grid, Index d, int polish_sweeps)
    {
        grid.validate();
        if (d < 1)
            throw std::invalid_argument("greedy_grid_fit: model order must be >= 1");
        const CMat D = dictionary(manifold, grid);
        const Index len = D.rows();
        if (d > len)
            throw std::invalid_argument("greedy_grid_fit: model order exceeds the data dimension");
        const RVec norms = D.colwise().squaredNorm().transpose();

        // re-refine every chosen atom against the others until no frequency moves
        std::vector<SpatialFreq> chosen;
        auto polish = [&]() {
            const Index n = static_cast<Index>(chosen.size());
            for (int s = 0; s < polish_sweeps; ++s)
            {
                double moved = 0.0;
                for (Index i = 0; i < n; ++i)
                {
                    auto &w = chosen[static_cast<size_t>(i)];
                    const SpatialFreq off = refine_rotation(Y, w, manifold, grid, atoms(manifold, chosen, len, i));
                    moved = std::max({moved, std::abs(off.w1), std::abs(off.w2)});
                    w = w + off;
                }
                if (moved < 1e-12)
                    break;
            }
        };
        for (Index i = 0; i < d; ++i)
        {
            const CMat A = atoms(manifold, chosen, len);
            const CMat Q = orthonormal_basis(A);
            const CMat R = Q.cols() > 0 ? CMat(Y - Q * (Q.adjoint() * Y)) : Y;
            const CMat C = D.adjoint() * R;
            RVec den = norms;
            if (Q.cols() > 0)
                den -= (Q.adjoint() * D).colwise().squaredNorm().transpose();
            Index best = -1;
            double best_val = -1.0;
            for (Index g = 0; g < D.cols(); ++g)
            {
                if (!(den(g) > 1e-10 * norms(g)))
                    continue;
                const double v = C.row(g).squaredNorm() / den(g);
                if (v > best_val)
                {
                    best_val = v;
                    best = g;
                }
            }
            if (best < 0)
                throw std::runtime_error("greedy_grid_fit: no admissible atom left");
            chosen.push_back(grid.points[static_cast<size_t>(best)]);
            polish();
        }
        GridFit fit;
        fit.freqs = chosen;
        const CMat A = atoms(manifold, chosen, len);
        fit.coef = pinv(A) * Y;
        return fit;
    }

    EstimatorGrids EstimatorGrids::defaults(const SystemGeometry &geometry, Index res_1d, Index res_ris)
    {
        EstimatorGrids g;
        g.bs = FreqGrid::uniform(res_1d);
        g.ue = FreqGrid::uniform(res_1d);
        g.ris = geometry.ris.kind == ArrayKind::URA ? FreqGrid::uniform(res_ris, res_ris) : FreqGrid::uniform(res_1d);
        return g;
    }

    Stage1Result stage1_angles(const CMat &Y1, const CMat &X1, const SystemGeometry &geometry, Index d_H,
                               const std::vector<Index> &d_G, const EstimatorGrids &grids)
    {
        const Index M = geometry.M();
        if (d_H < 1 || d_H >= M)
            throw std::invalid_argument("stage1_angles: BS model order must satisfy 1 <= d_H < M");
        if (static_cast<Index>(d_G.size()) != geometry.users())
            throw std::invalid_argument("stage1_angles: one UE path count per user is required");
        if (Y1.rows() != M || X1.cols() != Y1.cols() || X1.rows() != geometry.K_total())
            throw std::invalid_argument("stage1_angles: data and pilot dimensions disagree");
        if (X1.cols() < geometry.K_total())
            throw std::invalid_argument("stage1_angles: needs T1 >= K");

        Stage1Result r;
        r.w_BH = greedy_grid_fit(Y1, array_manifold(geometry.bs), grids.bs, d_H).freqs;
        const CMat S = X1 * Y1.adjoint() / (static_cast<double>(X1.cols()) * std::sqrt(geometry.P(0)));
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const Index Ku = geometry.K(u), dg = d_G[static_cast<size_t>(u)];
            if (dg < 1)
                throw std::invalid_argument("stage1_angles: every user needs d_G >= 1");
            if (Ku > dg)
            {
                const CMat Su = S.middleRows(geometry.antenna_offset(u), Ku);
                r.w_UG.push_back(
                    greedy_grid_fit(Su, array_manifold(geometry.ues[static_cast<size_t>(u)]), grids.ue, dg).freqs);
                r.ue_resolved.push_back(true);
            }
            else
            {
                r.w_UG.emplace_back();
                r.ue_resolved.push_back(false);
            }
        }
        return r;
    }

    ReducedData stage2_reduce(const CMat &Y2, const TrainingPlan &plan2, const Stage1Result &stage1,
                              const SystemGeometry &geometry)
    {
        plan2.validate(geometry);
        if (plan2.protocol != Protocol::BlockRepeat)
            throw std::invalid_argument("stage2_reduce: needs the block-repeat protocol");
        if (plan2.include_direct)
            throw std::invalid_argument("stage2_reduce: the direct channel is not modelled in stage 2");
        const Index M = geometry.M(), Kt = geometry.K_total(), blocks = plan2.Psi.rows();
        if (Y2.rows() != M || Y2.cols() != plan2.T)
            throw std::invalid_argument("stage2_reduce: data must be M x T2");
        const Index dH = static_cast<Index>(stage1.w_BH.size());
        const CMat AB = steering_matrix(stage1.w_BH, geometry.bs);

        ReducedData out;
        out.Psi = plan2.Psi;
        out.resolved = stage1.ue_resolved;
        std::vector<CMat> proj;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const Index Ku = geometry.K(u);
            if (stage1.ue_resolved[static_cast<size_t>(u)])
            {
                const auto &wu = stage1.w_UG[static_cast<size_t>(u)];
                const Index dG = static_cast<Index>(wu.size());
                CMat B(M * Ku, dG * dH);
                for (Index l = 0; l < dG; ++l)
                {
                    const CVec aU = steering(wu[static_cast<size_t>(l)], geometry.ues[static_cast<size_t>(u)]).conjugate();
                    for (Index p = 0; p < dH; ++p)
                        B.col(l * dH + p) = kron(aU, CVec(AB.col(p)));
                }
                proj.push_back(pinv(B, true));
                out.YB.emplace_back(blocks, dG * dH);
            }
            else
            {
                proj.push_back(pinv(AB, true));
                out.YB.emplace_back(blocks, dH * Ku);
            }
        }

        for (Index b = 0; b < blocks; ++b)
        {
            const CMat Xb = plan2.X.middleCols(b * Kt, Kt);
            if ((Xb * Xb.adjoint() - static_cast<double>(Kt) * CMat::Identity(Kt, Kt)).cwiseAbs().maxCoeff() >
                1e-10 * static_cast<double>(Kt))
                throw std::invalid_argument("stage2_reduce: pilot blocks must be orthogonal");
            const CMat Qb = Y2.middleCols(b * Kt, Kt) * Xb.adjoint() / static_cast<double>(Kt);
            for (Index u = 0; u < geometry.users(); ++u)
            {
                const Index Ku = geometry.K(u);
                const CMat Qu = Qb.middleCols(geometry.antenna_offset(u), Ku) / std::sqrt(geometry.P(u));
                CMat &YB = out.YB[static_cast<size_t>(u)];
                if (out.resolved[static_cast<size_t>(u)])
                {
                    const CVec v = proj[static_cast<size_t>(u)] * Eigen::Map<const CVec>(Qu.data(), Qu.size());
                    YB.row(b) = v.transpose();
                }
                else
                {
                    const CMat V = proj[static_cast<size_t>(u)] * Qu; // dH x Ku
                    for (Index p = 0; p < dH; ++p)
                        for (Index k = 0; k < Ku; ++k)
                            YB(b, p * Ku + k) = V(p, k);
                }
            }
        }
        return out;
    }

    Stage2Result stage2_solve(const ReducedData &reduced, const Stage1Result &stage1, const SystemGeometry &geometry,
                              const std::vector<Index> &d_G, Stage2Mode mode, const FreqGrid &ris_grid)
    {
        const Manifold man = ris_manifold(geometry.ris, reduced.Psi);
        const Index dH = static_cast<Index>(stage1.w_BH.size());
        const Index U = geometry.users();
        if (static_cast<Index>(d_G.size()) != U)
            throw std::invalid_argument("stage2_solve: one UE path count per user is required");
        Stage2Result r;
        r.terms.resize(static_cast<size_t>(U));

        if (mode == Stage2Mode::General)
        {
            for (Index u = 0; u < U; ++u)
            {
                const CMat &YB = reduced.YB[static_cast<size_t>(u)];
                const Index Ku = geometry.K(u);
                auto &terms = r.terms[static_cast<size_t>(u)];
                if (reduced.resolved[static_cast<size_t>(u)])
                {
                    const auto &wu = stage1.w_UG[static_cast<size_t>(u)];
                    for (Index k = 0; k < YB.cols(); ++k)
                    {
                        const GridFit fit = greedy_grid_fit(YB.col(k), man, ris_grid, 1);
                        PathTerm t;
                        t.l = k / dH;
                        t.p = k % dH;
                        t.w_diff = fit.freqs[0];
                        t.gamma = fit.coef(0, 0);
                        t.ue_coef =
                            t.gamma * steering(wu[static_cast<size_t>(t.l)], geometry.ues[static_cast<size_t>(u)]).conjugate();
                        terms.push_back(t);
                    }
                }
                else
                {
                    const Index dG = d_G[static_cast<size_t>(u)];
                    for (Index p = 0; p < dH; ++p)
                    {
                        const GridFit fit = greedy_grid_fit(YB.middleCols(p * Ku, Ku), man, ris_grid, dG);
                        for (Index l = 0; l < dG; ++l)
                        {
                            PathTerm t;
                            t.l = l;
                            t.p = p;
                            t.w_diff = fit.freqs[static_cast<size_t>(l)];
                            t.ue_coef = fit.coef.row(l).transpose();
                            t.gamma = t.ue_coef(0);
                            terms.push_back(t);
                        }
                    }
                }
            }
            return r;
        }

        for (Index u = 0; u < U; ++u)
            if (geometry.K(u) != 1)
                throw std::invalid_argument("stage2_solve: single-antenna mode needs K_u = 1 for every user");

        GeometricParams &gp = r.params;
        gp.w_BH = stage1.w_BH;
        gp.w_RH.assign(static_cast<size_t>(dH), SpatialFreq());
        gp.gamma_H.assign(static_cast<size_t>(dH), cd(1.0, 0.0));
        std::vector<CVec> v(static_cast<size_t>(U));
        for (Index u = 0; u < U; ++u)
        {
            const Index dG = d_G[static_cast<size_t>(u)];
            const GridFit fit = greedy_grid_fit(reduced.YB[static_cast<size_t>(u)].col(0), man, ris_grid, dG);
            UserPaths up;
            up.w_RG = fit.freqs;
            up.w_UG.assign(static_cast<size_t>(dG), SpatialFreq());
            for (Index l = 0; l < dG; ++l)
                up.gamma_G.push_back(std::conj(fit.coef(l, 0)));
            CVec c(dG);
            for (Index l = 0; l < dG; ++l)
                c(l) = fit.coef(l, 0);
            v[static_cast<size_t>(u)] = steering_matrix(up.w_RG, geometry.ris) * c;
            gp.users.push_back(up);
        }
        if (dH > 1)
        {
            const CMat Pc = reduced.Psi.conjugate();
            const Index rows = reduced.Psi.rows();
            const ArraySpec ris = geometry.ris;
            const Manifold stacked = [&v, Pc, rows, ris, U](const SpatialFreq &w) -> CVec {
                CVec out(rows * U);
                const CVec aR = steering(-w, ris);
                for (Index u = 0; u < U; ++u)
                    out.segment(u * rows, rows) = Pc * v[static_cast<size_t>(u)].cwiseProduct(aR);
                return out;
            };
            for (Index p = 1; p < dH; ++p)
            {
                CVec ys(rows * U);
                for (Index u = 0; u < U; ++u)
                    ys.segment(u * rows, rows) = reduced.YB[static_cast<size_t>(u)].col(p);
                const GridFit fit = greedy_grid_fit(ys, stacked, ris_grid, 1);
                gp.w_RH[static_cast<size_t>(p)] = fit.freqs[0];
                gp.gamma_H[static_cast<size_t>(p)] = fit.coef(0, 0);
            }
        }
        for (Index u = 0; u < U; ++u)
        {
            const UserPaths &up = gp.users[static_cast<size_t>(u)];
            for (Index l = 0; l < up.d_G(); ++l)
                for (Index p = 0; p < dH; ++p)
                {
                    PathTerm t;
                    t.l = l;
                    t.p = p;
                    t.w_diff = up.w_RG[static_cast<size_t>(l)] - gp.w_RH[static_cast<size_t>(p)];
                    t.gamma = std::conj(up.gamma_G[static_cast<size_t>(l)]) * gp.gamma_H[static_cast<size_t>(p)];
                    t.ue_coef = CVec::Constant(1, t.gamma);
                    r.terms[static_cast<size_t>(u)].push_back(t);
                }
        }
        r.separated = true;
        return r;
    }

    CVec reconstruct_composite(const Stage1Result &stage1, const Stage2Result &stage2, const SystemGeometry &geometry)
    {
        const Index M = geometry.M(), N = geometry.N();
        CVec h = CVec::Zero(M * N * geometry.K_total());
        Index off = 0;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const Index len = M * N * geometry.K(u);
            for (const PathTerm &t : stage2.terms[static_cast<size_t>(u)])
            {
                if (t.ue_coef.size() != geometry.K(u))
                    throw std::invalid_argument("reconstruct_composite: UE coefficient length mismatch");
                h.segment(off, len) += kron(steering(t.w_diff, geometry.ris),
                                            kron(t.ue_coef, steering(stage1.w_BH[static_cast<size_t>(t.p)], geometry.bs)));
            }
            off += len;
        }
        return h;
    }

    CMat composite_manifold_full(const GeometricParams &params, const SystemGeometry &geometry)
    {
        params.validate(geometry);
        const Index M = geometry.M(), N = geometry.N(), dH = params.d_H();
        Index cols = 0;
        for (const auto &u : params.users)
            cols += u.d_G() * dH;
        CMat A = CMat::Zero(M * N * geometry.K_total(), cols);
        Index r = 0, c = 0;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const CMat Au = composite_manifold(params, geometry, u);
            A.block(r, c, Au.rows(), Au.cols()) = Au;
            r += Au.rows();
            c += Au.cols();
        }
        return A;
    }

    CVec reconstruct_composite(const GeometricParams &params, const SystemGeometry &geometry)
    {
        const CMat A = composite_manifold_full(params, geometry);
        CVec g(A.cols());
        Index c = 0;
        for (Index u = 0; u < geometry.users(); ++u)
        {
            const CVec gu = composite_gains(params, u);
            g.segment(c, gu.size()) = gu;
            c += gu.size();
        }
        return A * g;
    }

    CVec refit_gains(const CVec &y, const MeasurementOperator &Z, double P, const CMat &A)
    {
        if (A.rows() != Z.cols())
            throw std::invalid_argument("refit_gains: manifold rows do not match the operator");
        CMat ZA(Z.rows(), A.cols());
        for (Index i = 0; i < A.cols(); ++i)
            ZA.col(i) = Z.apply(A.col(i));
        return pinv(ZA, true) * y / std::sqrt(P);
    }

    std::vector<CompositePeak> composite_beamform_peaks(const CVec &y, const MeasurementOperator &Z,
                                                        const SystemGeometry &geometry, const EstimatorGrids &grids,
                                                        Index d)
    {
        if (geometry.users() != 1 || Z.include_direct())
            throw std::invalid_argument("composite_beamform_peaks: single user without direct column only");
        if (!grids.ris.is_product())
            throw std::invalid_argument("composite_beamform_peaks: RIS grid must be a product grid");
        const Index K = geometry.K(0), M = geometry.M(), T = Z.T();
        const FreqGrid ue_grid = K > 1 ? grids.ue : FreqGrid::uniform(1);
        const FreqGrid bs_grid = M > 1 ? grids.bs : FreqGrid::uniform(1);
        const CMat Y = as_sample_matrix(y, M);
        const CMat &A = Z.weights();

        // v_t = a_B^H y_t per BS grid point, A c per (UE, RIS) grid point
        const CMat DB = build_dictionary(geometry.bs, bs_grid);
        const CMat V = Y.transpose() * DB.conjugate(); // T x nb
        const Index nb = bs_grid.size(), nu = ue_grid.size(), nr = grids.ris.size();
        CMat AC(T, nu * nr);
        RVec acn(nu * nr);
        for (Index iu = 0; iu < nu; ++iu)
        {
            const CVec aU = steering(ue_grid.points[static_cast<size_t>(iu)], geometry.ues[0]).conjugate();
            for (Index ir = 0; ir < nr; ++ir)
            {
                const CVec c = kron(steering(grids.ris.points[static_cast<size_t>(ir)], geometry.ris), aU);
                AC.col(iu * nr + ir) = A * c;
                acn(iu * nr + ir) = AC.col(iu * nr + ir).squaredNorm();
            }
        }
        const CMat S = V.adjoint() * AC; // nb x (nu nr): conj(v)^T (A c)
        RVec vals(nb * nu * nr);
        for (Index ib = 0; ib < nb; ++ib)
        {
            const double bn = DB.col(ib).squaredNorm();
            for (Index j = 0; j < nu * nr; ++j)
            {
                const double den = acn(j) * bn;
                vals(ib * nu * nr + j) = den > 0.0 ? std::norm(S(ib, j)) / den : 0.0;
            }
        }
        const auto idx = local_maxima(vals, {nb, nu, grids.ris.res_x, grids.ris.res_y});
        if (static_cast<Index>(idx.size()) < d)
            throw std::runtime_error("composite_beamform_peaks: not enough peaks");
        std::vector<CompositePeak> out;
        for (Index k = 0; k < d; ++k)
        {
            const Index i = idx[static_cast<size_t>(k)];
            CompositePeak p;
            p.w_B = bs_grid.points[static_cast<size_t>(i / (nu * nr))];
            p.w_U = ue_grid.points[static_cast<size_t>((i / nr) % nu)];
            p.w_R = grids.ris.points[static_cast<size_t>(i % nr)];
            p.value = vals(i);
            out.push_back(p);
        }
        return out;
    }

    CVec decoupled_estimate(const CMat &Y1, const CMat &X1, const CMat &Y2, const TrainingPlan &plan2,
                            const SystemGeometry &geometry, Index d_H, const std::vector<Index> &d_G, Stage2Mode mode,
                            const EstimatorGrids &grids)
    {
        const Stage1Result s1 = stage1_angles(Y1, X1, geometry, d_H, d_G, grids);
        const ReducedData red = stage2_reduce(Y2, plan2, s1, geometry);
        const Stage2Result s2 = stage2_solve(red, s1, geometry, d_G, mode, grids.ris);
        return reconstruct_composite(s1, s2, geometry);
    }

} // namespace rischan
