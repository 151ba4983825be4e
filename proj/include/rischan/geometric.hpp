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

#ifndef RISCHAN_GEOMETRIC_HPP
#define RISCHAN_GEOMETRIC_HPP

#include "rischan/training.hpp"

#include <functional>
#include <vector>

namespace rischan
{
    // Maps a spatial frequency to a model column (steering vector or a linear image of one)
    using Manifold = std::function<CVec(const SpatialFreq &)>;

    // Plain array steering vectors
    Manifold array_manifold(const ArraySpec &spec);

    // conj(Psi) a_R(w): RIS response seen through the reflection schedule (Psi without direct column)
    Manifold ris_manifold(const ArraySpec &ris, const CMat &Psi);

    struct AoaProblem
    {
        CMat data; // M' x n snapshots
        Manifold manifold;
        Index d = 1;
    };

    // (1/n) Y Y^H
    CMat sample_covariance(const CMat &Y);

    // a^H R a / ||a||^2 over the grid, R = sample covariance of the data
    RVec beamform_spectrum(const AoaProblem &problem, const FreqGrid &grid);

    // The d largest strict local maxima of the beamforming spectrum (circular grid neighbours), descending,
    // ties to the lower grid index. Throws std::runtime_error when fewer than d maxima exist.
    std::vector<SpatialFreq> beamform_peaks(const AoaProblem &problem, const FreqGrid &grid);

    // Indices of strict local maxima of values laid out on a product grid with the given axis sizes
    // (last axis fastest, all axes circular), sorted by descending value then ascending index
    std::vector<Index> local_maxima(const RVec &values, const std::vector<Index> &dims);

    // trace(P_A^perp R_Y) with R_Y = Y Y^H / n; equals y^H P^perp y for a single snapshot.
    // Throws identifiability_error when A is rank deficient.
    double dml_objective(const CMat &Y, const CMat &A);

    // Offset within +/- one grid cell (golden-section per axis, 64 iterations) maximizing
    // ||P^perp a(w)^H Y||^2 / ||P^perp a(w)||^2, where P^perp removes the columns of `others`.
    // Returns a zero offset when no offset improves on the coarse point.
    SpatialFreq refine_rotation(const CMat &Y, const SpatialFreq &coarse, const Manifold &manifold,
                                const FreqGrid &grid, const CMat &others = CMat());

    struct GridFit
    {
        std::vector<SpatialFreq> freqs;
        CMat coef; // d x n least-squares coefficients
    };

    // Greedy grid matching: pick the best atom against the current residual projection, then re-refine
    // every chosen atom against the others (at most `polish_sweeps` passes, stopping once nothing moves);
    // repeat d times
    GridFit greedy_grid_fit(const CMat &Y, const Manifold &manifold, const FreqGrid &grid, Index d,
                            int polish_sweeps = 50);

    struct EstimatorGrids
    {
        FreqGrid bs;
        FreqGrid ue;
        FreqGrid ris;

        // Default grids: 256 points for linear arrays, 64 x 64 for a rectangular RIS
        static EstimatorGrids defaults(const SystemGeometry &geometry, Index res_1d = default_grid_1d,
                                       Index res_ris = default_grid_2d);
    };

    struct Stage1Result
    {
        std::vector<SpatialFreq> w_BH;
        std::vector<std::vector<SpatialFreq>> w_UG; // per user; empty when not resolved
        std::vector<bool> ue_resolved;              // K_u > d_G,u
    };

    // BS angles from Y1 (M x T1); UE angles per user from the block rows of X1 Y1^H / (T1 sqrt(P)).
    // Users with K_u <= d_G,u keep the UE side unresolved.
    Stage1Result stage1_angles(const CMat &Y1, const CMat &X1, const SystemGeometry &geometry, Index d_H,
                               const std::vector<Index> &d_G, const EstimatorGrids &grids);

    // Reduced stage-2 data, one matrix per user with one row per RIS block.
    // Resolved users: column l * d_H + p ~ gamma_{lp} conj(Psi) a_R(w_RG,l - w_RH,p).
    // Unresolved users: column p * K_u + k holds BS path p seen at UE antenna k.
    struct ReducedData
    {
        std::vector<CMat> YB;
        std::vector<bool> resolved;
        CMat Psi;
    };

    // Block-repeat plan without direct column and with orthogonal pilot blocks. Each block's data is
    // decorrelated with its pilots and projected on the stage-1 BS (and UE) factors.
    ReducedData stage2_reduce(const CMat &Y2, const TrainingPlan &plan2, const Stage1Result &stage1,
                              const SystemGeometry &geometry);

    enum class Stage2Mode
    {
        General,
        SingleAntennaUe
    };

    struct PathTerm
    {
        SpatialFreq w_diff; // w_RG,l - w_RH,p
        cd gamma;
        CVec ue_coef; // gamma * conj(a_U(w_UG,l)), K_u entries
        Index l = 0;
        Index p = 0;
    };

    struct Stage2Result
    {
        std::vector<std::vector<PathTerm>> terms; // per user
        bool separated = false;
        GeometricParams params; // RIS-side parameters when separated (single-antenna mode)
    };

    // General mode: one single-frequency fit per column (resolved users) or one d_G-sparse joint fit per
    // BS path (unresolved users). Single-antenna mode: d_G-sparse fit of column 0 per user, then d_H - 1
    // single-frequency fits shared by all users, returning separated normalized parameters.
    Stage2Result stage2_solve(const ReducedData &reduced, const Stage1Result &stage1, const SystemGeometry &geometry,
                              const std::vector<Index> &d_G, Stage2Mode mode, const FreqGrid &ris_grid);

    // User-major composite vector (no direct column) assembled from estimated terms
    CVec reconstruct_composite(const Stage1Result &stage1, const Stage2Result &stage2, const SystemGeometry &geometry);

    // Composite vector A(w) gamma from geometric parameters (no direct column)
    CVec reconstruct_composite(const GeometricParams &params, const SystemGeometry &geometry);

    // Block-diagonal composite manifold over all users in user-major coordinates (no direct column)
    CMat composite_manifold_full(const GeometricParams &params, const SystemGeometry &geometry);

    // (Z A)^dagger y / sqrt(P) with frozen angles; throws identifiability_error when Z A is rank deficient
    CVec refit_gains(const CVec &y, const MeasurementOperator &Z, double P, const CMat &A);

    // Peak of the composite-manifold spectrum |(Z a)^H y|^2 / ||Z a||^2 with a = a_R(w_R) (x) conj(a_U(w_U)) (x) a_B(w_B),
    // single user, no direct column
    struct CompositePeak
    {
        SpatialFreq w_B, w_U, w_R;
        double value = 0.0;
    };
    std::vector<CompositePeak> composite_beamform_peaks(const CVec &y, const MeasurementOperator &Z,
                                                        const SystemGeometry &geometry, const EstimatorGrids &grids,
                                                        Index d);

    // Full decoupled pipeline: stage 1 on (Y1, X1), stage 2 on Y2 with plan2, then reconstruction
    CVec decoupled_estimate(const CMat &Y1, const CMat &X1, const CMat &Y2, const TrainingPlan &plan2,
                            const SystemGeometry &geometry, Index d_H, const std::vector<Index> &d_G, Stage2Mode mode,
                            const EstimatorGrids &grids);

} // namespace rischan

#endif
