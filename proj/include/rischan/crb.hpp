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

#ifndef RISCHAN_CRB_HPP
#define RISCHAN_CRB_HPP

#include "rischan/training.hpp"

#include <string>
#include <vector>

namespace rischan
{
    // Real parameter vector layout. Order: w_BH, gamma_H (Re, Im per path), w_RH, then per user
    // w_RG, gamma_G, w_UG, w_BF, gamma_F, w_UF. Normalized layouts omit w_RH[0] and gamma_H[0].
    // RIS frequencies take 2 entries per path for a URA and 1 for a ULA. BS (UE) frequencies are dropped
    // for a single-antenna BS (UE), where they do not affect the channel.
    struct EtaSegment
    {
        std::string name;
        Index user = -1; // -1 for the shared RIS-BS channel
        Index offset = 0;
        Index length = 0;
    };

    struct EtaLayout
    {
        Index d_H = 0;
        std::vector<Index> d_G, d_F;
        int ris_dims = 2;
        bool bs_freqs = true;
        std::vector<bool> ue_freqs;
        bool free_reference = false;
        std::vector<EtaSegment> segments;
        Index size = 0;

        static EtaLayout make(const GeometricParams &params, const SystemGeometry &geometry,
                              bool free_reference = false);

        const EtaSegment &segment(const std::string &name, Index user = -1) const;
    };

    // Flatten normalized parameters; throws std::invalid_argument for un-normalized input unless the layout
    // keeps the reference path free
    RVec pack_eta(const GeometricParams &params, const EtaLayout &layout);

    // Inverse of pack_eta; reference path fixed to w_RH[0] = 0, gamma_H[0] = 1 for normalized layouts
    GeometricParams unpack_eta(const RVec &eta, const EtaLayout &layout);

    // Noise-free received samples, stacked over t: sum_u sqrt(P_u) (F_u + H Phi_t G_u^H) x_{t,u}
    CVec noiseless_mean(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry);

    // d[Re mu; Im mu] / d eta, 2 M T x |eta|, from analytic steering derivatives through the channel matrices
    RMat mean_jacobian(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry,
                       const EtaLayout &layout);

    // d[Re h_c; Im h_c] / d eta for the user-major composite vector (direct column included when requested)
    RMat channel_jacobian(const GeometricParams &params, const SystemGeometry &geometry, const EtaLayout &layout,
                          bool include_direct);

    // Mean Jacobian for the unstructured parameters [Re h_c; Im h_c]: sqrt(P) [Re Z, -Im Z; Im Z, Re Z]
    RMat unstructured_mean_jacobian(const MeasurementOperator &Z, double P);

    // (2 / sigma2) J^T J
    RMat fim_from_jacobian(const RMat &J, double sigma2);

    struct CrbReport
    {
        RMat matrix; // empty when only the diagonal was requested
        RVec diagonal;
        double mean_diag = 0.0;
        double mean_diag_db = 0.0; // 10 log10(mean_diag)
        bool ill_conditioned = false;
        double condition = 1.0;
        std::vector<Index> null_params; // parameters with weight in the FIM null space
    };

    // (sigma2 / 2P) (Zr^T Zr)^{-1} with Zr the real block form of Z; throws identifiability_error when singular
    CrbReport crb_unstructured(const MeasurementOperator &Z, double P, double sigma2, bool full_matrix = true);

    // J_h FIM^{-1} J_h^T. A FIM with condition number above 1e12 is pseudo-inverted and flagged.
    CrbReport crb_structured(const GeometricParams &params, const TrainingPlan &plan, const SystemGeometry &geometry,
                             bool full_matrix = true, bool free_reference = false);

    // Parameter-space CRB FIM^{-1} for eta with the same conditioning rules
    CrbReport crb_eta(const RMat &fim);

} // namespace rischan

#endif
