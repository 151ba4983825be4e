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

#ifndef RISCHAN_CHANNEL_MODELS_HPP
#define RISCHAN_CHANNEL_MODELS_HPP

#include "rischan/array_manifold.hpp"

#include <vector>

namespace rischan
{
    // BS array, RIS array, one array per user, per-user transmit power and the noise variance
    struct SystemGeometry
    {
        ArraySpec bs = ArraySpec::ula(1);
        ArraySpec ris = ArraySpec::ula(1);
        std::vector<ArraySpec> ues{ArraySpec::ula(1)};
        std::vector<double> power{1.0};
        double sigma2 = 1.0;

        Index M() const { return bs.elements(); }
        Index N() const { return ris.elements(); }
        Index users() const { return static_cast<Index>(ues.size()); }
        Index K(Index u) const { return ues[static_cast<size_t>(u)].elements(); }
        Index K_total() const;

        // First global antenna index of user u
        Index antenna_offset(Index u) const;

        double P(Index u) const { return power[static_cast<size_t>(u)]; }

        void validate() const;
    };

    // Paths of one user: UE-RIS channel (G) and optional direct UE-BS channel (F)
    struct UserPaths
    {
        std::vector<SpatialFreq> w_RG;
        std::vector<SpatialFreq> w_UG;
        std::vector<cd> gamma_G;
        std::vector<SpatialFreq> w_BF;
        std::vector<SpatialFreq> w_UF;
        std::vector<cd> gamma_F;

        Index d_G() const { return static_cast<Index>(gamma_G.size()); }
        Index d_F() const { return static_cast<Index>(gamma_F.size()); }
    };

    // Geometric channel parameters. The RIS-BS channel H is shared by all users.
    struct GeometricParams
    {
        std::vector<SpatialFreq> w_BH;
        std::vector<SpatialFreq> w_RH;
        std::vector<cd> gamma_H;
        std::vector<UserPaths> users;

        Index d_H() const { return static_cast<Index>(gamma_H.size()); }
        bool has_direct() const;

        // w_RH[0] = (0,0) and gamma_H[0] = 1 within tol
        bool is_normalized(double tol = 1e-12) const;

        // Throws std::invalid_argument on inconsistent list lengths or a geometry mismatch
        void validate(const SystemGeometry &geometry) const;
    };

    // Realized channel matrices. Hd is empty when there is no direct channel.
    struct ChannelSet
    {
        CMat H;              // M x N
        std::vector<CMat> G; // K_u x N
        std::vector<CMat> Hd; // M x K_u

        bool has_direct() const { return !Hd.empty(); }
    };

    // Spatial correlation matrices for the unstructured model. K-sized matrices span all users' antennas.
    // An empty R_HdB means there is no direct channel.
    struct CorrelationModel
    {
        CMat R_HB, R_HR, R_GU, R_GR, R_HdB, R_HdU;

        // Scaled identities: sigma2_H I, I, sigma2_G I, I and sigma2_Hd I, I (direct omitted if sigma2_Hd <= 0)
        static CorrelationModel uncorrelated(Index M, Index K, Index N, double sigma2_Hd, double sigma2_H,
                                             double sigma2_G);

        bool has_direct() const { return R_HdB.size() > 0; }

        // Throws std::invalid_argument on non-Hermitian or indefinite inputs
        void validate(const SystemGeometry &geometry) const;
    };

    // H = A_B Gamma_H A_R^H, G_u = A_U Gamma_G A_R^H, Hd_u = A_B Gamma_F A_U^H (Hd present when any user has d_F > 0)
    ChannelSet synth_geometric(const GeometricParams &params, const SystemGeometry &geometry);

    // Row-stacked per-user composite channels [h_d, G_u^* <> H], each block M K_u x (N + 1) (x N without direct).
    // A missing direct channel gives a zero leading column when include_direct is set.
    CMat composite_channel(const ChannelSet &channels, bool include_direct);

    // User-major vectorization [vec(Hc^1); vec(Hc^2); ...]
    CVec composite_vector(const ChannelSet &channels, bool include_direct);

    // Colored Gaussian draws H = R_HB^{1/2} W R_HR^{1/2}, G = R_GU^{1/2} W R_GR^{1/2}, Hd = R_HdB^{1/2} W R_HdU^{1/2}
    ChannelSet synth_unstructured(const CorrelationModel &corr, const SystemGeometry &geometry, Rng &rng);

    // Covariance of composite_vector: blkdiag(R_HdU^T (x) R_HdB, (R_GR . R_HR^T) (x) R_GU^T (x) R_HB),
    // permuted to user-major order for multiple users
    CMat composite_covariance(const CorrelationModel &corr, const SystemGeometry &geometry, bool include_direct);

    // Removes the RIS shift and gain ambiguities: w_RH[0] = (0,0), gamma_H[0] = 1
    GeometricParams normalize_identifiability(const GeometricParams &params);

    // Hc (I_{N/J} (x) 1_J); input excludes the direct column
    CMat group_channel(const CMat &Hc, Index group_size);

    // Per-path composite columns a_R(w_RG,l - w_RH,p) (x) a_U^*(w_UG,l) (x) a_B(w_BH,p) of user u,
    // column index l * d_H + p
    CMat composite_manifold(const GeometricParams &params, const SystemGeometry &geometry, Index u);

    // conj(gamma_G) (x) gamma_H of user u
    CVec composite_gains(const GeometricParams &params, Index u);

    // Gain-variance rule for random draws
    enum class GainVariance
    {
        Unit,         // CN(0, 1) per path
        InversePaths  // CN(0, 1/d) per path
    };

    // Random geometric parameters: azimuth U[-90, 90], elevation U[0, 90] per path endpoint,
    // Gaussian gains; returned normalized
    GeometricParams random_geometric(const SystemGeometry &geometry, Index d_H, const std::vector<Index> &d_G,
                                     const std::vector<Index> &d_F, GainVariance rule, Rng &rng);

} // namespace rischan

#endif
