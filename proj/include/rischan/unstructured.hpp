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

#ifndef RISCHAN_UNSTRUCTURED_HPP
#define RISCHAN_UNSTRUCTURED_HPP

#include "rischan/training.hpp"

#include <vector>

namespace rischan
{
    struct LsResult
    {
        CVec h_hat;
        CMat covariance; // (sigma2 / P) (Z^H Z)^{-1}; empty unless requested
    };

    struct LmmseResult
    {
        CVec h_hat;
        CMat error_cov;
    };

    // h = (Z^H Z)^{-1} Z^H y / sqrt(P). Throws identifiability_error when Z^H Z is singular or its
    // condition number exceeds 1e12.
    LsResult ls_estimate(const CVec &y, const MeasurementOperator &Z, double P, double sigma2,
                         bool with_covariance = true);

    // Block-averaged LS for the block-repeat protocol: y_b = vec(Y_b X^H) / (K sqrt(P)), Hc = [y_b] Psi (Psi^H Psi)^{-1}.
    // Requires X X^H = K I and Psi^H Psi proportional to I. Returns the MK x columns composite matrix.
    CMat subblock_ls(const std::vector<CMat> &Y_blocks, const CMat &X, const CMat &Psi, double P);

    // sqrt(P) R Z^H (P Z R Z^H + sigma2 I)^{-1} y with error covariance R - P R Z^H (P Z R Z^H + sigma2 I)^{-1} Z R.
    // Plans with Z^H Z = c I use R (R + sigma2 / (P c) I)^{-1} h_LS.
    LmmseResult lmmse_estimate(const CVec &y, const MeasurementOperator &Z, const CMat &R, double P, double sigma2);

    // LMMSE with prior U U^H through the r x r matrix W = U^H Z^H Z U
    CVec lowrank_lmmse(const CVec &y, const MeasurementOperator &Z, const CMat &U, double P, double sigma2);

    // Training for the shared-channel two-step scheme (all UE antennas treated as single-antenna transmitters)
    struct TwoStepPlans
    {
        TrainingPlan step1; // only antenna 0 transmits, direct column included
        TrainingPlan step2; // antenna 0 silent, random pilots and RIS phases
    };

    // T1 >= N + 1 (DFT schedule), T2 >= (K - 1)(N / M + 1) with random pilots and RIS phases
    TwoStepPlans two_step_plans(Index M, Index N, Index K, Index T1, Index T2, Rng &rng);

    // Minimum total training length (N + 1) + ceil((K - 1)(N + M) / M)
    Index two_step_min_training(Index M, Index N, Index K);

    struct TwoStepResult
    {
        CMat H_tilde; // M x N, H diag(conj(g_1))
        CMat G_tilde; // K x N, row k = g_k / g_1 (row 0 all ones)
        CMat Hd;      // M x K
        CMat Hc;      // MK x (N + 1) composite channel rebuilt from the above
    };

    // Step 1: LS on y1 for H diag(conj(g_1)) and h_d,1. Step 2: stacked LS on y2 for the other antennas'
    // direct channels and relative RIS gains.
    TwoStepResult two_step_common(const CVec &y1, const CVec &y2, const TwoStepPlans &plans, Index M, Index N, Index K,
                                  double P);

} // namespace rischan

#endif
