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

#ifndef RISCHAN_CONFIG_HPP
#define RISCHAN_CONFIG_HPP

#include "rischan/training.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace rischan
{
    inline constexpr int config_schema_version = 1;

    // Raised for unreadable or invalid configurations; `problems` lists every violation found
    class config_error : public std::runtime_error
    {
    public:
        explicit config_error(std::vector<std::string> problems);
        const std::vector<std::string> &problems() const { return problems_; }

    private:
        std::vector<std::string> problems_;
    };

    enum class ChannelModel
    {
        Unstructured,
        Geometric
    };

    enum class PlanKind
    {
        Dft,
        Hadamard,
        OneHot,
        Random
    };

    enum class EstimatorKind
    {
        Ls,
        Lmmse
    };

    enum class SweepVar
    {
        Snr,
        T,
        d_H,
        d_G,
        d_F,
        N
    };

    const char *to_string(ChannelModel v);
    const char *to_string(PlanKind v);
    const char *to_string(EstimatorKind v);
    const char *to_string(SweepVar v);

    struct ExperimentConfig
    {
        // [geometry]
        Index M = 4;
        Index ris_nx = 8;
        Index ris_ny = 1; // 1 selects a linear RIS
        std::vector<Index> ue_antennas{1};
        double bs_spacing = 0.5;
        double ris_spacing = 0.5;
        double ue_spacing = 0.5;

        // [channel]
        ChannelModel model = ChannelModel::Unstructured;
        Index d_H = 2;
        Index d_G = 2; // per user
        Index d_F = 0; // per user
        GainVariance gain_rule = GainVariance::Unit;

        // [training]
        PlanKind plan = PlanKind::Dft;
        Index T = 0; // 0: shortest block-repeat plan for the geometry
        bool include_direct = false;
        double snr_db = 10.0; // P / sigma2 with sigma2 = 1
        bool noiseless = false;

        // [sweep]
        SweepVar sweep_var = SweepVar::Snr;
        std::vector<double> sweep_values;

        // [mc]
        Index trials = 100;
        std::optional<std::uint64_t> seed;
        EstimatorKind estimator = EstimatorKind::Ls;

        // [crb]
        Index realizations = 200;

        // [estimation]
        Index grid = default_grid_1d;
        Index ris_grid = default_grid_2d;

        // [output]
        std::string output;

        Index N() const { return ris_nx * ris_ny; }
        Index K_total() const;
    };

    // Parses INI text. Unknown sections or keys, malformed values and constraint violations are all
    // collected into one config_error.
    ExperimentConfig parse_config(const std::string &text);

    // Reads and parses a file; a seed given here overrides the file's
    ExperimentConfig load_config(const std::string &path, std::optional<std::uint64_t> seed_override = std::nullopt);

    // Every constraint violation, empty when the config is valid
    std::vector<std::string> check_config(const ExperimentConfig &cfg);

    // Effective configuration in INI form, including defaults and the schema version
    std::string echo_config(const ExperimentConfig &cfg);

    // Copy of cfg with the sweep variable set to value
    ExperimentConfig apply_sweep(const ExperimentConfig &cfg, double value);

    // Geometry with P = 10^(snr/10) for every user and sigma2 = 1 (0 when noiseless)
    SystemGeometry make_geometry(const ExperimentConfig &cfg);

    // Block-repeat plan with orthogonal pilots over all antennas. Random schedules draw from rng.
    TrainingPlan make_plan(const ExperimentConfig &cfg, const SystemGeometry &geometry, Rng &rng);

} // namespace rischan

#endif
