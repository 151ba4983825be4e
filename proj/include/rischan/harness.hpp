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

#ifndef RISCHAN_HARNESS_HPP
#define RISCHAN_HARNESS_HPP

#include "rischan/config.hpp"

#include <functional>
#include <string>
#include <vector>

namespace rischan
{
    // One CSV row. NaN marks a value that was not computed or had no successful realization.
    struct ResultRow
    {
        std::string sweep_var;
        double value = 0.0;
        std::string model;
        double mean_diag_db = 0.0;
        double mse_db = 0.0;
        Index realizations = 0; // successful realizations or trials
        Index skipped = 0;
    };

    inline constexpr const char *csv_header = "sweep_var,value,model,mean_diag_db,mse_db,realizations,skipped";

    // Runs body(i) for i in [0, count) on up to `threads` workers. Each index is processed exactly once.
    void parallel_for(Index count, unsigned threads, const std::function<void(Index)> &body);

    // Per sweep value: `realizations` random draws of the channel (and of a random schedule), averaging the
    // mean CRB diagonal in linear scale. Geometric configs add a "structured" row next to "unstructured".
    // Draws with a singular FIM are skipped and counted.
    std::vector<ResultRow> run_crb_sweep(const ExperimentConfig &cfg, unsigned threads = 1);

    // Per sweep value: `trials` simulated trainings with LS or LMMSE estimation. mse_db is the per real
    // component error 10 log10(sum ||h_hat - h||^2 / (2 trials dim)); mean_diag_db is the mean unstructured
    // CRB diagonal over the same draws. Trials that fail identifiability are skipped and counted.
    std::vector<ResultRow> run_mc_mse(const ExperimentConfig &cfg, unsigned threads = 1);

    // CSV text with header; floats with 17 significant digits, "nan" for missing values
    std::string format_csv(const std::vector<ResultRow> &rows);

    // True when some row has no successful realization
    bool all_skipped_somewhere(const std::vector<ResultRow> &rows);

    // JSON dump of one synthesized channel and training plan at the first sweep value
    std::string synth_dump(const ExperimentConfig &cfg);

} // namespace rischan

#endif
