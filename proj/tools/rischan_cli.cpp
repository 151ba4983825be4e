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

// rischan crb-sweep | mc-mse | synth <config.ini> [--seed S] [--threads N] [--out PATH]
//
// Exit codes: 0 success, 2 configuration error, 3 a sweep point where every realization was skipped,
// 1 any other failure.

#include "rischan/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

namespace
{
    enum ExitCode
    {
        ok = 0,
        failure = 1,
        config_failure = 2,
        all_skipped = 3
    };

    void write_file(const std::string &path, const std::string &text)
    {
        std::ofstream out(path, std::ios::binary);
        if (!out)
            throw std::runtime_error("cannot write " + path);
        out << text;
        if (!out)
            throw std::runtime_error("write failed for " + path);
    }

    // CSV to `path` (stdout when empty) plus the effective config beside it
    void emit(const std::string &path, const std::string &text, const rischan::ExperimentConfig &cfg)
    {
        if (path.empty())
        {
            std::cout << text;
            return;
        }
        write_file(path, text);
        write_file(path + ".config.ini", rischan::echo_config(cfg));
    }
} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Channel estimation and CRB experiments for RIS-aided links"};
    app.require_subcommand(1);

    std::string config_path, out_path;
    std::uint64_t seed = 0;
    unsigned threads = 1;

    auto add_common = [&](CLI::App *sub) {
        sub->add_option("config", config_path, "INI configuration file")->required();
        sub->add_option("--seed", seed, "Seed, overrides [mc] seed");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_path, "Output file, overrides [output] path");
    };
    CLI::App *crb = app.add_subcommand("crb-sweep", "Mean CRB diagonal over a sweep");
    CLI::App *mc = app.add_subcommand("mc-mse", "Monte Carlo estimator MSE over a sweep");
    CLI::App *synth = app.add_subcommand("synth", "Dump one synthesized channel and plan as JSON");
    for (CLI::App *sub : {crb, mc, synth})
        add_common(sub);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? ok : config_failure;
    }

    CLI::App *used = app.get_subcommands().front();
    const bool seed_given = used->count("--seed") > 0;

    try
    {
        rischan::ExperimentConfig cfg =
            rischan::load_config(config_path, seed_given ? std::optional<std::uint64_t>(seed) : std::nullopt);
        if (!out_path.empty())
            cfg.output = out_path;

        if (used == synth)
        {
            emit(cfg.output, rischan::synth_dump(cfg), cfg);
            return ok;
        }
        const auto rows = used == crb ? rischan::run_crb_sweep(cfg, threads) : rischan::run_mc_mse(cfg, threads);
        emit(cfg.output, rischan::format_csv(rows), cfg);
        if (rischan::all_skipped_somewhere(rows))
        {
            std::cerr << "every realization of at least one sweep point was skipped (identifiability)\n";
            return all_skipped;
        }
        return ok;
    }
    catch (const rischan::config_error &e)
    {
        std::cerr << "configuration error:\n";
        for (const auto &p : e.problems())
            std::cerr << "  " << p << "\n";
        return config_failure;
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << "\n";
        return failure;
    }
}
