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

#include "rischan/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

namespace rischan
{
    namespace pt = boost::property_tree;

    static std::string join(const std::vector<std::string> &items, const char *sep)
    {
        std::string out;
        for (size_t i = 0; i < items.size(); ++i)
            out += (i ? sep : "") + items[i];
        return out;
    }

    config_error::config_error(std::vector<std::string> problems)
        : std::runtime_error("invalid configuration: " + join(problems, "; ")), problems_(std::move(problems))
    {
    }

    const char *to_string(ChannelModel v) { return v == ChannelModel::Geometric ? "geometric" : "unstructured"; }

    const char *to_string(PlanKind v)
    {
        switch (v)
        {
        case PlanKind::Dft:
            return "dft";
        case PlanKind::Hadamard:
            return "hadamard";
        case PlanKind::OneHot:
            return "one_hot";
        case PlanKind::Random:
            return "random";
        }
        return "?";
    }

    const char *to_string(EstimatorKind v) { return v == EstimatorKind::Lmmse ? "lmmse" : "ls"; }

    const char *to_string(SweepVar v)
    {
        switch (v)
        {
        case SweepVar::Snr:
            return "snr";
        case SweepVar::T:
            return "T";
        case SweepVar::d_H:
            return "d_H";
        case SweepVar::d_G:
            return "d_G";
        case SweepVar::d_F:
            return "d_F";
        case SweepVar::N:
            return "N";
        }
        return "?";
    }

    Index ExperimentConfig::K_total() const
    {
        return std::accumulate(ue_antennas.begin(), ue_antennas.end(), Index(0));
    }

    namespace
    {
        const std::map<std::string, std::set<std::string>> known_keys = {
            {"geometry", {"M", "ris_nx", "ris_ny", "ue_antennas", "bs_spacing", "ris_spacing", "ue_spacing"}},
            {"channel", {"model", "d_H", "d_G", "d_F", "gain_variance"}},
            {"training", {"plan", "T", "include_direct", "snr_db", "noiseless"}},
            {"sweep", {"snr", "T", "d_H", "d_G", "d_F", "N"}},
            {"mc", {"trials", "seed", "estimator"}},
            {"crb", {"realizations"}},
            {"estimation", {"grid", "ris_grid"}},
            {"output", {"path"}},
        };

        std::string trim(const std::string &s)
        {
            const auto b = s.find_first_not_of(" \t\r");
            if (b == std::string::npos)
                return "";
            const auto e = s.find_last_not_of(" \t\r");
            return s.substr(b, e - b + 1);
        }

        std::vector<std::string> split_list(const std::string &s)
        {
            std::vector<std::string> out;
            std::string cur;
            for (char c : s + ",")
            {
                if (c == ',' || c == ' ' || c == '\t')
                {
                    if (!cur.empty())
                        out.push_back(cur);
                    cur.clear();
                }
                else
                    cur += c;
            }
            return out;
        }

        // Typed readers that record a problem instead of throwing
        struct Reader
        {
            const pt::ptree &tree;
            std::vector<std::string> &problems;

            std::optional<std::string> raw(const std::string &section, const std::string &key) const
            {
                const auto sec = tree.get_child_optional(section);
                if (!sec)
                    return std::nullopt;
                const auto v = sec->get_optional<std::string>(key);
                if (!v)
                    return std::nullopt;
                return trim(*v);
            }

            void bad(const std::string &section, const std::string &key, const std::string &value,
                     const std::string &what) const
            {
                problems.push_back("[" + section + "] " + key + " = '" + value + "': " + what);
            }

            template <typename T> bool parse_number(const std::string &s, T &out) const
            {
                const char *b = s.data(), *e = s.data() + s.size();
                if constexpr (std::is_floating_point_v<T>)
                {
                    // from_chars for double is not available everywhere; strtod with a full-consumption check
                    char *end = nullptr;
                    const std::string tmp(s);
                    out = std::strtod(tmp.c_str(), &end);
                    return !tmp.empty() && end == tmp.c_str() + tmp.size() && std::isfinite(out);
                }
                else
                {
                    auto [p, ec] = std::from_chars(b, e, out);
                    return ec == std::errc() && p == e;
                }
            }

            void integer(const std::string &section, const std::string &key, Index &out) const
            {
                if (auto v = raw(section, key))
                {
                    long long x = 0;
                    if (parse_number(*v, x))
                        out = static_cast<Index>(x);
                    else
                        bad(section, key, *v, "expected an integer");
                }
            }

            void real(const std::string &section, const std::string &key, double &out) const
            {
                if (auto v = raw(section, key))
                {
                    double x = 0;
                    if (parse_number(*v, x))
                        out = x;
                    else
                        bad(section, key, *v, "expected a finite number");
                }
            }

            void boolean(const std::string &section, const std::string &key, bool &out) const
            {
                if (auto v = raw(section, key))
                {
                    if (*v == "true" || *v == "1" || *v == "yes")
                        out = true;
                    else if (*v == "false" || *v == "0" || *v == "no")
                        out = false;
                    else
                        bad(section, key, *v, "expected true or false");
                }
            }

            template <typename E>
            void choice(const std::string &section, const std::string &key, const std::map<std::string, E> &opts,
                        E &out) const
            {
                if (auto v = raw(section, key))
                {
                    auto it = opts.find(*v);
                    if (it != opts.end())
                        out = it->second;
                    else
                    {
                        std::vector<std::string> names;
                        for (const auto &o : opts)
                            names.push_back(o.first);
                        bad(section, key, *v, "expected one of " + join(names, ", "));
                    }
                }
            }
        };

        bool is_integral(double v) { return std::floor(v) == v; }

        std::string fmt(double v)
        {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", v);
            return buf;
        }
    } // namespace

    // Syntax and value problems go to `problems`; constraints are left to check_config
    static ExperimentConfig parse_unchecked(const std::string &text, std::vector<std::string> &problems)
    {
        pt::ptree tree;
        try
        {
            std::istringstream in(text);
            pt::ini_parser::read_ini(in, tree);
        }
        catch (const pt::ini_parser_error &e)
        {
            throw config_error({"line " + std::to_string(e.line()) + ": " + e.message()});
        }

        for (const auto &sec : tree)
        {
            if (sec.first == "schema_version" && sec.second.empty())
            {
                if (trim(sec.second.data()) != std::to_string(config_schema_version))
                    problems.push_back("unsupported schema_version '" + sec.second.data() + "'");
                continue;
            }
            auto it = known_keys.find(sec.first);
            if (it == known_keys.end())
            {
                problems.push_back(sec.second.empty() ? "top-level key '" + sec.first + "' outside any section"
                                                      : "unknown section [" + sec.first + "]");
                continue;
            }
            for (const auto &kv : sec.second)
                if (!it->second.count(kv.first))
                    problems.push_back("unknown key '" + kv.first + "' in [" + sec.first + "]");
        }

        ExperimentConfig cfg;
        const Reader r{tree, problems};
        r.integer("geometry", "M", cfg.M);
        r.integer("geometry", "ris_nx", cfg.ris_nx);
        r.integer("geometry", "ris_ny", cfg.ris_ny);
        if (auto v = r.raw("geometry", "ue_antennas"))
        {
            cfg.ue_antennas.clear();
            for (const auto &item : split_list(*v))
            {
                long long x = 0;
                if (r.parse_number(item, x))
                    cfg.ue_antennas.push_back(static_cast<Index>(x));
                else
                    r.bad("geometry", "ue_antennas", *v, "expected a list of integers");
            }
        }
        r.real("geometry", "bs_spacing", cfg.bs_spacing);
        r.real("geometry", "ris_spacing", cfg.ris_spacing);
        r.real("geometry", "ue_spacing", cfg.ue_spacing);

        r.choice<ChannelModel>("channel", "model",
                               {{"unstructured", ChannelModel::Unstructured}, {"geometric", ChannelModel::Geometric}},
                               cfg.model);
        r.integer("channel", "d_H", cfg.d_H);
        r.integer("channel", "d_G", cfg.d_G);
        r.integer("channel", "d_F", cfg.d_F);
        r.choice<GainVariance>("channel", "gain_variance",
                               {{"unit", GainVariance::Unit}, {"inverse_paths", GainVariance::InversePaths}},
                               cfg.gain_rule);

        r.choice<PlanKind>("training", "plan",
                           {{"dft", PlanKind::Dft},
                            {"hadamard", PlanKind::Hadamard},
                            {"one_hot", PlanKind::OneHot},
                            {"random", PlanKind::Random}},
                           cfg.plan);
        r.integer("training", "T", cfg.T);
        r.boolean("training", "include_direct", cfg.include_direct);
        r.real("training", "snr_db", cfg.snr_db);
        r.boolean("training", "noiseless", cfg.noiseless);

        std::vector<std::string> sweep_keys;
        if (auto sec = tree.get_child_optional("sweep"))
            for (const auto &kv : *sec)
                if (known_keys.at("sweep").count(kv.first))
                    sweep_keys.push_back(kv.first);
        if (sweep_keys.empty())
            problems.push_back("[sweep] needs exactly one variable (snr, T, d_H, d_G, d_F or N)");
        else if (sweep_keys.size() > 1)
            problems.push_back("[sweep] has more than one variable: " + join(sweep_keys, ", "));
        else
        {
            const std::string &k = sweep_keys[0];
            const std::map<std::string, SweepVar> vars = {{"snr", SweepVar::Snr}, {"T", SweepVar::T},
                                                          {"d_H", SweepVar::d_H}, {"d_G", SweepVar::d_G},
                                                          {"d_F", SweepVar::d_F}, {"N", SweepVar::N}};
            cfg.sweep_var = vars.at(k);
            const std::string v = *r.raw("sweep", k);
            for (const auto &item : split_list(v))
            {
                double x = 0;
                if (r.parse_number(item, x))
                    cfg.sweep_values.push_back(x);
                else
                    r.bad("sweep", k, v, "expected a list of numbers");
            }
        }

        r.integer("mc", "trials", cfg.trials);
        if (auto v = r.raw("mc", "seed"))
        {
            std::uint64_t s = 0;
            if (r.parse_number(*v, s))
                cfg.seed = s;
            else
                r.bad("mc", "seed", *v, "expected a non-negative 64-bit integer");
        }
        r.choice<EstimatorKind>("mc", "estimator", {{"ls", EstimatorKind::Ls}, {"lmmse", EstimatorKind::Lmmse}},
                                cfg.estimator);
        r.integer("crb", "realizations", cfg.realizations);
        r.integer("estimation", "grid", cfg.grid);
        r.integer("estimation", "ris_grid", cfg.ris_grid);
        if (auto v = r.raw("output", "path"))
            cfg.output = *v;

        return cfg;
    }

    static ExperimentConfig checked(ExperimentConfig cfg, std::vector<std::string> problems)
    {
        if (problems.empty())
            problems = check_config(cfg);
        else
            for (auto &p : check_config(cfg))
                if (std::find(problems.begin(), problems.end(), p) == problems.end())
                    problems.push_back(std::move(p));
        if (!problems.empty())
            throw config_error(problems);
        return cfg;
    }

    ExperimentConfig parse_config(const std::string &text)
    {
        std::vector<std::string> problems;
        ExperimentConfig cfg = parse_unchecked(text, problems);
        return checked(std::move(cfg), std::move(problems));
    }

    ExperimentConfig load_config(const std::string &path, std::optional<std::uint64_t> seed_override)
    {
        std::ifstream in(path);
        if (!in)
            throw config_error({"cannot read " + path});
        std::stringstream ss;
        ss << in.rdbuf();
        std::vector<std::string> problems;
        ExperimentConfig cfg = parse_unchecked(ss.str(), problems);
        if (seed_override)
            cfg.seed = seed_override;
        return checked(std::move(cfg), std::move(problems));
    }

    std::vector<std::string> check_config(const ExperimentConfig &cfg)
    {
        std::vector<std::string> p;
        if (!cfg.seed)
            p.push_back("[mc] seed is required");
        if (cfg.M < 1)
            p.push_back("[geometry] M must be >= 1");
        if (cfg.ris_nx < 1 || cfg.ris_ny < 1)
            p.push_back("[geometry] ris_nx and ris_ny must be >= 1");
        if (cfg.ue_antennas.empty())
            p.push_back("[geometry] ue_antennas needs at least one user");
        for (Index k : cfg.ue_antennas)
            if (k < 1)
                p.push_back("[geometry] every user needs at least one antenna");
        if (!(cfg.bs_spacing > 0 && cfg.ris_spacing > 0 && cfg.ue_spacing > 0))
            p.push_back("[geometry] spacings must be positive");
        if (cfg.d_H < 1 || cfg.d_G < 1 || cfg.d_F < 0)
            p.push_back("[channel] needs d_H >= 1, d_G >= 1, d_F >= 0");
        if (cfg.T < 0)
            p.push_back("[training] T must be >= 0");
        if (cfg.trials < 1)
            p.push_back("[mc] trials must be >= 1");
        if (cfg.realizations < 1)
            p.push_back("[crb] realizations must be >= 1");
        if (cfg.grid < 2 || cfg.ris_grid < 2)
            p.push_back("[estimation] grids need at least 2 points per axis");
        if (cfg.sweep_values.empty())
            p.push_back("[sweep] needs at least one value");

        const bool integral = cfg.sweep_var != SweepVar::Snr;
        for (double v : cfg.sweep_values)
        {
            if (integral && (!is_integral(v) || v < 0))
            {
                p.push_back(std::string("[sweep] ") + to_string(cfg.sweep_var) + " value " + fmt(v) +
                            " is not a non-negative integer");
                continue;
            }
            if (cfg.sweep_var == SweepVar::N && static_cast<Index>(v) % cfg.ris_ny != 0)
            {
                p.push_back("[sweep] N = " + fmt(v) + " is not a multiple of ris_ny = " + std::to_string(cfg.ris_ny));
                continue;
            }
            if (!p.empty())
                continue;
            const ExperimentConfig c = apply_sweep(cfg, v);
            const std::string at = std::string(" (") + to_string(cfg.sweep_var) + " = " + fmt(v) + ")";
            if (c.d_H < 1 || c.d_G < 1 || c.d_F < 0 || c.N() < 1)
            {
                p.push_back("path counts and N must stay positive" + at);
                continue;
            }
            if (c.d_F > 0 && !c.include_direct)
                p.push_back("[channel] d_F > 0 needs [training] include_direct = true" + at);
            try
            {
                const SystemGeometry g = make_geometry(c);
                g.validate();
                Rng rng(0);
                make_plan(c, g, rng).validate(g);
            }
            catch (const std::exception &e)
            {
                p.push_back(std::string(e.what()) + at);
            }
        }
        return p;
    }

    std::string echo_config(const ExperimentConfig &cfg)
    {
        std::ostringstream o;
        o << "schema_version = " << config_schema_version << "\n\n";
        o << "[geometry]\nM = " << cfg.M << "\nris_nx = " << cfg.ris_nx << "\nris_ny = " << cfg.ris_ny
          << "\nue_antennas = ";
        for (size_t i = 0; i < cfg.ue_antennas.size(); ++i)
            o << (i ? ", " : "") << cfg.ue_antennas[i];
        o << "\nbs_spacing = " << fmt(cfg.bs_spacing) << "\nris_spacing = " << fmt(cfg.ris_spacing)
          << "\nue_spacing = " << fmt(cfg.ue_spacing) << "\n\n";
        o << "[channel]\nmodel = " << to_string(cfg.model) << "\nd_H = " << cfg.d_H << "\nd_G = " << cfg.d_G
          << "\nd_F = " << cfg.d_F << "\ngain_variance = "
          << (cfg.gain_rule == GainVariance::Unit ? "unit" : "inverse_paths") << "\n\n";
        o << "[training]\nplan = " << to_string(cfg.plan) << "\nT = " << cfg.T
          << "\ninclude_direct = " << (cfg.include_direct ? "true" : "false") << "\nsnr_db = " << fmt(cfg.snr_db)
          << "\nnoiseless = " << (cfg.noiseless ? "true" : "false") << "\n\n";
        o << "[sweep]\n" << to_string(cfg.sweep_var) << " = ";
        for (size_t i = 0; i < cfg.sweep_values.size(); ++i)
            o << (i ? ", " : "") << fmt(cfg.sweep_values[i]);
        o << "\n\n[mc]\ntrials = " << cfg.trials << "\nseed = " << (cfg.seed ? std::to_string(*cfg.seed) : "")
          << "\nestimator = " << to_string(cfg.estimator) << "\n\n";
        o << "[crb]\nrealizations = " << cfg.realizations << "\n\n";
        o << "[estimation]\ngrid = " << cfg.grid << "\nris_grid = " << cfg.ris_grid << "\n\n";
        o << "[output]\npath = " << cfg.output << "\n";
        return o.str();
    }

    ExperimentConfig apply_sweep(const ExperimentConfig &cfg, double value)
    {
        ExperimentConfig c = cfg;
        const Index iv = static_cast<Index>(std::llround(value));
        switch (cfg.sweep_var)
        {
        case SweepVar::Snr:
            c.snr_db = value;
            break;
        case SweepVar::T:
            c.T = iv;
            break;
        case SweepVar::d_H:
            c.d_H = iv;
            break;
        case SweepVar::d_G:
            c.d_G = iv;
            break;
        case SweepVar::d_F:
            c.d_F = iv;
            break;
        case SweepVar::N:
            c.ris_nx = iv / cfg.ris_ny;
            break;
        }
        return c;
    }

    SystemGeometry make_geometry(const ExperimentConfig &cfg)
    {
        SystemGeometry g;
        g.bs = ArraySpec::ula(cfg.M, cfg.bs_spacing);
        g.ris = cfg.ris_ny == 1 ? ArraySpec::ula(cfg.ris_nx, cfg.ris_spacing)
                                : ArraySpec::ura(cfg.ris_nx, cfg.ris_ny, cfg.ris_spacing, cfg.ris_spacing);
        g.ues.clear();
        for (Index k : cfg.ue_antennas)
            g.ues.push_back(ArraySpec::ula(k, cfg.ue_spacing));
        g.power.assign(cfg.ue_antennas.size(), std::pow(10.0, cfg.snr_db / 10.0));
        g.sigma2 = cfg.noiseless ? 0.0 : 1.0;
        return g;
    }

    TrainingPlan make_plan(const ExperimentConfig &cfg, const SystemGeometry &geometry, Rng &rng)
    {
        const Index K = geometry.K_total(), N = geometry.N();
        const bool direct = cfg.include_direct;
        const Index cols = N + (direct ? 1 : 0);
        Index blocks = cols;
        if (cfg.plan == PlanKind::Hadamard)
            for (blocks = 1; blocks < cols; blocks *= 2)
                ;
        if (cfg.T > 0)
        {
            if (cfg.T % K != 0)
                throw std::invalid_argument("T = " + std::to_string(cfg.T) + " is not a multiple of the " +
                                            std::to_string(K) + " transmit antennas");
            blocks = cfg.T / K;
        }
        CMat Psi;
        switch (cfg.plan)
        {
        case PlanKind::Dft:
            // blocks x cols of the blocks-point DFT; the first column doubles as the direct column when present
            Psi = dft_ris_sequence(blocks, cols - 1);
            break;
        case PlanKind::Hadamard:
            Psi = hadamard_ris_sequence(blocks, cols - 1);
            break;
        case PlanKind::OneHot:
            if (direct)
                throw std::invalid_argument("the one_hot plan cannot carry a direct column");
            if (blocks != N)
                throw std::invalid_argument("the one_hot plan needs T = K N");
            Psi = one_hot_ris_sequence(N, false);
            break;
        case PlanKind::Random:
            Psi = random_phase_sequence(blocks, N, direct, rng);
            break;
        }
        return block_plan(orthogonal_pilots(K), Psi, direct);
    }

} // namespace rischan
