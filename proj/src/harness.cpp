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

#include "rischan/harness.hpp"

#include "rischan/crb.hpp"
#include "rischan/unstructured.hpp"

#include <json.hpp>

#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <limits>
#include <mutex>
#include <thread>

namespace rischan
{
    void parallel_for(Index count, unsigned threads, const std::function<void(Index)> &body)
    {
        if (count <= 0)
            return;
        const unsigned n = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(count)));
        if (n == 1)
        {
            for (Index i = 0; i < count; ++i)
                body(i);
            return;
        }
        std::atomic<Index> next{0};
        std::exception_ptr failure;
        std::mutex failure_mutex;
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < n; ++w)
            pool.emplace_back([&] {
                for (Index i = next++; i < count; i = next++)
                {
                    try
                    {
                        body(i);
                    }
                    catch (...)
                    {
                        std::lock_guard<std::mutex> lock(failure_mutex);
                        if (!failure)
                            failure = std::current_exception();
                    }
                }
            });
        for (auto &t : pool)
            t.join();
        if (failure)
            std::rethrow_exception(failure);
    }

    namespace
    {
        constexpr double nan = std::numeric_limits<double>::quiet_NaN();

        double to_db(double sum, Index count)
        {
            return count > 0 ? 10.0 * std::log10(sum / static_cast<double>(count)) : nan;
        }

        std::vector<Index> per_user(const ExperimentConfig &c, Index v)
        {
            return std::vector<Index>(c.ue_antennas.size(), v);
        }

        GeometricParams draw_params(const ExperimentConfig &c, const SystemGeometry &g, Rng &rng)
        {
            return random_geometric(g, c.d_H, per_user(c, c.d_G), per_user(c, c.include_direct ? c.d_F : 0), c.gain_rule,
                                    rng);
        }

        CorrelationModel iid_prior(const ExperimentConfig &c, const SystemGeometry &g)
        {
            return CorrelationModel::uncorrelated(g.M(), g.K_total(), g.N(), c.include_direct ? 1.0 : 0.0, 1.0, 1.0);
        }

        std::uint64_t seed_of(const ExperimentConfig &cfg)
        {
            if (!cfg.seed)
                throw config_error({"[mc] seed is required"});
            return *cfg.seed;
        }

        struct CrbDraw
        {
            bool ok_u = false, ok_s = false;
            double u = 0.0, s = 0.0;
        };

        struct MseDraw
        {
            bool ok = false;
            double err = 0.0, crb = 0.0;
        };
    } // namespace

    std::vector<ResultRow> run_crb_sweep(const ExperimentConfig &cfg, unsigned threads)
    {
        const std::uint64_t seed = seed_of(cfg);
        if (cfg.noiseless)
            throw config_error({"[training] noiseless = true leaves the CRB undefined"});
        const bool geometric = cfg.model == ChannelModel::Geometric;
        std::vector<ResultRow> rows;
        for (size_t si = 0; si < cfg.sweep_values.size(); ++si)
        {
            const double value = cfg.sweep_values[si];
            const ExperimentConfig c = apply_sweep(cfg, value);
            const SystemGeometry g = make_geometry(c);
            // Without random draws every realization gives the same bound
            const Index count = geometric || c.plan == PlanKind::Random ? c.realizations : 1;
            std::vector<CrbDraw> draws(static_cast<size_t>(count));
            parallel_for(count, threads, [&](Index r) {
                Rng rng = derive_rng(seed, si, static_cast<std::uint64_t>(r));
                CrbDraw &d = draws[static_cast<size_t>(r)];
                GeometricParams params;
                if (geometric)
                    params = draw_params(c, g, rng);
                const TrainingPlan plan = make_plan(c, g, rng);
                try
                {
                    const MeasurementOperator Z(plan, g);
                    d.u = crb_unstructured(Z, g.P(0), g.sigma2, false).mean_diag;
                    d.ok_u = true;
                }
                catch (const identifiability_error &)
                {
                }
                if (geometric)
                {
                    const CrbReport s = crb_structured(params, plan, g, false);
                    if (!s.ill_conditioned)
                    {
                        d.s = s.mean_diag;
                        d.ok_s = true;
                    }
                }
            });
            ResultRow ru{to_string(cfg.sweep_var), value, "unstructured", nan, nan, 0, 0};
            ResultRow rs{to_string(cfg.sweep_var), value, "structured", nan, nan, 0, 0};
            double su = 0.0, ss = 0.0;
            for (const CrbDraw &d : draws)
            {
                if (d.ok_u)
                {
                    su += d.u;
                    ++ru.realizations;
                }
                else
                    ++ru.skipped;
                if (d.ok_s)
                {
                    ss += d.s;
                    ++rs.realizations;
                }
                else
                    ++rs.skipped;
            }
            ru.mean_diag_db = to_db(su, ru.realizations);
            rs.mean_diag_db = to_db(ss, rs.realizations);
            rows.push_back(ru);
            if (geometric)
                rows.push_back(rs);
        }
        return rows;
    }

    std::vector<ResultRow> run_mc_mse(const ExperimentConfig &cfg, unsigned threads)
    {
        const std::uint64_t seed = seed_of(cfg);
        const bool geometric = cfg.model == ChannelModel::Geometric;
        std::vector<ResultRow> rows;
        for (size_t si = 0; si < cfg.sweep_values.size(); ++si)
        {
            const double value = cfg.sweep_values[si];
            const ExperimentConfig c = apply_sweep(cfg, value);
            const SystemGeometry g = make_geometry(c);
            const double P = g.P(0);
            const CorrelationModel corr = iid_prior(c, g);
            std::vector<MseDraw> draws(static_cast<size_t>(c.trials));
            Index dim = 0;
            std::once_flag dim_once;
            parallel_for(c.trials, threads, [&](Index r) {
                Rng rng = derive_rng(seed, si, static_cast<std::uint64_t>(r));
                MseDraw &d = draws[static_cast<size_t>(r)];
                const ChannelSet ch = geometric ? synth_geometric(draw_params(c, g, rng), g) : synth_unstructured(corr, g, rng);
                const TrainingPlan plan = make_plan(c, g, rng);
                const CVec h = composite_vector(ch, c.include_direct);
                std::call_once(dim_once, [&] { dim = h.size(); });
                const CVec y = simulate_uplink(ch, plan, g, rng);
                const MeasurementOperator Z(plan, g);
                try
                {
                    CVec h_hat;
                    if (c.estimator == EstimatorKind::Ls)
                        h_hat = ls_estimate(y, Z, P, g.sigma2, false).h_hat;
                    else
                    {
                        const CMat R = geometric ? CMat(CMat::Identity(h.size(), h.size()))
                                                 : composite_covariance(corr, g, c.include_direct);
                        h_hat = lmmse_estimate(y, Z, R, P, g.sigma2).h_hat;
                    }
                    d.err = (h_hat - h).squaredNorm();
                    d.crb = g.sigma2 > 0.0 ? crb_unstructured(Z, P, g.sigma2, false).mean_diag : 0.0;
                    d.ok = true;
                }
                catch (const identifiability_error &)
                {
                }
            });
            ResultRow row{to_string(cfg.sweep_var), value, to_string(c.estimator), nan, nan, 0, 0};
            double err = 0.0, crb = 0.0;
            for (const MseDraw &d : draws)
            {
                if (!d.ok)
                {
                    ++row.skipped;
                    continue;
                }
                err += d.err;
                crb += d.crb;
                ++row.realizations;
            }
            if (row.realizations > 0)
            {
                row.mse_db = 10.0 * std::log10(err / (2.0 * static_cast<double>(row.realizations * dim)));
                if (g.sigma2 > 0.0)
                    row.mean_diag_db = to_db(crb, row.realizations);
            }
            rows.push_back(row);
        }
        return rows;
    }

    static std::string num(double v)
    {
        if (std::isnan(v))
            return "nan";
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return buf;
    }

    std::string format_csv(const std::vector<ResultRow> &rows)
    {
        std::string out = std::string(csv_header) + "\n";
        for (const ResultRow &r : rows)
            out += r.sweep_var + "," + num(r.value) + "," + r.model + "," + num(r.mean_diag_db) + "," + num(r.mse_db) +
                   "," + std::to_string(r.realizations) + "," + std::to_string(r.skipped) + "\n";
        return out;
    }

    bool all_skipped_somewhere(const std::vector<ResultRow> &rows)
    {
        for (const ResultRow &r : rows)
            if (r.realizations == 0)
                return true;
        return false;
    }

    namespace
    {
        using nlohmann::json;

        json to_json(const CMat &A)
        {
            json re = json::array(), im = json::array();
            for (Index i = 0; i < A.rows(); ++i)
            {
                json rr = json::array(), ri = json::array();
                for (Index j = 0; j < A.cols(); ++j)
                {
                    rr.push_back(A(i, j).real());
                    ri.push_back(A(i, j).imag());
                }
                re.push_back(rr);
                im.push_back(ri);
            }
            return {{"re", re}, {"im", im}};
        }

        json to_json(const std::vector<SpatialFreq> &w)
        {
            json out = json::array();
            for (const auto &x : w)
                out.push_back({x.w1, x.w2});
            return out;
        }

        json to_json(const std::vector<cd> &g)
        {
            json out = json::array();
            for (const auto &x : g)
                out.push_back({x.real(), x.imag()});
            return out;
        }
    } // namespace

    std::string synth_dump(const ExperimentConfig &cfg)
    {
        const std::uint64_t seed = seed_of(cfg);
        const ExperimentConfig c = cfg.sweep_values.empty() ? cfg : apply_sweep(cfg, cfg.sweep_values[0]);
        const SystemGeometry g = make_geometry(c);
        Rng rng = derive_rng(seed, 0, 0);
        json out;
        out["config"] = echo_config(c);
        out["geometry"] = {{"M", g.M()},
                           {"ris", {g.ris.count_x, g.ris.count_y}},
                           {"ue_antennas", c.ue_antennas},
                           {"power", g.power},
                           {"sigma2", g.sigma2}};
        ChannelSet ch;
        if (c.model == ChannelModel::Geometric)
        {
            const GeometricParams p = draw_params(c, g, rng);
            json users = json::array();
            for (const auto &u : p.users)
                users.push_back({{"w_RG", to_json(u.w_RG)},
                                 {"w_UG", to_json(u.w_UG)},
                                 {"gamma_G", to_json(u.gamma_G)},
                                 {"w_BF", to_json(u.w_BF)},
                                 {"w_UF", to_json(u.w_UF)},
                                 {"gamma_F", to_json(u.gamma_F)}});
            out["params"] = {{"w_BH", to_json(p.w_BH)},
                             {"w_RH", to_json(p.w_RH)},
                             {"gamma_H", to_json(p.gamma_H)},
                             {"users", users}};
            ch = synth_geometric(p, g);
        }
        else
            ch = synth_unstructured(iid_prior(c, g), g, rng);
        const TrainingPlan plan = make_plan(c, g, rng);
        json G = json::array(), Hd = json::array();
        for (const auto &m : ch.G)
            G.push_back(to_json(m));
        for (const auto &m : ch.Hd)
            Hd.push_back(to_json(m));
        out["channels"] = {{"H", to_json(ch.H)}, {"G", G}, {"Hd", Hd}};
        out["plan"] = {{"T", plan.T},
                       {"protocol", plan.protocol == Protocol::BlockRepeat ? "block_repeat" : "per_sample"},
                       {"include_direct", plan.include_direct},
                       {"X", to_json(plan.X)},
                       {"Psi", to_json(plan.Psi)}};
        return out.dump(1) + "\n";
    }

} // namespace rischan
