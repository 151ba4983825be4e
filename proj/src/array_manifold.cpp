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

#include "rischan/array_manifold.hpp"

#include <algorithm>
#include <cmath>

namespace rischan
{
    ArraySpec ArraySpec::ula(Index count, double spacing)
    {
        ArraySpec s;
        s.kind = ArrayKind::ULA;
        s.count_x = count;
        s.count_y = 1;
        s.spacing_x = spacing;
        s.spacing_y = spacing;
        s.validate();
        return s;
    }

    ArraySpec ArraySpec::ura(Index count_x, Index count_y, double spacing_x, double spacing_y)
    {
        ArraySpec s;
        s.kind = ArrayKind::URA;
        s.count_x = count_x;
        s.count_y = count_y;
        s.spacing_x = spacing_x;
        s.spacing_y = spacing_y;
        s.validate();
        return s;
    }

    void ArraySpec::validate() const
    {
        if (count_x < 1 || count_y < 1)
            throw std::invalid_argument("array element counts must be >= 1");
        if (kind == ArrayKind::ULA && count_y != 1)
            throw std::invalid_argument("a ULA has count_y = 1");
        if (!(spacing_x > 0.0) || (kind == ArrayKind::URA && !(spacing_y > 0.0)))
            throw std::invalid_argument("array spacings must be positive");
    }

    double freq_distance(const SpatialFreq &a, const SpatialFreq &b)
    {
        return std::max(std::abs(wrap_phase(a.w1 - b.w1)), std::abs(wrap_phase(a.w2 - b.w2)));
    }

    CVec ula_steering(const SpatialFreq &w, Index count)
    {
        if (count < 1)
            throw std::invalid_argument("ula_steering: count must be >= 1");
        CVec a(count);
        for (Index m = 0; m < count; ++m)
            a(m) = std::polar(1.0, static_cast<double>(m) * w.w1);
        return a;
    }

    CVec ura_steering(const SpatialFreq &w, const ArraySpec &spec)
    {
        if (spec.kind != ArrayKind::URA)
            throw std::invalid_argument("ura_steering: spec is not a URA");
        return kron(ula_steering(SpatialFreq(w.w1), spec.count_x), ula_steering(SpatialFreq(w.w2), spec.count_y));
    }

    CVec steering(const SpatialFreq &w, const ArraySpec &spec)
    {
        if (spec.kind == ArrayKind::URA)
            return ura_steering(w, spec);
        return ula_steering(w, spec.count_x);
    }

    CMat steering_matrix(const std::vector<SpatialFreq> &w, const ArraySpec &spec)
    {
        CMat A(spec.elements(), static_cast<Index>(w.size()));
        for (size_t i = 0; i < w.size(); ++i)
            A.col(static_cast<Index>(i)) = steering(w[i], spec);
        return A;
    }

    CVec steering_derivative(const SpatialFreq &w, const ArraySpec &spec, int axis)
    {
        CVec a = steering(w, spec);
        if (axis == 1 && spec.kind != ArrayKind::URA)
            return CVec::Zero(a.size());
        for (Index i = 0; i < a.size(); ++i)
        {
            const Index idx = spec.kind == ArrayKind::URA ? (axis == 0 ? i / spec.count_y : i % spec.count_y) : i;
            a(i) *= j1 * static_cast<double>(idx);
        }
        return a;
    }

    SpatialFreq freq_from_angles(double azimuth_deg, double elevation_deg, const ArraySpec &spec)
    {
        if (!(azimuth_deg >= -90.0 && azimuth_deg <= 90.0))
            throw std::invalid_argument("azimuth must lie in [-90, 90] degrees");
        if (!(elevation_deg >= 0.0 && elevation_deg <= 90.0))
            throw std::invalid_argument("elevation must lie in [0, 90] degrees");
        const double az = azimuth_deg * pi / 180.0;
        const double el = elevation_deg * pi / 180.0;
        const double w1 = 2.0 * pi * spec.spacing_x * std::sin(az);
        if (spec.kind == ArrayKind::ULA)
            return SpatialFreq(w1, 0.0);
        return SpatialFreq(w1, 2.0 * pi * spec.spacing_y * std::sin(el) * std::cos(az));
    }

    static double axis_point(Index i, Index n)
    {
        return -pi + 2.0 * pi * static_cast<double>(i + 1) / static_cast<double>(n);
    }

    FreqGrid FreqGrid::uniform(Index res_x, Index res_y)
    {
        if (res_x < 1 || res_y < 1)
            throw std::invalid_argument("grid resolution must be >= 1");
        FreqGrid g;
        g.res_x = res_x;
        g.res_y = res_y;
        g.points.reserve(static_cast<size_t>(res_x * res_y));
        for (Index ix = 0; ix < res_x; ++ix)
            for (Index iy = 0; iy < res_y; ++iy)
            {
                SpatialFreq w;
                w.w1 = axis_point(ix, res_x); // already in (-pi, pi]
                w.w2 = res_y == 1 ? 0.0 : axis_point(iy, res_y);
                g.points.push_back(w);
            }
        return g;
    }

    FreqGrid FreqGrid::from_points(std::vector<SpatialFreq> pts)
    {
        FreqGrid g;
        g.points = std::move(pts);
        g.res_x = g.size();
        g.res_y = 1;
        g.validate();
        return g;
    }

    double FreqGrid::cell(int axis) const
    {
        const Index n = axis == 0 ? res_x : res_y;
        return 2.0 * pi / static_cast<double>(std::max<Index>(n, 1));
    }

    void FreqGrid::validate() const
    {
        if (points.empty())
            throw std::invalid_argument("frequency grid is empty");
        for (size_t i = 1; i < points.size(); ++i)
            if (!(points[i - 1] < points[i]))
                throw std::invalid_argument("frequency grid points must be strictly increasing");
    }

    FreqGrid default_grid(const ArraySpec &spec)
    {
        if (spec.kind == ArrayKind::URA)
            return FreqGrid::uniform(default_grid_2d, default_grid_2d);
        return FreqGrid::uniform(default_grid_1d);
    }

    CMat build_dictionary(const ArraySpec &spec, const FreqGrid &grid)
    {
        if (grid.points.empty())
            throw std::invalid_argument("build_dictionary: empty grid");
        return steering_matrix(grid.points, spec);
    }

} // namespace rischan
