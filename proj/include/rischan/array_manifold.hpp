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

#ifndef RISCHAN_ARRAY_MANIFOLD_HPP
#define RISCHAN_ARRAY_MANIFOLD_HPP

#include "rischan/linalg.hpp"

#include <vector>

namespace rischan
{
    enum class ArrayKind
    {
        ULA,
        URA
    };

    // Uniform linear or rectangular array. Element spacings are in wavelengths.
    // URA elements are indexed y-fastest: linear index = ix * count_y + iy.
    struct ArraySpec
    {
        ArrayKind kind = ArrayKind::ULA;
        Index count_x = 1;
        Index count_y = 1;
        double spacing_x = 0.5;
        double spacing_y = 0.5;

        static ArraySpec ula(Index count, double spacing = 0.5);
        static ArraySpec ura(Index count_x, Index count_y, double spacing_x = 0.5, double spacing_y = 0.5);

        Index elements() const { return count_x * count_y; }

        // Number of spatial-frequency components (1 for ULA, 2 for URA)
        int freq_dims() const { return kind == ArrayKind::URA ? 2 : 1; }

        // Throws std::invalid_argument on non-positive counts or spacings
        void validate() const;
    };

    // 2D spatial frequency in radians per element, both components kept in (-pi, pi].
    // The second component is unused (zero) for linear arrays.
    struct SpatialFreq
    {
        double w1 = 0.0;
        double w2 = 0.0;

        SpatialFreq() = default;
        SpatialFreq(double x, double y = 0.0) : w1(wrap_phase(x)), w2(wrap_phase(y)) {}

        double operator[](int axis) const { return axis == 0 ? w1 : w2; }
    };

    inline SpatialFreq operator+(const SpatialFreq &a, const SpatialFreq &b) { return {a.w1 + b.w1, a.w2 + b.w2}; }
    inline SpatialFreq operator-(const SpatialFreq &a, const SpatialFreq &b) { return {a.w1 - b.w1, a.w2 - b.w2}; }
    inline SpatialFreq operator-(const SpatialFreq &a) { return {-a.w1, -a.w2}; }
    inline bool operator==(const SpatialFreq &a, const SpatialFreq &b) { return a.w1 == b.w1 && a.w2 == b.w2; }
    inline bool operator<(const SpatialFreq &a, const SpatialFreq &b) { return a.w1 < b.w1 || (a.w1 == b.w1 && a.w2 < b.w2); }

    // Wrapped per-axis distance
    double freq_distance(const SpatialFreq &a, const SpatialFreq &b);

    // [1, e^{jw}, ..., e^{j(count-1)w}]
    CVec ula_steering(const SpatialFreq &w, Index count);

    // ula(w1, count_x) (x) ula(w2, count_y); throws std::invalid_argument for a ULA spec
    CVec ura_steering(const SpatialFreq &w, const ArraySpec &spec);

    // Dispatches on spec.kind (ULA uses w1 only)
    CVec steering(const SpatialFreq &w, const ArraySpec &spec);

    // Columns are steering vectors at the given frequencies
    CMat steering_matrix(const std::vector<SpatialFreq> &w, const ArraySpec &spec);

    // Derivative of the steering vector with respect to frequency component `axis` (0 or 1)
    CVec steering_derivative(const SpatialFreq &w, const ArraySpec &spec, int axis);

    // Azimuth in [-90, 90] deg, elevation in [0, 90] deg.
    // w1 = 2 pi dx sin(az), w2 = 2 pi dy sin(el) cos(az); w2 = 0 for ULA.
    SpatialFreq freq_from_angles(double azimuth_deg, double elevation_deg, const ArraySpec &spec);

    // Product grid of spatial frequencies, uniform in frequency.
    // Axis points are w_i = -pi + 2 pi (i + 1) / n, i = 0..n-1, so n = 2 gives {0, pi}.
    // Points are stored lexicographically (w1 major), index = ix * res_y + iy.
    struct FreqGrid
    {
        std::vector<SpatialFreq> points;
        Index res_x = 1;
        Index res_y = 1;

        static FreqGrid uniform(Index res_x, Index res_y = 1);

        // Grid from explicit points (need not be a product grid); validated for strict order
        static FreqGrid from_points(std::vector<SpatialFreq> pts);

        Index size() const { return static_cast<Index>(points.size()); }
        bool is_product() const { return res_x * res_y == size(); }

        // Width of one cell along an axis
        double cell(int axis) const;

        // Throws std::invalid_argument if points are not strictly increasing
        void validate() const;
    };

    inline constexpr Index default_grid_1d = 256;
    inline constexpr Index default_grid_2d = 64;

    // 256-point grid for linear arrays, 64 x 64 for rectangular arrays
    FreqGrid default_grid(const ArraySpec &spec);

    // elements x |grid| matrix of steering vectors
    CMat build_dictionary(const ArraySpec &spec, const FreqGrid &grid);

} // namespace rischan

#endif
