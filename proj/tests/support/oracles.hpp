// Copyright 2026 the emorag authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Reference implementations used only by tests. They are written from the
// definitions, independently of the library code they check.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace oracle {

// Index of the row with the largest cosine similarity to `q`; first wins ties.
inline std::size_t cosine_argmax(const std::vector<std::vector<float>>& rows, const std::vector<float>& q) {
    long double qq = 0;
    for (float v : q) qq += static_cast<long double>(v) * v;
    std::size_t best = 0;
    long double best_sim = -std::numeric_limits<long double>::infinity();
    for (std::size_t i = 0; i < rows.size(); ++i) {
        long double dot = 0, rr = 0;
        for (std::size_t d = 0; d < q.size(); ++d) {
            dot += static_cast<long double>(rows[i][d]) * q[d];
            rr += static_cast<long double>(rows[i][d]) * rows[i][d];
        }
        const long double sim = dot / std::sqrt(rr * qq);
        if (sim > best_sim) {
            best_sim = sim;
            best = i;
        }
    }
    return best;
}

inline std::vector<double> unit(const std::vector<double>& v) {
    double n = 0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    std::vector<double> out(v);
    for (double& x : out) x /= n;
    return out;
}

// Plain Lloyd iterations on unit-normalized points from explicit initial
// centroids. Returns the final centroids (re-normalized each round).
inline std::vector<std::vector<double>> lloyd(const std::vector<std::vector<double>>& points,
                                              std::vector<std::vector<double>> centroids, int iters) {
    const auto k = centroids.size();
    const auto dim = points.front().size();
    std::vector<std::vector<double>> pts;
    for (const auto& p : points) pts.push_back(unit(p));
    for (int it = 0; it < iters; ++it) {
        std::vector<std::vector<double>> sum(k, std::vector<double>(dim, 0.0));
        std::vector<int> count(k, 0);
        for (const auto& p : pts) {
            std::size_t best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (std::size_t c = 0; c < k; ++c) {
                double d = 0;
                for (std::size_t j = 0; j < dim; ++j) d += (p[j] - centroids[c][j]) * (p[j] - centroids[c][j]);
                if (d < best_d) {
                    best_d = d;
                    best = c;
                }
            }
            for (std::size_t j = 0; j < dim; ++j) sum[best][j] += p[j];
            ++count[best];
        }
        for (std::size_t c = 0; c < k; ++c) {
            if (count[c]) centroids[c] = unit(sum[c]);
        }
    }
    return centroids;
}

// Linear interpolation of sample `rows` at fractional position `pos`.
inline std::vector<double> lerp_at(const std::vector<std::vector<double>>& rows, double pos) {
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, rows.size() - 1);
    const double w = pos - static_cast<double>(lo);
    std::vector<double> out(rows[lo].size());
    for (std::size_t j = 0; j < out.size(); ++j) out[j] = rows[lo][j] + w * (rows[hi][j] - rows[lo][j]);
    return out;
}

// Relative error with a floor on the denominator so that gradients that are
// zero in exact arithmetic compare against an absolute tolerance.
inline double relative_error(double a, double b, double floor = 1e-5) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

// Nearest-rank percentile.
inline std::uint64_t nearest_rank(std::vector<std::uint64_t> v, double p) {
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(v.size())));
    return v[std::max<std::size_t>(rank, 1) - 1];
}

}  // namespace oracle
