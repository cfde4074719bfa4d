#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmf/errors.hpp"

namespace pmf {

/// Row-major T x D matrix of named channels. Rows are days, columns are
/// channels; warm-up rows are trimmed at construction so every cell at or
/// after first_valid_row is defined.
struct FeatureMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values;              // rows * cols, row-major
    std::vector<std::string> channel_names;  // size cols, unique
    std::size_t first_valid_row = 0;
    std::vector<std::int64_t> timestamps;    // optional, size rows when present

    FeatureMatrix() = default;
    FeatureMatrix(std::size_t r, std::size_t c)
        : rows(r), cols(c), values(r * c, 0.0), channel_names(c) {}

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }

    const double* row(std::size_t r) const { return values.data() + r * cols; }

    std::size_t channel_index(const std::string& name) const {
        for (std::size_t c = 0; c < cols; ++c)
            if (channel_names[c] == name) return c;
        throw ConfigError("unknown channel: " + name);
    }
};

/// Write as CSV: header row of channel names, one row per day, full double
/// precision (round-trips bitwise).
void save_feature_matrix_csv(const FeatureMatrix& m, const std::string& path);

FeatureMatrix load_feature_matrix_csv(const std::string& path);

}  // namespace pmf
