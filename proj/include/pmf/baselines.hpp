#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "pmf/checkpoint.hpp"
#include "pmf/rng.hpp"
#include "pmf/tensor.hpp"

namespace pmf {

/// No-change benchmark: the prediction for step t+1 is the value observed at
/// step t.
std::vector<double> naive_repeat(const std::vector<double>& values);

/// Autoregression of order p with intercept, fit by least squares.
/// Differencing and moving-average orders are fixed at zero.
struct ArModel {
    std::size_t p = 0;
    double intercept = 0.0;
    std::vector<double> phi;  // lag coefficients, phi[0] multiplies x_t
};

/// Least-squares fit on the lag design matrix. Rank-deficient designs (e.g.
/// constant series) are solved in the minimum-norm sense rather than
/// rejected; non-finite results raise FitError.
ArModel fit_ar(const std::vector<double>& train, std::size_t p = 2);

/// One-step prediction: intercept + sum_i phi_i * history[end - i].
double predict_ar(const ArModel& model, const std::vector<double>& history);

void save_ar(const ArModel& model, const std::string& path);
ArModel load_ar(const std::string& path);

/// DLinear: decompose each input window into a trend (centered moving
/// average, replicate-padded) and a remainder, apply one linear map per
/// component, and sum. individual=true gives every channel its own maps.
struct DlinearConfig {
    std::size_t window = 48;      // SL
    std::size_t channels = 1;     // D
    std::size_t ma_kernel = 25;   // decomposition window, <= SL
    bool individual = true;

    void validate() const;
};

struct DlinearModel {
    DlinearConfig config;
    Tensor w_trend;  // [C, SL] with C = channels (individual) or 1 (shared)
    Tensor b_trend;  // [C]
    Tensor w_rem;    // [C, SL]
    Tensor b_rem;    // [C]

    static DlinearModel init(const DlinearConfig& config, std::uint64_t seed);
    std::vector<Tensor> parameters() const;
    DlinearModel clone() const;
};

/// trend[t] = mean over the centered, replicate-padded kernel window;
/// remainder = x - trend (so trend + remainder == x exactly).
void decompose_series(const std::vector<double>& x, std::size_t kernel,
                      std::vector<double>& trend, std::vector<double>& remainder);

/// Differentiable pass over a batch of windows [B, SL, D] -> [B, D]
/// next-step predictions.
Tensor dlinear_forward_batch(const DlinearModel& model, const Tensor& windows);

/// Predictions for one window [SL, D], one value per channel.
std::vector<double> predict_dlinear(const DlinearModel& model, const Tensor& window);

struct DlinearFitOptions {
    double lr = 1e-2;
    std::size_t epochs = 300;
    std::size_t batch = 32;
    std::uint64_t seed = 42;
};

/// Adam on MSE over all channels of the supplied (window, next-row) samples.
/// windows: [N, SL, D] stacked inputs; targets: [N, D].
DlinearModel fit_dlinear(const DlinearConfig& config, const Tensor& windows, const Tensor& targets,
                         const DlinearFitOptions& options);

Checkpoint to_checkpoint(const DlinearModel& model, const std::vector<std::string>& channel_names);
DlinearModel dlinear_from_checkpoint(const Checkpoint& ckpt);

}  // namespace pmf
