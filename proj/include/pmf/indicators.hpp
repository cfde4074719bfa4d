#pragma once

#include <vector>

#include "pmf/feature_matrix.hpp"
#include "pmf/market_data.hpp"

namespace pmf {

/// Indicator outputs are aligned with their input: element t is the indicator
/// value at bar t. Entries before an indicator's warm-up are NaN; callers that
/// need a rectangular matrix trim them (build_feature_matrix does).

/// Simple moving average, defined from index n-1.
std::vector<double> sma(const std::vector<double>& x, std::size_t n);

/// Exponential moving average seeded with the first observation:
/// k = 2/(n+1), e_0 = x_0, e_t = e_{t-1} + k*(x_t - e_{t-1}).
std::vector<double> ema(const std::vector<double>& x, std::size_t n);

/// Relative strength index with Wilder smoothing, defined from index n.
/// Conventions: all-gain 100, all-loss 0, flat 50.
std::vector<double> rsi(const std::vector<double>& closes, std::size_t n = 14);

/// Commodity channel index over the typical price (h+l+c)/3, defined from
/// index n-1. Zero mean deviation maps to 0.
std::vector<double> cci(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, std::size_t n = 20);

/// Average true range with Wilder smoothing, defined from index n.
std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, std::size_t n = 14);

struct MacdResult {
    std::vector<double> line;
    std::vector<double> signal;
    std::vector<double> histogram;
};

/// MACD: line = ema(fast) - ema(slow), signal = ema(line, signal_n),
/// histogram = line - signal. Defined from index 0 (EMAs seed at x_0).
MacdResult macd(const std::vector<double>& closes, std::size_t fast = 12, std::size_t slow = 26,
                std::size_t signal_n = 9);

/// Channel order of the default 16-channel pipeline.
const std::vector<std::string>& feature_channel_names();

constexpr std::size_t kFeatureChannels = 16;
constexpr std::size_t kTargetChannel = 15;   // log_return
constexpr std::size_t kWarmupRows = 50;      // SMA(50) dominates

/// Assemble the 16-channel matrix (raw bars + indicators + log_return) and
/// trim the first 50 warm-up rows. Needs at least 52 bars.
FeatureMatrix build_feature_matrix(const OhlcvSeries& series);

}  // namespace pmf
