#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pmf/feature_matrix.hpp"

namespace pmf {

/// One daily candlestick. Prices are in the quote currency.
struct OhlcvBar {
    std::int64_t open_time_ms = 0;  // UTC midnight of the bar's day
    double open = 0.0;
    double high = 0.0;
    double low = 0.0;
    double close = 0.0;
    double base_volume = 0.0;
    double quote_volume = 0.0;
    std::int64_t trade_count = 0;
};

/// Time-ordered daily bars. Calendar gaps are recorded, never filled.
struct OhlcvSeries {
    std::string symbol;
    std::vector<OhlcvBar> bars;
    std::vector<std::size_t> gap_indices;  // bar i follows a missing day

    std::size_t size() const { return bars.size(); }
};

/// Row boundaries of a chronological train/validation/test split:
/// train = [0, train_end), validation = [train_end, val_end),
/// test = [val_end, T).
struct SplitIndex {
    std::size_t train_end = 0;
    std::size_t val_end = 0;
};

/// Per-channel min/max fitted on training rows only. Channels whose training
/// range collapses to a point are flagged degenerate and scale to 0.
struct MinMaxScaler {
    std::vector<double> mins;
    std::vector<double> maxs;
    std::vector<bool> degenerate;
    std::vector<std::string> channel_names;

    std::size_t channels() const { return mins.size(); }
};

struct SplitRatios {
    double train = 0.7;
    double val = 0.2;
    double test = 0.1;
};

/// Parse Binance-format kline CSV (header optional). Column order:
/// open_time, open, high, low, close, volume, close_time, quote_asset_volume,
/// number_of_trades, taker_buy_base, taker_buy_quote, ignore.
/// open_time may be a millisecond epoch or an ISO-8601 date.
OhlcvSeries parse_klines(const std::string& csv_text, const std::string& symbol = "");

OhlcvSeries load_klines_csv(const std::string& path, const std::string& symbol = "");

/// r_t = ln(P_{t+1} / P_t); output is one shorter than the input.
std::vector<double> log_returns(const std::vector<double>& closes);

/// Floor rule: |train| = floor(r_train * T), |val| = floor(r_val * T),
/// remainder rows go to the test split.
SplitIndex chronological_split(std::size_t total_rows, const SplitRatios& ratios = {});

MinMaxScaler fit_minmax(const FeatureMatrix& matrix, const SplitIndex& split);

/// Maps x to (x - min) / (max - min); degenerate channels map to 0.
/// Values outside the training range are not clipped.
FeatureMatrix apply_minmax(const MinMaxScaler& scaler, const FeatureMatrix& matrix);

FeatureMatrix invert_minmax(const MinMaxScaler& scaler, const FeatureMatrix& matrix);

double apply_minmax_value(const MinMaxScaler& scaler, std::size_t channel, double x);
double invert_minmax_value(const MinMaxScaler& scaler, std::size_t channel, double x);

void save_scaler(const MinMaxScaler& scaler, const std::string& path);
MinMaxScaler load_scaler(const std::string& path);

/// One supervised sample: input rows [start, start+window), target row
/// start+window. Values reference the source matrix.
struct WindowSample {
    std::size_t input_start = 0;
    std::size_t target_row = 0;
};

/// Sample k has input rows [k, k+window) and target row k+window;
/// count = T - window.
std::vector<WindowSample> make_windows(const FeatureMatrix& matrix, std::size_t window,
                                       std::size_t horizon = 1);

/// Millisecond epoch <-> ISO-8601 date helpers (UTC).
std::string iso_date_from_ms(std::int64_t ms);
std::int64_t ms_from_iso_date(const std::string& date);

}  // namespace pmf
