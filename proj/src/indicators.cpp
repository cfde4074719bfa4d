#include "pmf/indicators.hpp"

#include <cmath>
#include <limits>
#include <sstream>

namespace pmf {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_length(std::size_t have, std::size_t need, const char* what) {
    if (have < need) {
        std::ostringstream os;
        os << what << ": need at least " << need << " values, have " << have;
        throw InsufficientDataError(os.str());
    }
}

void require_aligned(std::size_t a, std::size_t b, std::size_t c, const char* what) {
    if (a != b || b != c) {
        std::ostringstream os;
        os << what << ": high/low/close lengths differ (" << a << ", " << b << ", " << c << ")";
        throw ShapeError(os.str());
    }
}

}  // namespace

std::vector<double> sma(const std::vector<double>& x, std::size_t n) {
    if (n == 0) throw ConfigError("sma: window must be positive");
    require_length(x.size(), n, "sma");
    std::vector<double> out(x.size(), kNaN);
    double running = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) {
        running += x[t];
        if (t >= n) running -= x[t - n];
        if (t + 1 >= n) out[t] = running / static_cast<double>(n);
    }
    return out;
}

std::vector<double> ema(const std::vector<double>& x, std::size_t n) {
    if (n == 0) throw ConfigError("ema: window must be positive");
    require_length(x.size(), 1, "ema");
    const double k = 2.0 / (static_cast<double>(n) + 1.0);
    std::vector<double> out(x.size());
    out[0] = x[0];
    for (std::size_t t = 1; t < x.size(); ++t) out[t] = out[t - 1] + k * (x[t] - out[t - 1]);
    return out;
}

std::vector<double> rsi(const std::vector<double>& closes, std::size_t n) {
    if (n == 0) throw ConfigError("rsi: period must be positive");
    require_length(closes.size(), n + 1, "rsi");
    const std::size_t m = closes.size();
    std::vector<double> gain(m, 0.0), loss(m, 0.0);
    for (std::size_t t = 1; t < m; ++t) {
        const double d = closes[t] - closes[t - 1];
        gain[t] = d > 0.0 ? d : 0.0;
        loss[t] = d < 0.0 ? -d : 0.0;
    }
    std::vector<double> out(m, kNaN);
    double avg_gain = 0.0, avg_loss = 0.0;
    for (std::size_t t = 1; t <= n; ++t) {
        avg_gain += gain[t];
        avg_loss += loss[t];
    }
    avg_gain /= static_cast<double>(n);
    avg_loss /= static_cast<double>(n);
    const double nd = static_cast<double>(n);
    for (std::size_t t = n; t < m; ++t) {
        if (t > n) {
            avg_gain = (avg_gain * (nd - 1.0) + gain[t]) / nd;
            avg_loss = (avg_loss * (nd - 1.0) + loss[t]) / nd;
        }
        if (avg_loss == 0.0 && avg_gain == 0.0) {
            out[t] = 50.0;
        } else if (avg_loss == 0.0) {
            out[t] = 100.0;
        } else if (avg_gain == 0.0) {
            out[t] = 0.0;
        } else {
            out[t] = 100.0 - 100.0 / (1.0 + avg_gain / avg_loss);
        }
    }
    return out;
}

std::vector<double> cci(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, std::size_t n) {
    if (n == 0) throw ConfigError("cci: period must be positive");
    require_aligned(high.size(), low.size(), close.size(), "cci");
    require_length(close.size(), n, "cci");
    const std::size_t m = close.size();
    std::vector<double> tp(m);
    for (std::size_t t = 0; t < m; ++t) tp[t] = (high[t] + low[t] + close[t]) / 3.0;
    std::vector<double> out(m, kNaN);
    for (std::size_t t = n - 1; t < m; ++t) {
        double mean = 0.0;
        for (std::size_t u = t + 1 - n; u <= t; ++u) mean += tp[u];
        mean /= static_cast<double>(n);
        double dev = 0.0;
        for (std::size_t u = t + 1 - n; u <= t; ++u) dev += std::abs(tp[u] - mean);
        dev /= static_cast<double>(n);
        out[t] = dev == 0.0 ? 0.0 : (tp[t] - mean) / (0.015 * dev);
    }
    return out;
}

std::vector<double> atr(const std::vector<double>& high, const std::vector<double>& low,
                        const std::vector<double>& close, std::size_t n) {
    if (n == 0) throw ConfigError("atr: period must be positive");
    require_aligned(high.size(), low.size(), close.size(), "atr");
    require_length(close.size(), n + 1, "atr");
    const std::size_t m = close.size();
    std::vector<double> tr(m, 0.0);
    for (std::size_t t = 1; t < m; ++t) {
        const double hl = high[t] - low[t];
        const double hc = std::abs(high[t] - close[t - 1]);
        const double lc = std::abs(low[t] - close[t - 1]);
        tr[t] = std::max(hl, std::max(hc, lc));
    }
    std::vector<double> out(m, kNaN);
    double avg = 0.0;
    for (std::size_t t = 1; t <= n; ++t) avg += tr[t];
    avg /= static_cast<double>(n);
    const double nd = static_cast<double>(n);
    out[n] = avg;
    for (std::size_t t = n + 1; t < m; ++t) {
        avg = (avg * (nd - 1.0) + tr[t]) / nd;
        out[t] = avg;
    }
    return out;
}

MacdResult macd(const std::vector<double>& closes, std::size_t fast, std::size_t slow,
                std::size_t signal_n) {
    if (fast >= slow) {
        std::ostringstream os;
        os << "macd: fast period (" << fast << ") must be smaller than slow (" << slow << ")";
        throw ConfigError(os.str());
    }
    require_length(closes.size(), 1, "macd");
    MacdResult r;
    const auto ef = ema(closes, fast);
    const auto es = ema(closes, slow);
    r.line.resize(closes.size());
    for (std::size_t t = 0; t < closes.size(); ++t) r.line[t] = ef[t] - es[t];
    r.signal = ema(r.line, signal_n);
    r.histogram.resize(closes.size());
    for (std::size_t t = 0; t < closes.size(); ++t) r.histogram[t] = r.line[t] - r.signal[t];
    return r;
}

const std::vector<std::string>& feature_channel_names() {
    static const std::vector<std::string> names = {
        "open",     "high",        "low",       "close",     "base_volume", "quote_volume",
        "trade_count", "sma50",    "ema21",     "rsi14",     "cci20",       "atr14",
        "macd_line",   "macd_signal", "macd_hist", "log_return"};
    return names;
}

FeatureMatrix build_feature_matrix(const OhlcvSeries& series) {
    const std::size_t n = series.size();
    if (n < kWarmupRows + 2) {
        std::ostringstream os;
        os << "build_feature_matrix: need at least " << kWarmupRows + 2 << " bars, have " << n;
        throw InsufficientDataError(os.str());
    }
    std::vector<double> open(n), high(n), low(n), close(n), bvol(n), qvol(n), trades(n);
    for (std::size_t t = 0; t < n; ++t) {
        const auto& b = series.bars[t];
        open[t] = b.open;
        high[t] = b.high;
        low[t] = b.low;
        close[t] = b.close;
        bvol[t] = b.base_volume;
        qvol[t] = b.quote_volume;
        trades[t] = static_cast<double>(b.trade_count);
    }
    const auto sma50 = sma(close, 50);
    const auto ema21 = ema(close, 21);
    const auto rsi14 = rsi(close, 14);
    const auto cci20 = cci(high, low, close, 20);
    const auto atr14 = atr(high, low, close, 14);
    const auto macd_r = macd(close, 12, 26, 9);
    const auto rets = log_returns(close);  // rets[t-1] = ln(close_t / close_{t-1})

    const std::size_t out_rows = n - kWarmupRows;
    FeatureMatrix m(out_rows, kFeatureChannels);
    m.channel_names = feature_channel_names();
    m.first_valid_row = 0;
    m.timestamps.resize(out_rows);
    for (std::size_t i = 0; i < out_rows; ++i) {
        const std::size_t t = i + kWarmupRows;
        m.timestamps[i] = series.bars[t].open_time_ms;
        double* row = m.values.data() + i * kFeatureChannels;
        row[0] = open[t];
        row[1] = high[t];
        row[2] = low[t];
        row[3] = close[t];
        row[4] = bvol[t];
        row[5] = qvol[t];
        row[6] = trades[t];
        row[7] = sma50[t];
        row[8] = ema21[t];
        row[9] = rsi14[t];
        row[10] = cci20[t];
        row[11] = atr14[t];
        row[12] = macd_r.line[t];
        row[13] = macd_r.signal[t];
        row[14] = macd_r.histogram[t];
        row[15] = rets[t - 1];
    }
    return m;
}

}  // namespace pmf
