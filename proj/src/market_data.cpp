#include "pmf/market_data.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

namespace pmf {

namespace {

constexpr std::int64_t kMsPerDay = 86'400'000;

// Howard Hinnant's civil-date algorithms.
std::int64_t days_from_civil(int y, unsigned m, unsigned d) {
    y -= m <= 2;
    const int era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return static_cast<std::int64_t>(era) * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, int& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = static_cast<int>(yy + (m <= 2));
}

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

double parse_double_field(const std::string& s, std::size_t row, const char* what) {
    const char* begin = s.c_str();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(begin, &end);
    if (end == begin || errno == ERANGE || !std::isfinite(v)) {
        std::ostringstream os;
        os << "row " << row << ": bad " << what << " value '" << s << "'";
        throw ParseError(os.str());
    }
    while (*end == ' ') ++end;
    if (*end != '\0') {
        std::ostringstream os;
        os << "row " << row << ": trailing junk in " << what << " field '" << s << "'";
        throw ParseError(os.str());
    }
    return v;
}

std::int64_t parse_int_field(const std::string& s, std::size_t row, const char* what) {
    std::int64_t v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
        std::ostringstream os;
        os << "row " << row << ": bad " << what << " value '" << s << "'";
        throw ParseError(os.str());
    }
    return v;
}

std::int64_t parse_open_time(const std::string& s, std::size_t row) {
    if (s.find('-') != std::string::npos) {
        try {
            return ms_from_iso_date(s);
        } catch (const ParseError&) {
            std::ostringstream os;
            os << "row " << row << ": bad open_time '" << s << "'";
            throw ParseError(os.str());
        }
    }
    return parse_int_field(s, row, "open_time");
}

bool looks_like_header(const std::string& line) {
    const auto fields = split_fields(line);
    if (fields.empty() || fields[0].empty()) return true;
    const char c = fields[0][0];
    return !(std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+');
}

}  // namespace

std::string iso_date_from_ms(std::int64_t ms) {
    int y;
    unsigned m, d;
    civil_from_days(ms / kMsPerDay, y, m, d);
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02u-%02u", y, m, d);
    return buf;
}

std::int64_t ms_from_iso_date(const std::string& date) {
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(date.c_str(), "%d-%u-%u", &y, &m, &d) != 3 || m < 1 || m > 12 || d < 1 ||
        d > 31) {
        throw ParseError("bad ISO-8601 date: " + date);
    }
    return days_from_civil(y, m, d) * kMsPerDay;
}

OhlcvSeries parse_klines(const std::string& csv_text, const std::string& symbol) {
    OhlcvSeries series;
    series.symbol = symbol;

    std::istringstream is(csv_text);
    std::string line;
    std::size_t row = 0;
    bool first_content_line = true;
    while (std::getline(is, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        if (first_content_line) {
            first_content_line = false;
            if (looks_like_header(line)) continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() < 9) {
            std::ostringstream os;
            os << "row " << row << ": expected at least 9 comma-separated columns, got "
               << fields.size();
            throw ParseError(os.str());
        }
        OhlcvBar bar;
        bar.open_time_ms = parse_open_time(fields[0], row);
        bar.open = parse_double_field(fields[1], row, "open");
        bar.high = parse_double_field(fields[2], row, "high");
        bar.low = parse_double_field(fields[3], row, "low");
        bar.close = parse_double_field(fields[4], row, "close");
        bar.base_volume = parse_double_field(fields[5], row, "volume");
        // fields[6] (close_time) ignored
        bar.quote_volume = parse_double_field(fields[7], row, "quote_asset_volume");
        bar.trade_count = parse_int_field(fields[8], row, "number_of_trades");

        if (bar.open <= 0.0 || bar.high <= 0.0 || bar.low <= 0.0 || bar.close <= 0.0) {
            std::ostringstream os;
            os << "row " << row << ": nonpositive price";
            throw ValidationError(os.str());
        }
        if (bar.low > std::min(bar.open, bar.close) || bar.high < std::max(bar.open, bar.close)) {
            std::ostringstream os;
            os << "row " << row << ": OHLC inconsistency (low=" << bar.low << " high=" << bar.high
               << " open=" << bar.open << " close=" << bar.close << ")";
            throw ValidationError(os.str());
        }
        if (bar.trade_count < 0) {
            std::ostringstream os;
            os << "row " << row << ": negative trade count";
            throw ValidationError(os.str());
        }
        if (!series.bars.empty()) {
            const std::int64_t prev = series.bars.back().open_time_ms;
            if (bar.open_time_ms == prev) {
                std::ostringstream os;
                os << "row " << row << ": duplicated timestamp " << bar.open_time_ms;
                throw ValidationError(os.str());
            }
            if (bar.open_time_ms < prev) {
                std::ostringstream os;
                os << "row " << row << ": timestamps not increasing (" << bar.open_time_ms
                   << " after " << prev << ")";
                throw ValidationError(os.str());
            }
            if (bar.open_time_ms - prev < kMsPerDay) {
                std::ostringstream os;
                os << "row " << row << ": sub-daily bar spacing, expected daily klines";
                throw ValidationError(os.str());
            }
            if (bar.open_time_ms - prev > kMsPerDay) {
                series.gap_indices.push_back(series.bars.size());
            }
        }
        series.bars.push_back(bar);
    }
    if (series.bars.empty()) throw InsufficientDataError("no kline rows in input");
    return series;
}

OhlcvSeries load_klines_csv(const std::string& path, const std::string& symbol) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("input not found: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_klines(buf.str(), symbol);
}

std::vector<double> log_returns(const std::vector<double>& closes) {
    if (closes.size() < 2) throw InsufficientDataError("log_returns: need at least 2 closes");
    std::vector<double> out(closes.size() - 1);
    for (std::size_t t = 0; t + 1 < closes.size(); ++t) {
        if (closes[t] <= 0.0 || closes[t + 1] <= 0.0)
            throw NumericError("log_returns: nonpositive price");
        out[t] = std::log(closes[t + 1] / closes[t]);
    }
    return out;
}

SplitIndex chronological_split(std::size_t total_rows, const SplitRatios& ratios) {
    if (std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9)
        throw ConfigError("split ratios must sum to 1");
    const auto n_train = static_cast<std::size_t>(std::floor(ratios.train * total_rows));
    const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * total_rows));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= total_rows) {
        std::ostringstream os;
        os << "cannot split " << total_rows << " rows into nonempty train/val/test";
        throw ValidationError(os.str());
    }
    return SplitIndex{n_train, n_train + n_val};
}

MinMaxScaler fit_minmax(const FeatureMatrix& matrix, const SplitIndex& split) {
    if (split.train_end == 0 || split.train_end > matrix.rows)
        throw FitError("fit_minmax: empty or out-of-range training slice");
    MinMaxScaler s;
    s.mins.assign(matrix.cols, 0.0);
    s.maxs.assign(matrix.cols, 0.0);
    s.degenerate.assign(matrix.cols, false);
    s.channel_names = matrix.channel_names;
    for (std::size_t c = 0; c < matrix.cols; ++c) {
        double lo = matrix.at(0, c);
        double hi = lo;
        for (std::size_t r = 1; r < split.train_end; ++r) {
            lo = std::min(lo, matrix.at(r, c));
            hi = std::max(hi, matrix.at(r, c));
        }
        s.mins[c] = lo;
        s.maxs[c] = hi;
        s.degenerate[c] = (hi == lo);
    }
    return s;
}

FeatureMatrix apply_minmax(const MinMaxScaler& scaler, const FeatureMatrix& matrix) {
    if (scaler.channels() != matrix.cols) {
        std::ostringstream os;
        os << "apply_minmax: scaler has " << scaler.channels() << " channels, matrix has "
           << matrix.cols;
        throw ShapeError(os.str());
    }
    FeatureMatrix out = matrix;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
            out.at(r, c) = apply_minmax_value(scaler, c, matrix.at(r, c));
    return out;
}

FeatureMatrix invert_minmax(const MinMaxScaler& scaler, const FeatureMatrix& matrix) {
    if (scaler.channels() != matrix.cols) {
        std::ostringstream os;
        os << "invert_minmax: scaler has " << scaler.channels() << " channels, matrix has "
           << matrix.cols;
        throw ShapeError(os.str());
    }
    FeatureMatrix out = matrix;
    for (std::size_t r = 0; r < out.rows; ++r)
        for (std::size_t c = 0; c < out.cols; ++c)
            out.at(r, c) = invert_minmax_value(scaler, c, matrix.at(r, c));
    return out;
}

double apply_minmax_value(const MinMaxScaler& scaler, std::size_t channel, double x) {
    if (scaler.degenerate[channel]) return 0.0;
    return (x - scaler.mins[channel]) / (scaler.maxs[channel] - scaler.mins[channel]);
}

double invert_minmax_value(const MinMaxScaler& scaler, std::size_t channel, double x) {
    if (scaler.degenerate[channel]) return scaler.mins[channel];
    return scaler.mins[channel] + x * (scaler.maxs[channel] - scaler.mins[channel]);
}

void save_scaler(const MinMaxScaler& scaler, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write scaler file: " + path);
    out << "pmf-scaler v1\n";
    char buf[128];
    for (std::size_t c = 0; c < scaler.channels(); ++c) {
        std::snprintf(buf, sizeof(buf), "%.17g %.17g %d", scaler.mins[c], scaler.maxs[c],
                      scaler.degenerate[c] ? 1 : 0);
        out << scaler.channel_names[c] << ' ' << buf << '\n';
    }
}

MinMaxScaler load_scaler(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read scaler file: " + path);
    std::string header;
    std::getline(in, header);
    if (header != "pmf-scaler v1") throw ParseError("bad scaler header: " + header);
    MinMaxScaler s;
    std::string name;
    double lo, hi;
    int flag;
    while (in >> name >> lo >> hi >> flag) {
        s.channel_names.push_back(name);
        s.mins.push_back(lo);
        s.maxs.push_back(hi);
        s.degenerate.push_back(flag != 0);
    }
    return s;
}

std::vector<WindowSample> make_windows(const FeatureMatrix& matrix, std::size_t window,
                                       std::size_t horizon) {
    if (window == 0) throw ConfigError("make_windows: window must be positive");
    if (horizon != 1) throw ConfigError("make_windows: only horizon 1 is supported");
    if (matrix.rows < window + 1) {
        std::ostringstream os;
        os << "make_windows: need at least " << window + 1 << " rows, have " << matrix.rows;
        throw InsufficientDataError(os.str());
    }
    std::vector<WindowSample> out;
    out.reserve(matrix.rows - window);
    for (std::size_t k = 0; k + window < matrix.rows; ++k)
        out.push_back(WindowSample{k, k + window});
    return out;
}

void save_feature_matrix_csv(const FeatureMatrix& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write feature CSV: " + path);
    for (std::size_t c = 0; c < m.cols; ++c) {
        if (c) out << ',';
        out << m.channel_names[c];
    }
    out << '\n';
    char buf[40];
    for (std::size_t r = 0; r < m.rows; ++r) {
        for (std::size_t c = 0; c < m.cols; ++c) {
            if (c) out << ',';
            std::snprintf(buf, sizeof(buf), "%.17g", m.at(r, c));
            out << buf;
        }
        out << '\n';
    }
}

FeatureMatrix load_feature_matrix_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read feature CSV: " + path);
    std::string line;
    if (!std::getline(in, line)) throw ParseError("empty feature CSV: " + path);
    FeatureMatrix m;
    m.channel_names = split_fields(line);
    m.cols = m.channel_names.size();
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty() || line == "\r") continue;
        const auto fields = split_fields(line);
        if (fields.size() != m.cols) {
            std::ostringstream os;
            os << "row " << row << ": expected " << m.cols << " columns, got " << fields.size();
            throw ParseError(os.str());
        }
        for (std::size_t c = 0; c < m.cols; ++c)
            m.values.push_back(parse_double_field(fields[c], row, "feature"));
        ++m.rows;
    }
    return m;
}

}  // namespace pmf
