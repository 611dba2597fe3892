#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "isoscatter/io.hpp"
#include "isoscatter/stats.hpp"

namespace isoscatter {

// Touchstone version 1.0 (.s1p .. .s4p) ingestion and serialization.
//
// Classic pitfall, honored here: 2-port data lines are ordered
// S11 S21 S12 S22 (column-major for the 2x2 case); 1-, 3- and 4-port data are
// row-major. 3- and 4-port records span one line per matrix row.

struct NetworkRecord {
    double frequency_hz = 0.0;
    Eigen::MatrixXcd s;                  // P x P scattering parameters
    double reference_impedance = 50.0;   // ohms

    int ports() const { return static_cast<int>(s.rows()); }
};

enum class TouchstoneFormat { RI, MA, DB };

struct TouchstoneParseError : std::runtime_error {
    int line;
    TouchstoneParseError(int line_number, const std::string& message)
        : std::runtime_error("touchstone parse error, line " + std::to_string(line_number) + ": " +
                             message),
          line(line_number) {}
};

namespace touchstone_detail {

inline std::string upper(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::toupper(c)); });
    return out;
}

inline std::vector<std::string_view> tokenize(std::string_view line) {
    std::vector<std::string_view> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        std::size_t start = i;
        while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i]))) ++i;
        if (i > start) tokens.push_back(line.substr(start, i - start));
    }
    return tokens;
}

inline bool parse_number(std::string_view token, double& out) {
    const char* begin = token.data();
    const char* end = begin + token.size();
    auto result = std::from_chars(begin, end, out);
    return result.ec == std::errc() && result.ptr == end;
}

inline Complex decode_value(TouchstoneFormat format, double a, double b) {
    switch (format) {
        case TouchstoneFormat::RI:
            return Complex(a, b);
        case TouchstoneFormat::MA:
            return std::polar(a, b * std::numbers::pi / 180.0);
        case TouchstoneFormat::DB:
            return std::polar(std::pow(10.0, a / 20.0), b * std::numbers::pi / 180.0);
    }
    throw std::invalid_argument("unknown touchstone format");
}

// Value-pair slot t -> matrix position, honoring the 2-port column order.
inline std::pair<int, int> pair_position(int ports, int t) {
    if (ports == 2) {
        constexpr int row[4] = {0, 1, 0, 1};
        constexpr int col[4] = {0, 0, 1, 1};
        return {row[t], col[t]};
    }
    return {t / ports, t % ports};
}

// Port count from a ".sNp" filename hint; 0 when the hint does not carry one.
inline int ports_from_filename(std::string_view filename) {
    const std::string name = upper(filename);
    const std::size_t dot = name.rfind('.');
    if (dot == std::string::npos) return 0;
    const std::string ext = name.substr(dot + 1);
    if (ext.size() < 3 || ext.front() != 'S' || ext.back() != 'P') return 0;
    int ports = 0;
    for (std::size_t i = 1; i + 1 < ext.size(); ++i) {
        if (!std::isdigit(static_cast<unsigned char>(ext[i]))) return 0;
        ports = ports * 10 + (ext[i] - '0');
    }
    return ports;
}

}  // namespace touchstone_detail

// Parses Touchstone v1.0 text. The filename hint supplies the port count via
// the .sNp extension; without it, the count is inferred from the first data
// line (9-value lines are read as 2-port, the common case; 4-port files need
// the extension). Every failure carries the offending line number.
inline std::vector<NetworkRecord> parse_touchstone(std::string_view text,
                                                   std::string_view filename_hint = {}) {
    using namespace touchstone_detail;

    int ports = ports_from_filename(filename_hint);
    if (ports > 4)
        throw TouchstoneParseError(0, "unsupported port count " + std::to_string(ports) +
                                          " (supported: 1..4)");

    bool option_seen = false;
    double freq_scale = 1e9;  // default GHz
    TouchstoneFormat format = TouchstoneFormat::MA;
    double impedance = 50.0;

    std::vector<NetworkRecord> records;
    std::vector<double> pending;     // numeric values of a record under assembly
    int pending_rows_left = 0;       // continuation lines still expected (3/4-port)
    double last_freq = -1.0;
    int record_start_line = 0;

    int line_number = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos
                                                                               : eol - pos);
        pos = eol == std::string_view::npos ? text.size() + 1 : eol + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

        // strip trailing comment
        if (const std::size_t bang = line.find('!'); bang != std::string_view::npos)
            line = line.substr(0, bang);

        const auto tokens = tokenize(line);
        if (tokens.empty()) continue;

        if (tokens.front().front() == '[')
            throw TouchstoneParseError(line_number,
                                       "Touchstone v2.0 keyword '" + std::string(tokens.front()) +
                                           "' is not supported (v1.0 only)");

        if (tokens.front().front() == '#') {
            if (option_seen)
                throw TouchstoneParseError(line_number, "duplicate option line");
            if (!records.empty() || !pending.empty())
                throw TouchstoneParseError(line_number, "option line after data");

            // "# <unit> <type> <format> R <impedance>", all fields optional.
            std::vector<std::string> opts;
            for (std::size_t i = 0; i < tokens.size(); ++i) {
                std::string t = upper(tokens[i]);
                if (i == 0) {
                    if (t == "#") continue;
                    t = t.substr(1);  // '#GHz' style
                    if (t.empty()) continue;
                }
                opts.push_back(std::move(t));
            }
            std::size_t i = 0;
            if (i < opts.size() &&
                (opts[i] == "HZ" || opts[i] == "KHZ" || opts[i] == "MHZ" || opts[i] == "GHZ")) {
                freq_scale = opts[i] == "HZ"    ? 1.0
                             : opts[i] == "KHZ" ? 1e3
                             : opts[i] == "MHZ" ? 1e6
                                                : 1e9;
                ++i;
            }
            if (i < opts.size() && opts[i].size() == 1 && std::isalpha((unsigned char)opts[i][0])) {
                if (opts[i] != "S")
                    throw TouchstoneParseError(line_number, "unsupported parameter type '" +
                                                                opts[i] + "' (only S-parameters)");
                ++i;
            }
            if (i < opts.size() && (opts[i] == "RI" || opts[i] == "MA" || opts[i] == "DB")) {
                format = opts[i] == "RI"   ? TouchstoneFormat::RI
                         : opts[i] == "MA" ? TouchstoneFormat::MA
                                           : TouchstoneFormat::DB;
                ++i;
            }
            if (i < opts.size()) {
                if (opts[i] != "R")
                    throw TouchstoneParseError(line_number,
                                               "malformed option line near '" + opts[i] + "'");
                ++i;
                if (i >= opts.size())
                    throw TouchstoneParseError(line_number, "option 'R' is missing its impedance");
                double r = 0.0;
                if (!parse_number(opts[i], r) || !(r > 0.0))
                    throw TouchstoneParseError(line_number,
                                               "invalid reference impedance '" + opts[i] + "'");
                impedance = r;
                ++i;
            }
            if (i < opts.size())
                throw TouchstoneParseError(line_number,
                                           "unexpected option token '" + opts[i] + "'");
            option_seen = true;
            continue;
        }

        // data line
        if (!option_seen)
            throw TouchstoneParseError(line_number, "data before the '#' option line");

        std::vector<double> values;
        values.reserve(tokens.size());
        for (auto t : tokens) {
            double v = 0.0;
            if (!parse_number(t, v))
                throw TouchstoneParseError(line_number,
                                           "invalid numeric token '" + std::string(t) + "'");
            values.push_back(v);
        }

        if (ports == 0) {
            // infer from the first data line
            if (values.size() == 3) ports = 1;
            else if (values.size() == 9) ports = 2;
            else if (values.size() == 7) ports = 3;
            else
                throw TouchstoneParseError(
                    line_number, "cannot infer port count from a " +
                                     std::to_string(values.size()) +
                                     "-value data line (give a .sNp filename hint)");
        }

        const std::size_t full = 1 + 2 * static_cast<std::size_t>(ports) * ports;
        const std::size_t first_line = ports <= 2 ? full : 1 + 2 * static_cast<std::size_t>(ports);
        const std::size_t row_line = 2 * static_cast<std::size_t>(ports);

        if (pending_rows_left == 0) {
            if (values.size() != first_line)
                throw TouchstoneParseError(line_number,
                                           "expected " + std::to_string(first_line) +
                                               " values for a " + std::to_string(ports) +
                                               "-port record, got " + std::to_string(values.size()));
            pending = values;
            pending_rows_left = ports <= 2 ? 0 : ports - 1;
            record_start_line = line_number;
        } else {
            if (values.size() != row_line)
                throw TouchstoneParseError(line_number,
                                           "expected " + std::to_string(row_line) +
                                               " values on a continuation row, got " +
                                               std::to_string(values.size()));
            pending.insert(pending.end(), values.begin(), values.end());
            --pending_rows_left;
        }

        if (pending_rows_left == 0) {
            NetworkRecord record;
            record.frequency_hz = pending[0] * freq_scale;
            if (!(record.frequency_hz > 0.0))
                throw TouchstoneParseError(record_start_line == 0 ? line_number : record_start_line,
                                           "frequency must be strictly positive");
            if (record.frequency_hz <= last_freq)
                throw TouchstoneParseError(
                    record_start_line == 0 ? line_number : record_start_line,
                    "non-monotone frequency " + std::to_string(pending[0]) +
                        " (frequencies must be strictly increasing)");
            last_freq = record.frequency_hz;
            record.reference_impedance = impedance;
            record.s.resize(ports, ports);
            for (int t = 0; t < ports * ports; ++t) {
                const auto [row, col] = pair_position(ports, t);
                record.s(row, col) = decode_value(format, pending[1 + 2 * t], pending[2 + 2 * t]);
            }
            records.push_back(std::move(record));
            pending.clear();
            record_start_line = 0;
        }
    }

    if (pending_rows_left > 0)
        throw TouchstoneParseError(line_number,
                                   "file ends inside a record (missing continuation rows)");
    if (!option_seen)
        throw TouchstoneParseError(line_number, "missing '#' option line");
    return records;
}

// Serializes records as Touchstone v1.0 with frequencies in Hz. Exact inverse
// of parse_touchstone within 1e-9 per entry (exact for RI).
inline std::string serialize_touchstone(const std::vector<NetworkRecord>& records,
                                        TouchstoneFormat format = TouchstoneFormat::RI) {
    using namespace touchstone_detail;

    double impedance = 50.0;
    int ports = 0;
    if (!records.empty()) {
        ports = records.front().ports();
        impedance = records.front().reference_impedance;
        if (ports < 1 || ports > 4)
            throw std::invalid_argument("serialize_touchstone: unsupported port count " +
                                        std::to_string(ports) + " (supported: 1..4)");
        double last = -1.0;
        for (const NetworkRecord& r : records) {
            if (r.ports() != ports)
                throw std::invalid_argument("serialize_touchstone: mixed port counts");
            if (r.reference_impedance != impedance)
                throw std::invalid_argument("serialize_touchstone: mixed reference impedances");
            if (r.frequency_hz <= last)
                throw std::invalid_argument("serialize_touchstone: frequencies must increase");
            last = r.frequency_hz;
        }
    }

    const char* fmt_name = format == TouchstoneFormat::RI ? "RI"
                           : format == TouchstoneFormat::MA ? "MA"
                                                            : "DB";
    std::string out = "# HZ S " + std::string(fmt_name) + " R " + format_double(impedance) + "\n";

    auto encode = [&](Complex z, double& a, double& b) {
        switch (format) {
            case TouchstoneFormat::RI:
                a = z.real();
                b = z.imag();
                return;
            case TouchstoneFormat::MA:
                a = std::abs(z);
                b = a == 0.0 ? 0.0 : std::arg(z) * 180.0 / std::numbers::pi;
                return;
            case TouchstoneFormat::DB: {
                const double mag = std::abs(z);
                a = mag > 0.0 ? 20.0 * std::log10(mag) : -6000.0;
                b = mag == 0.0 ? 0.0 : std::arg(z) * 180.0 / std::numbers::pi;
                return;
            }
        }
    };

    for (const NetworkRecord& record : records) {
        std::string line = format_double(record.frequency_hz);
        for (int t = 0; t < ports * ports; ++t) {
            const auto [row, col] = pair_position(ports, t);
            double a = 0.0, b = 0.0;
            encode(record.s(row, col), a, b);
            line += ' ';
            line += format_double(a);
            line += ' ';
            line += format_double(b);
            if (ports >= 3 && t % ports == ports - 1 && t + 1 < ports * ports) {
                out += line;
                out += '\n';
                line.clear();
            }
        }
        out += line;
        out += '\n';
    }
    return out;
}

}  // namespace isoscatter
