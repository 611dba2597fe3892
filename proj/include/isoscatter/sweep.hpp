#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "isoscatter/io.hpp"
#include "isoscatter/multiport.hpp"
#include "isoscatter/parallel.hpp"
#include "isoscatter/sie.hpp"
#include "isoscatter/stats.hpp"
#include "isoscatter/touchstone.hpp"

namespace isoscatter {

// Frequency-indexed collections of per-stir-state S-matrices and the
// per-frequency variance analysis across stir states.

struct StirState {
    std::string label;                   // source filename or synthetic tag
    std::vector<NetworkRecord> records;  // frequency-sorted sweep
};

struct SweepDataset {
    std::vector<StirState> stir_states;
    std::string source;  // directory / generator description

    std::size_t stir_count() const { return stir_states.size(); }

    int ports() const {
        if (stir_states.empty() || stir_states.front().records.empty()) return 0;
        return stir_states.front().records.front().ports();
    }

    // All stir states must share one frequency grid, bit-for-bit after the
    // Hz conversion. Throws with the offending frequencies listed.
    void validate_common_grid() const {
        if (stir_states.empty()) throw std::invalid_argument("SweepDataset: no stir states");
        const auto& ref = stir_states.front().records;
        for (const StirState& stir : stir_states) {
            if (stir.records.size() != ref.size())
                throw std::invalid_argument("SweepDataset: stir state '" + stir.label + "' has " +
                                            std::to_string(stir.records.size()) +
                                            " frequencies, expected " + std::to_string(ref.size()));
            for (std::size_t i = 0; i < ref.size(); ++i) {
                if (stir.records[i].frequency_hz != ref[i].frequency_hz)
                    throw std::invalid_argument(
                        "SweepDataset: frequency grid mismatch in '" + stir.label + "': " +
                        format_double(stir.records[i].frequency_hz) + " vs " +
                        format_double(ref[i].frequency_hz));
                if (stir.records[i].ports() != ref[i].ports())
                    throw std::invalid_argument("SweepDataset: port count mismatch in '" +
                                                stir.label + "'");
            }
        }
    }
};

struct VarianceCurveRow {
    double frequency_hz = 0.0;
    double var_s11 = 0.0;
    double var_s22 = 0.0;
    double var_s12 = 0.0;
    double predicted_var_s12 = 0.0;  // sqrt(var_s11 var_s22) / 2
    double rel_residual = std::numeric_limits<double>::quiet_NaN();  // defined when var_s12 > 0
};

struct VarianceCurve {
    std::vector<VarianceCurveRow> rows;
    std::uint64_t stir_count = 0;
    bool low_confidence = false;  // fewer than 10 stir states
};

// Per-frequency complex variances across stir states for S11, S22 and S12,
// with the predicted cross variance and its relative residual. Unbiased
// (M-1) divisor; with a single stir state every variance is 0.
inline VarianceCurve variance_curve(const SweepDataset& dataset) {
    dataset.validate_common_grid();
    if (dataset.ports() < 2)
        throw std::invalid_argument("variance_curve: needs a 2-port (or larger) dataset");

    const std::size_t n_freq = dataset.stir_states.front().records.size();
    VarianceCurve curve;
    curve.stir_count = dataset.stir_count();
    curve.low_confidence = curve.stir_count < 10;
    curve.rows.reserve(n_freq);
    for (std::size_t f = 0; f < n_freq; ++f) {
        ComplexAccumulator s11, s22, s12;
        for (const StirState& stir : dataset.stir_states) {
            const Eigen::MatrixXcd& s = stir.records[f].s;
            s11.push(s(0, 0));
            s22.push(s(1, 1));
            s12.push(s(0, 1));
        }
        VarianceCurveRow row;
        row.frequency_hz = dataset.stir_states.front().records[f].frequency_hz;
        row.var_s11 = s11.variance();
        row.var_s22 = s22.variance();
        row.var_s12 = s12.variance();
        row.predicted_var_s12 = 0.5 * std::sqrt(row.var_s11 * row.var_s22);
        if (row.var_s12 > 0.0)
            row.rel_residual = std::abs(row.var_s12 - row.predicted_var_s12) / row.var_s12;
        curve.rows.push_back(row);
    }
    return curve;
}

inline std::string variance_curve_csv(const VarianceCurve& curve) {
    std::string out = "freq_hz,var_s11,var_s22,var_s12,predicted_var_s12,rel_residual\n";
    for (const VarianceCurveRow& row : curve.rows) {
        out += format_double(row.frequency_hz);
        out += ',';
        out += format_double(row.var_s11);
        out += ',';
        out += format_double(row.var_s22);
        out += ',';
        out += format_double(row.var_s12);
        out += ',';
        out += format_double(row.predicted_var_s12);
        out += ',';
        out += format_double(row.rel_residual);
        out += '\n';
    }
    return out;
}

// Synthetic stand-in for a mode-stirred measurement: every (stir, frequency)
// cell is an independent SIE draw pushed through the port forms, with
// A^0 = 0 and an optional linear rho(f) ramp. Substream index is
// stir * n_freq + freq, so the dataset is worker-count invariant.
inline SweepDataset synthesize_sweep(const SieConfig& base_config, const PortForms& forms,
                                     std::uint64_t stir_count,
                                     const std::vector<double>& freq_grid_hz,
                                     std::uint64_t seed, double rho_end = 0.0,
                                     int workers = 1) {
    base_config.validate();
    if (forms.wave_dim() != base_config.dimension)
        throw std::invalid_argument("synthesize_sweep: port forms and config dimensions differ");
    if (stir_count < 1) throw std::invalid_argument("synthesize_sweep: need at least one stir state");
    if (freq_grid_hz.empty()) throw std::invalid_argument("synthesize_sweep: empty frequency grid");
    for (std::size_t i = 0; i < freq_grid_hz.size(); ++i) {
        if (!(freq_grid_hz[i] > 0.0))
            throw std::invalid_argument("synthesize_sweep: frequencies must be positive");
        if (i > 0 && freq_grid_hz[i] <= freq_grid_hz[i - 1])
            throw std::invalid_argument("synthesize_sweep: frequency grid must increase");
    }
    const double rho_last = rho_end > 0.0 ? rho_end : base_config.rho;
    const std::size_t n_freq = freq_grid_hz.size();

    auto rho_at = [&](std::size_t f) {
        if (n_freq == 1) return base_config.rho;
        const double t = static_cast<double>(f) / static_cast<double>(n_freq - 1);
        return base_config.rho + (rho_last - base_config.rho) * t;
    };

    std::vector<Eigen::MatrixXcd> cells(stir_count * n_freq);
    parallel_fill(cells, resolve_workers(workers), [&](std::uint64_t idx) {
        const std::size_t f = static_cast<std::size_t>(idx % n_freq);
        SieConfig config = base_config;
        config.rho = rho_at(f);
        RngStream rng(seed, idx);
        return project_perturbation(forms, sample_sie_draw(config, rng)).entries;
    });

    SweepDataset dataset;
    dataset.source = "synthetic";
    dataset.stir_states.reserve(stir_count);
    char label[32];
    for (std::uint64_t m = 0; m < stir_count; ++m) {
        std::snprintf(label, sizeof(label), "stir_%04llu", static_cast<unsigned long long>(m));
        StirState stir;
        stir.label = label;
        stir.records.reserve(n_freq);
        for (std::size_t f = 0; f < n_freq; ++f) {
            NetworkRecord record;
            record.frequency_hz = freq_grid_hz[f];
            record.reference_impedance = 50.0;
            record.s = cells[m * n_freq + f];
            stir.records.push_back(std::move(record));
        }
        dataset.stir_states.push_back(std::move(stir));
    }
    return dataset;
}

// One Touchstone file per stir state, ordered by filename.
inline SweepDataset load_touchstone_directory(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir))
        throw IoError("not a directory: " + dir.string());
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
        if (!entry.is_regular_file()) continue;
        const std::string ext = entry.path().extension().string();
        if (ext.size() >= 3 && (ext[1] == 's' || ext[1] == 'S') &&
            (ext.back() == 'p' || ext.back() == 'P'))
            files.push_back(entry.path());
    }
    if (files.empty()) throw IoError("no .sNp files in directory: " + dir.string());
    std::sort(files.begin(), files.end());

    SweepDataset dataset;
    dataset.source = dir.string();
    dataset.stir_states.reserve(files.size());
    for (const auto& file : files) {
        StirState stir;
        stir.label = file.filename().string();
        stir.records = parse_touchstone(read_file(file), file.filename().string());
        dataset.stir_states.push_back(std::move(stir));
    }
    return dataset;
}

// Writes one .s2p (or .sNp) file per stir state into `dir`.
inline void write_touchstone_directory(const SweepDataset& dataset,
                                       const std::filesystem::path& dir,
                                       TouchstoneFormat format = TouchstoneFormat::RI) {
    std::filesystem::create_directories(dir);
    const int ports = dataset.ports();
    for (const StirState& stir : dataset.stir_states) {
        const std::filesystem::path file =
            dir / (stir.label + ".s" + std::to_string(ports) + "p");
        write_file(file, serialize_touchstone(stir.records, format));
    }
}

// Long-format sweep CSV:
//   freq_hz,stir,s11_re,s11_im,s21_re,s21_im,s12_re,s12_im,s22_re,s22_im
// (2-port, Touchstone v1.0 column order). Used by the `estimate` subcommand.
inline SweepDataset read_sweep_csv(std::string_view text) {
    std::size_t pos = 0;
    int line_number = 0;
    std::map<long long, std::vector<NetworkRecord>> by_stir;
    bool header_seen = false;
    while (pos < text.size()) {
        const std::size_t eol = text.find('\n', pos);
        std::string_view line =
            text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
        pos = eol == std::string_view::npos ? text.size() : eol + 1;
        ++line_number;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        if (!header_seen) {
            header_seen = true;  // header row
            continue;
        }
        std::vector<double> fields;
        std::size_t start = 0;
        while (start <= line.size()) {
            std::size_t comma = line.find(',', start);
            if (comma == std::string_view::npos) comma = line.size();
            double v = 0.0;
            if (!touchstone_detail::parse_number(line.substr(start, comma - start), v))
                throw std::invalid_argument("sweep csv line " + std::to_string(line_number) +
                                            ": invalid numeric field");
            fields.push_back(v);
            start = comma + 1;
        }
        if (fields.size() != 10)
            throw std::invalid_argument("sweep csv line " + std::to_string(line_number) +
                                        ": expected 10 fields, got " + std::to_string(fields.size()));
        NetworkRecord record;
        record.frequency_hz = fields[0];
        record.s.resize(2, 2);
        record.s(0, 0) = Complex(fields[2], fields[3]);
        record.s(1, 0) = Complex(fields[4], fields[5]);
        record.s(0, 1) = Complex(fields[6], fields[7]);
        record.s(1, 1) = Complex(fields[8], fields[9]);
        by_stir[static_cast<long long>(fields[1])].push_back(std::move(record));
    }
    if (by_stir.empty()) throw std::invalid_argument("sweep csv: no data rows");
    SweepDataset dataset;
    dataset.source = "csv";
    for (auto& [stir_id, records] : by_stir) {
        std::sort(records.begin(), records.end(),
                  [](const NetworkRecord& a, const NetworkRecord& b) {
                      return a.frequency_hz < b.frequency_hz;
                  });
        StirState stir;
        stir.label = "stir " + std::to_string(stir_id);
        stir.records = std::move(records);
        dataset.stir_states.push_back(std::move(stir));
    }
    return dataset;
}

}  // namespace isoscatter
