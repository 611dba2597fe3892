#pragma once

#include <CLI11.hpp>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iostream>
#include <json.hpp>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "isoscatter/estimator.hpp"
#include "isoscatter/io.hpp"
#include "isoscatter/multiport.hpp"
#include "isoscatter/parallel.hpp"
#include "isoscatter/sie.hpp"
#include "isoscatter/sphere.hpp"
#include "isoscatter/sweep.hpp"
#include "isoscatter/touchstone.hpp"

namespace isoscatter::cli {

// Exit codes beyond CLI11's own parse/validation codes.
inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitIo = 3;
inline constexpr int kExitData = 4;

// Substream index reserved for port-form generation, far above any sample
// index, so port forms and ensemble draws never share a stream.
inline constexpr std::uint64_t kPortFormsStream = 0x8000000000000000ull;

namespace detail {

// Run manifest: config echo plus output hashes. The worker count is an
// execution detail, not configuration, and stays out so that runs with
// different worker counts produce byte-identical artifacts. No timestamps.
class Manifest {
public:
    Manifest(std::string subcommand, nlohmann::json parameters)
        : subcommand_(std::move(subcommand)), parameters_(std::move(parameters)) {}

    void add_output(const std::filesystem::path& path, std::string_view contents) {
        nlohmann::json entry;
        entry["path"] = path.filename().string();
        entry["bytes"] = contents.size();
        char hash[24];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a64(contents)));
        entry["fnv1a64"] = hash;
        outputs_.push_back(std::move(entry));
    }

    void write(const std::filesystem::path& path) const {
        nlohmann::json doc;
        doc["tool"] = "isoscatter";
        doc["subcommand"] = subcommand_;
        doc["parameters"] = parameters_;
        doc["outputs"] = outputs_;
        write_file(path, doc.dump(2) + "\n");
    }

private:
    std::string subcommand_;
    nlohmann::json parameters_;
    nlohmann::json outputs_ = nlohmann::json::array();
};

inline void write_with_manifest(const std::string& subcommand, const nlohmann::json& parameters,
                                const std::filesystem::path& out_path,
                                const std::string& contents) {
    write_file(out_path, contents);
    Manifest manifest(subcommand, parameters);
    manifest.add_output(out_path, contents);
    manifest.write(out_path.string() + ".manifest.json");
}

// Streams `count` generated rows to a CSV file in fixed-size batches (bounded
// memory for large ensembles), hashing on the fly for the manifest. The batch
// size is a constant, not a function of the worker count, so the bytes are
// worker-count invariant.
inline void stream_rows_csv(const std::string& subcommand, const nlohmann::json& parameters,
                            const std::string& out_path, const std::string& header,
                            std::uint64_t count, int workers,
                            const std::function<std::string(std::uint64_t)>& row_fn) {
    std::ofstream file(out_path, std::ios::binary | std::ios::trunc);
    if (!file) throw IoError("cannot open file for writing: " + out_path);
    std::uint64_t hash_state = 0xcbf29ce484222325ull;
    std::uint64_t total_bytes = 0;
    auto emit = [&](std::string_view chunk) {
        file.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
        for (unsigned char c : chunk) {
            hash_state ^= c;
            hash_state *= 0x100000001b3ull;
        }
        total_bytes += chunk.size();
    };
    emit(header);

    constexpr std::uint64_t kBatch = 1024;
    std::vector<std::string> rows;
    for (std::uint64_t base = 0; base < count; base += kBatch) {
        const std::uint64_t batch = std::min(kBatch, count - base);
        rows.assign(batch, {});
        parallel_fill(rows, workers, [&](std::uint64_t j) { return row_fn(base + j); });
        for (const std::string& row : rows) emit(row);
    }
    file.close();
    if (!file) throw IoError("write failure: " + out_path);

    nlohmann::json entry;
    entry["path"] = std::filesystem::path(out_path).filename().string();
    entry["bytes"] = total_bytes;
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx", static_cast<unsigned long long>(hash_state));
    entry["fnv1a64"] = hash;
    nlohmann::json doc;
    doc["tool"] = "isoscatter";
    doc["subcommand"] = subcommand;
    doc["parameters"] = parameters;
    doc["outputs"] = nlohmann::json::array({entry});
    write_file(out_path + ".manifest.json", doc.dump(2) + "\n");
}

inline std::vector<double> parse_norms(const std::string& text, int ports) {
    if (text.empty()) return std::vector<double>(static_cast<std::size_t>(ports), 1.0);
    std::vector<double> norms;
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) {
        double v = 0.0;
        if (!touchstone_detail::parse_number(item, v) || !(v > 0.0))
            throw std::invalid_argument("--norms: expected positive numbers, got '" + item + "'");
        norms.push_back(v);
    }
    if (static_cast<int>(norms.size()) != ports)
        throw std::invalid_argument("--norms: expected " + std::to_string(ports) + " entries, got " +
                                    std::to_string(norms.size()));
    return norms;
}

inline std::vector<QuadIndex> parse_quadruples(const std::string& text) {
    std::vector<QuadIndex> quads;
    std::stringstream groups(text);
    std::string group;
    while (std::getline(groups, group, ';')) {
        if (group.empty()) continue;
        std::stringstream fields(group);
        std::string field;
        std::vector<int> idx;
        while (std::getline(fields, field, ',')) {
            double v = 0.0;
            if (!touchstone_detail::parse_number(field, v) || v < 1.0 || v != std::floor(v))
                throw std::invalid_argument("--quadruples: expected 1-based integer indices, got '" +
                                            field + "'");
            idx.push_back(static_cast<int>(v));
        }
        if (idx.size() != 4)
            throw std::invalid_argument("--quadruples: each group needs 4 indices (k,l,m,n)");
        quads.push_back(QuadIndex{idx[0], idx[1], idx[2], idx[3]});
    }
    if (quads.empty()) throw std::invalid_argument("--quadruples: no quadruples given");
    return quads;
}

inline std::vector<double> linspace(double lo, double hi, std::size_t count) {
    std::vector<double> grid(count);
    if (count == 1) {
        grid[0] = lo;
        return grid;
    }
    for (std::size_t i = 0; i < count; ++i)
        grid[i] = lo + (hi - lo) * (static_cast<double>(i) / static_cast<double>(count - 1));
    return grid;
}

}  // namespace detail

struct CommonSieFlags {
    int dim = 0;
    double rho = 1.0;
    std::uint64_t count = 10000;
    std::uint64_t seed = 0;
    std::string dist = "fixed";
    int terms = 0;

    SieConfig config(const std::string& mode = "paper") const {
        SieConfig c;
        c.dimension = dim;
        c.rho = rho;
        c.term_count = terms;
        c.eigenvalue_dist = dist == "gaussian" ? EigenvalueDist::complex_gaussian
                                               : EigenvalueDist::fixed_modulus_uniform_phase;
        c.vector_mode = mode == "frame" ? VectorMode::orthonormal_frame
                                        : VectorMode::independent_isotropic;
        return c;
    }
};

// Single entry point behind the `isoscatter` executable. Every subcommand is
// deterministic in (flags, seed): reruns and different worker counts yield
// byte-identical artifacts.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    CLI::App app{"Monte Carlo toolkit for multi-port scattering statistics in isotropic random environments"};
    app.require_subcommand(1);
    app.set_config("--config", "", "Read options from an INI/TOML file (flags override)");
    app.fallthrough();

    int workers = 0;
    app.add_option("--workers", workers, "Worker thread count (env ISOSCATTER_THREADS, default 1)")
        ->envname("ISOSCATTER_THREADS");

    std::vector<std::function<void()>> actions;

    // ---- sample-sphere ------------------------------------------------
    {
        auto* cmd = app.add_subcommand("sample-sphere",
                                       "Sample isotropic unit vectors onto a CSV file");
        auto flags = std::make_shared<IsotropicSampleConfig>();
        auto field = std::make_shared<std::string>("real");
        auto out_path = std::make_shared<std::string>();
        cmd->add_option("--dim", flags->dimension, "Vector dimension")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--field", *field, "Scalar field")
            ->check(CLI::IsMember({"real", "complex"}));
        cmd->add_option("--count", flags->sample_count, "Number of samples")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--seed", flags->seed, "Master seed");
        cmd->add_option("--out", *out_path, "Output CSV path")->required();
        cmd->callback([&, flags, field, out_path] {
            actions.emplace_back([&, flags, field, out_path] {
                flags->field = *field == "complex" ? Field::complex : Field::real;
                flags->validate();
                const int n = flags->dimension;
                std::string header = "index";
                if (flags->field == Field::real) {
                    for (int i = 0; i < n; ++i) header += ",c" + std::to_string(i);
                } else {
                    for (int i = 0; i < n; ++i)
                        header += ",c" + std::to_string(i) + "_re,c" + std::to_string(i) + "_im";
                }
                header += '\n';
                nlohmann::json params{{"dim", n},
                                      {"field", *field},
                                      {"count", flags->sample_count},
                                      {"seed", flags->seed},
                                      {"out", *out_path}};
                detail::stream_rows_csv(
                    "sample-sphere", params, *out_path, header, flags->sample_count,
                    resolve_workers(workers), [&](std::uint64_t i) {
                        RngStream rng(flags->seed, i);
                        std::string row = std::to_string(i);
                        if (flags->field == Field::real) {
                            const RealUnitVector v = sample_real_unit_vector(n, rng);
                            for (int k = 0; k < n; ++k) row += ',' + format_double(v.components[k]);
                        } else {
                            const ComplexUnitVector v = sample_complex_unit_vector(n, rng);
                            for (int k = 0; k < n; ++k) {
                                row += ',' + format_double(v.components[k].real());
                                row += ',' + format_double(v.components[k].imag());
                            }
                        }
                        row += '\n';
                        return row;
                    });
            });
        });
    }

    // ---- gen-ensemble -------------------------------------------------
    {
        auto* cmd = app.add_subcommand("gen-ensemble",
                                       "Sample scattering matrices onto a CSV file");
        auto flags = std::make_shared<CommonSieFlags>();
        auto mode = std::make_shared<std::string>("paper");
        auto out_path = std::make_shared<std::string>();
        cmd->add_option("--dim", flags->dim, "Wave-space dimension")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--rho", flags->rho, "Effective reflection coefficient in (0, 1]");
        cmd->add_option("--count", flags->count, "Ensemble size")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", flags->seed, "Master seed");
        cmd->add_option("--mode", *mode, "Vector mode: paper (independent isotropic) or frame")
            ->check(CLI::IsMember({"paper", "frame"}));
        cmd->add_option("--dist", flags->dist, "Multiplier law: fixed or gaussian")
            ->check(CLI::IsMember({"fixed", "gaussian"}));
        cmd->add_option("--terms", flags->terms, "Rank-one term count (default: dim)");
        cmd->add_option("--out", *out_path, "Output CSV path")->required();
        cmd->callback([&, flags, mode, out_path] {
            actions.emplace_back([&, flags, mode, out_path] {
                const SieConfig config = flags->config(*mode);
                config.validate();
                const int n = config.dimension;
                std::string header = "index";
                for (int k = 1; k <= n; ++k)
                    for (int l = 1; l <= n; ++l) {
                        header += ",s_" + std::to_string(k) + "_" + std::to_string(l) + "_re";
                        header += ",s_" + std::to_string(k) + "_" + std::to_string(l) + "_im";
                    }
                header += '\n';
                nlohmann::json params{{"dim", flags->dim},     {"rho", flags->rho},
                                      {"count", flags->count}, {"seed", flags->seed},
                                      {"mode", *mode},         {"dist", flags->dist},
                                      {"terms", flags->terms}, {"out", *out_path}};
                detail::stream_rows_csv(
                    "gen-ensemble", params, *out_path, header, flags->count,
                    resolve_workers(workers), [&](std::uint64_t i) {
                        RngStream rng(flags->seed, i);
                        const ScatteringMatrix s = sample_sie(config, rng);
                        std::string row = std::to_string(i);
                        for (int k = 0; k < n; ++k)
                            for (int l = 0; l < n; ++l) {
                                row += ',' + format_double(s.entries(k, l).real());
                                row += ',' + format_double(s.entries(k, l).imag());
                            }
                        row += '\n';
                        return row;
                    });
            });
        });
    }

    // ---- moments --------------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "moments", "Covariance report for index quadruples over an ensemble CSV");
        auto in_path = std::make_shared<std::string>();
        auto out_path = std::make_shared<std::string>();
        auto quad_text = std::make_shared<std::string>();
        auto rho = std::make_shared<double>(1.0);
        cmd->add_option("--in", *in_path, "Ensemble CSV from gen-ensemble")->required();
        cmd->add_option("--quadruples", *quad_text,
                        "Semicolon-separated 1-based quadruples, e.g. \"1,2,1,2;1,1,1,1\"")
            ->required();
        cmd->add_option("--rho", *rho, "Rho used to generate the ensemble (for predictions)");
        cmd->add_option("--out", *out_path, "Report CSV path")->required();
        cmd->callback([&, in_path, out_path, quad_text, rho] {
            actions.emplace_back([&, in_path, out_path, quad_text, rho] {
                const std::vector<QuadIndex> quads = detail::parse_quadruples(*quad_text);
                const std::string text = read_file(*in_path);

                int n = 0;
                std::vector<ComplexCovarianceAccumulator> accs(quads.size());
                std::size_t pos = 0;
                bool header = true;
                std::vector<double> fields;
                while (pos < text.size()) {
                    std::size_t eol = text.find('\n', pos);
                    if (eol == std::string_view::npos) eol = text.size();
                    std::string_view line(text.data() + pos, eol - pos);
                    pos = eol + 1;
                    if (line.empty()) continue;
                    if (header) {
                        header = false;
                        continue;
                    }
                    fields.clear();
                    std::size_t start = 0;
                    while (start <= line.size()) {
                        std::size_t comma = line.find(',', start);
                        if (comma == std::string_view::npos) comma = line.size();
                        double v = 0.0;
                        if (!touchstone_detail::parse_number(line.substr(start, comma - start), v))
                            throw std::invalid_argument("moments: invalid numeric field in " +
                                                        *in_path);
                        fields.push_back(v);
                        start = comma + 1;
                    }
                    if (n == 0) {
                        const std::size_t values = fields.size() - 1;
                        n = static_cast<int>(std::lround(std::sqrt(values / 2.0)));
                        if (static_cast<std::size_t>(n) * n * 2 + 1 != fields.size())
                            throw std::invalid_argument(
                                "moments: row width is not 1 + 2*N^2 for any N");
                        for (const QuadIndex& q : quads)
                            for (int idx : {q.k, q.l, q.m, q.n})
                                if (idx < 1 || idx > n)
                                    throw std::invalid_argument(
                                        "moments: quadruple index out of range for N=" +
                                        std::to_string(n));
                    }
                    auto entry = [&](int k, int l) {
                        const std::size_t base =
                            1 + 2 * (static_cast<std::size_t>(k - 1) * n + (l - 1));
                        return Complex(fields[base], fields[base + 1]);
                    };
                    for (std::size_t j = 0; j < quads.size(); ++j)
                        accs[j].push(entry(quads[j].k, quads[j].l), entry(quads[j].m, quads[j].n));
                }
                if (n == 0) throw std::invalid_argument("moments: no data rows in " + *in_path);

                std::string csv = "k,l,m,n,empirical_re,empirical_im,predicted,stderr\n";
                for (std::size_t j = 0; j < quads.size(); ++j) {
                    const QuadIndex& q = quads[j];
                    const Complex emp = accs[j].covariance();
                    double predicted = 0.0;
                    const double base = (*rho) * (*rho) / static_cast<double>(n);
                    if (q.k == q.m && q.l == q.n) predicted += base;
                    if (q.k == q.n && q.l == q.m) predicted += base;
                    csv += std::to_string(q.k) + ',' + std::to_string(q.l) + ',' +
                           std::to_string(q.m) + ',' + std::to_string(q.n) + ',' +
                           format_double(emp.real()) + ',' + format_double(emp.imag()) + ',' +
                           format_double(predicted) + ',' + format_double(accs[j].std_error()) +
                           '\n';
                }
                nlohmann::json params{{"in", *in_path},
                                      {"quadruples", *quad_text},
                                      {"rho", *rho},
                                      {"out", *out_path}};
                detail::write_with_manifest("moments", params, *out_path, csv);
            });
        });
    }

    // ---- perturb --------------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "perturb", "Ensemble variance table of port-level perturbations dA = L S L^T");
        auto flags = std::make_shared<CommonSieFlags>();
        auto ports = std::make_shared<int>(2);
        auto norms_text = std::make_shared<std::string>();
        auto orth = std::make_shared<std::string>("full");
        auto out_path = std::make_shared<std::string>();
        cmd->add_option("--dim", flags->dim, "Wave-space dimension")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--ports", *ports, "Port count")->check(CLI::PositiveNumber);
        cmd->add_option("--rho", flags->rho, "Effective reflection coefficient");
        cmd->add_option("--count", flags->count, "Ensemble size")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", flags->seed, "Master seed");
        cmd->add_option("--norms", *norms_text, "Comma-separated port norms (default: all 1)");
        cmd->add_option("--orthogonality", *orth,
                        "Row orthogonalization: full (Hermitian) or real-part")
            ->check(CLI::IsMember({"full", "real-part"}));
        cmd->add_option("--dist", flags->dist, "Multiplier law: fixed or gaussian")
            ->check(CLI::IsMember({"fixed", "gaussian"}));
        cmd->add_option("--terms", flags->terms, "Rank-one term count (default: dim)");
        cmd->add_option("--out", *out_path, "Variance table CSV path")->required();
        cmd->callback([&, flags, ports, norms_text, orth, out_path] {
            actions.emplace_back([&, flags, ports, norms_text, orth, out_path] {
                const SieConfig config = flags->config();
                const std::vector<double> norms = detail::parse_norms(*norms_text, *ports);
                RngStream forms_rng(flags->seed, kPortFormsStream);
                const PortForms forms = make_orthogonal_port_forms(
                    *ports, flags->dim, norms, forms_rng, *orth == "real-part");
                const VarianceTable table = ensemble_variance(forms, config, flags->count,
                                                              flags->seed, resolve_workers(workers));
                std::string csv = "p,q,empirical_var,predicted_var,std_error,rel_residual\n";
                for (int p = 0; p < table.port_count(); ++p)
                    for (int q = p; q < table.port_count(); ++q) {
                        const double emp = table.empirical(p, q);
                        const double pred = table.predicted(p, q);
                        csv += std::to_string(p + 1) + ',' + std::to_string(q + 1) + ',' +
                               format_double(emp) + ',' + format_double(pred) + ',' +
                               format_double(table.std_error(p, q)) + ',' +
                               format_double(pred > 0.0 ? std::abs(emp - pred) / pred
                                                        : std::numeric_limits<double>::quiet_NaN()) +
                               '\n';
                    }
                nlohmann::json params{{"dim", flags->dim},     {"ports", *ports},
                                      {"rho", flags->rho},     {"count", flags->count},
                                      {"seed", flags->seed},   {"norms", *norms_text},
                                      {"orthogonality", *orth}, {"dist", flags->dist},
                                      {"terms", flags->terms}, {"out", *out_path}};
                detail::write_with_manifest("perturb", params, *out_path, csv);
            });
        });
    }

    // ---- variance-check ---------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "variance-check",
            "Check var(A_pq) = sqrt(var(A_pp) var(A_qq))/2 on a synthetic ensemble");
        auto flags = std::make_shared<CommonSieFlags>();
        auto ports = std::make_shared<int>(2);
        auto norms_text = std::make_shared<std::string>();
        auto out_path = std::make_shared<std::string>("variance-check.csv");
        cmd->add_option("--dim", flags->dim, "Wave-space dimension")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--rho", flags->rho, "Effective reflection coefficient");
        cmd->add_option("--count", flags->count, "Ensemble size")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", flags->seed, "Master seed");
        cmd->add_option("--ports", *ports, "Port count")->check(CLI::PositiveNumber);
        cmd->add_option("--norms", *norms_text, "Comma-separated port norms (default: all 1)");
        cmd->add_option("--out", *out_path, "Output CSV path (default: variance-check.csv)");
        cmd->callback([&, flags, ports, norms_text, out_path] {
            actions.emplace_back([&, flags, ports, norms_text, out_path] {
                const SieConfig config = flags->config();
                const std::vector<double> norms = detail::parse_norms(*norms_text, *ports);
                RngStream forms_rng(flags->seed, kPortFormsStream);
                const PortForms forms =
                    make_orthogonal_port_forms(*ports, flags->dim, norms, forms_rng);
                const VarianceTable table = ensemble_variance(forms, config, flags->count,
                                                              flags->seed, resolve_workers(workers));
                std::string csv = "p,q,var_pp,var_qq,var_pq,predicted_var_pq,rel_residual\n";
                for (int p = 1; p <= table.port_count(); ++p)
                    for (int q = p + 1; q <= table.port_count(); ++q) {
                        const double vpp = table.empirical(p - 1, p - 1);
                        const double vqq = table.empirical(q - 1, q - 1);
                        const double vpq = table.empirical(p - 1, q - 1);
                        const double predicted = 0.5 * std::sqrt(vpp * vqq);
                        csv += std::to_string(p) + ',' + std::to_string(q) + ',' +
                               format_double(vpp) + ',' + format_double(vqq) + ',' +
                               format_double(vpq) + ',' + format_double(predicted) + ',' +
                               format_double(universal_ratio_residual(table, p, q)) + '\n';
                    }
                nlohmann::json params{{"dim", flags->dim},   {"rho", flags->rho},
                                      {"count", flags->count}, {"seed", flags->seed},
                                      {"ports", *ports},     {"norms", *norms_text},
                                      {"out", *out_path}};
                detail::write_with_manifest("variance-check", params, *out_path, csv);
            });
        });
    }

    // ---- estimate --------------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "estimate", "Estimate rho and cross-coupling variances from sweep data");
        auto in_path = std::make_shared<std::string>();
        auto dir_path = std::make_shared<std::string>();
        auto ref_ports = std::make_shared<std::string>("1,2");
        auto dim = std::make_shared<int>(0);
        auto out_path = std::make_shared<std::string>();
        cmd->add_option("--in", *in_path, "Sweep CSV (freq_hz,stir,s11_re,...)");
        cmd->add_option("--dir", *dir_path, "Directory of Touchstone files (one per stir state)");
        cmd->add_option("--ref-ports", *ref_ports, "Port pair p,q (1-based, default 1,2)");
        cmd->add_option("--dim", *dim, "Wave-space dimension N for the sqrt(N)-normalized rho");
        cmd->add_option("--out", *out_path, "Optional per-frequency CSV output");
        cmd->callback([&, in_path, dir_path, ref_ports, dim, out_path] {
            actions.emplace_back([&, in_path, dir_path, ref_ports, dim, out_path] {
                if (in_path->empty() == dir_path->empty())
                    throw std::invalid_argument("estimate: give exactly one of --in or --dir");
                SweepDataset dataset = in_path->empty()
                                           ? load_touchstone_directory(*dir_path)
                                           : read_sweep_csv(read_file(*in_path));
                dataset.validate_common_grid();
                if (dataset.stir_count() < 2)
                    throw std::invalid_argument("estimate: need at least 2 stir states");

                int p = 1, q = 2;
                {
                    std::stringstream ss(*ref_ports);
                    std::string a, b;
                    if (!std::getline(ss, a, ',') || !std::getline(ss, b, ','))
                        throw std::invalid_argument("estimate: --ref-ports expects \"p,q\"");
                    p = std::stoi(a);
                    q = std::stoi(b);
                }
                const int ports = dataset.ports();
                if (p < 1 || q < 1 || p > ports || q > ports || p == q)
                    throw std::invalid_argument("estimate: invalid --ref-ports for a " +
                                                std::to_string(ports) + "-port dataset");

                const std::size_t n_freq = dataset.stir_states.front().records.size();
                std::string csv =
                    "freq_hz,rho_hat,rho_hat_halfwidth,var_spp,var_sqq,var_spq,predicted_var_spq,"
                    "rel_residual\n";
                std::vector<double> rho_hats, residuals, var_pp, var_qq, var_pq, predicted;
                for (std::size_t f = 0; f < n_freq; ++f) {
                    std::vector<Complex> spp, sqq, spq;
                    for (const StirState& stir : dataset.stir_states) {
                        const Eigen::MatrixXcd& s = stir.records[f].s;
                        spp.push_back(s(p - 1, p - 1));
                        sqq.push_back(s(q - 1, q - 1));
                        spq.push_back(s(p - 1, q - 1));
                    }
                    const CouplingEstimate est = estimate_coupling(spp, sqq, spq);
                    rho_hats.push_back(est.rho_hat);
                    if (est.empirical_var_pq > 0.0) residuals.push_back(est.relative_residual);
                    var_pp.push_back(complex_variance(spp));
                    var_qq.push_back(complex_variance(sqq));
                    var_pq.push_back(est.empirical_var_pq);
                    predicted.push_back(est.predicted_var_pq);
                    csv += format_double(dataset.stir_states.front().records[f].frequency_hz) +
                           ',' + format_double(est.rho_hat) + ',' +
                           format_double(est.rho_hat_halfwidth) + ',' +
                           format_double(var_pp.back()) + ',' + format_double(var_qq.back()) +
                           ',' + format_double(est.empirical_var_pq) + ',' +
                           format_double(est.predicted_var_pq) + ',' +
                           format_double(est.relative_residual) + '\n';
                }
                auto median = [](std::vector<double> v) {
                    if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
                    std::sort(v.begin(), v.end());
                    const std::size_t m = v.size();
                    return m % 2 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
                };
                const double med_rho = median(rho_hats);
                out << "stir states:          " << dataset.stir_count() << "\n";
                out << "frequencies:          " << n_freq << "\n";
                out << "ports (p,q):          " << p << "," << q << "\n";
                out << "median rho_hat:       " << format_double(med_rho)
                    << " (raw, absorbs 1/sqrt(N))\n";
                if (*dim > 0)
                    out << "median rho_hat*sqrt(N): "
                        << format_double(med_rho * std::sqrt(static_cast<double>(*dim))) << "\n";
                out << "median var(S_pp):     " << format_double(median(var_pp)) << "\n";
                out << "median var(S_qq):     " << format_double(median(var_qq)) << "\n";
                out << "median var(S_pq):     " << format_double(median(var_pq))
                    << "  (predicted sqrt(var_pp var_qq)/2: " << format_double(median(predicted))
                    << ")\n";
                out << "median rel residual:  " << format_double(median(residuals)) << "\n";
                if (dataset.stir_count() < 10)
                    err << "warning: fewer than 10 stir states; variance estimates are low-confidence\n";

                if (!out_path->empty()) {
                    nlohmann::json params{{"in", *in_path},
                                          {"dir", *dir_path},
                                          {"ref_ports", *ref_ports},
                                          {"dim", *dim},
                                          {"out", *out_path}};
                    detail::write_with_manifest("estimate", params, *out_path, csv);
                }
            });
        });
    }

    // ---- synthesize --------------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "synthesize", "Write a synthetic mode-stirred sweep as a directory of Touchstone files");
        auto flags = std::make_shared<CommonSieFlags>();
        auto ports = std::make_shared<int>(2);
        auto stirs = std::make_shared<std::uint64_t>(100);
        auto freqs = std::make_shared<std::uint64_t>(100);
        auto rho_end = std::make_shared<double>(0.0);
        auto fmin = std::make_shared<double>(1e9);
        auto fmax = std::make_shared<double>(10e9);
        auto out_dir = std::make_shared<std::string>();
        cmd->add_option("--dim", flags->dim, "Wave-space dimension")
            ->required()
            ->check(CLI::PositiveNumber);
        cmd->add_option("--rho", flags->rho, "Effective reflection coefficient (at fmin)");
        cmd->add_option("--rho-end", *rho_end, "Rho at fmax (default: constant rho)");
        cmd->add_option("--stirs", *stirs, "Stir state count")->check(CLI::PositiveNumber);
        cmd->add_option("--freqs", *freqs, "Frequency count")->check(CLI::PositiveNumber);
        cmd->add_option("--fmin", *fmin, "Lowest frequency in Hz");
        cmd->add_option("--fmax", *fmax, "Highest frequency in Hz");
        cmd->add_option("--ports", *ports, "Port count")->check(CLI::PositiveNumber);
        cmd->add_option("--seed", flags->seed, "Master seed");
        cmd->add_option("--out", *out_dir, "Output directory")->required();
        cmd->callback([&, flags, ports, stirs, freqs, rho_end, fmin, fmax, out_dir] {
            actions.emplace_back([&, flags, ports, stirs, freqs, rho_end, fmin, fmax, out_dir] {
                const SieConfig config = flags->config();
                const std::vector<double> norms(static_cast<std::size_t>(*ports), 1.0);
                RngStream forms_rng(flags->seed, kPortFormsStream);
                const PortForms forms =
                    make_orthogonal_port_forms(*ports, flags->dim, norms, forms_rng);
                const std::vector<double> grid = detail::linspace(*fmin, *fmax, *freqs);
                const SweepDataset dataset =
                    synthesize_sweep(config, forms, *stirs, grid, flags->seed, *rho_end,
                                     resolve_workers(workers));

                std::filesystem::create_directories(*out_dir);
                nlohmann::json params{{"dim", flags->dim}, {"rho", flags->rho},
                                      {"rho_end", *rho_end}, {"stirs", *stirs},
                                      {"freqs", *freqs},   {"fmin", *fmin},
                                      {"fmax", *fmax},     {"ports", *ports},
                                      {"seed", flags->seed}, {"out", *out_dir}};
                detail::Manifest manifest("synthesize", params);
                for (const StirState& stir : dataset.stir_states) {
                    const std::string contents = serialize_touchstone(stir.records);
                    const std::filesystem::path file =
                        std::filesystem::path(*out_dir) /
                        (stir.label + ".s" + std::to_string(*ports) + "p");
                    write_file(file, contents);
                    manifest.add_output(file, contents);
                }
                manifest.write(std::filesystem::path(*out_dir) / "run-manifest.json");
            });
        });
    }

    // ---- analyze-touchstone -------------------------------------------------
    {
        auto* cmd = app.add_subcommand(
            "analyze-touchstone",
            "Per-frequency variance curves across the stir states in a directory");
        auto dir_path = std::make_shared<std::string>();
        auto out_path = std::make_shared<std::string>();
        cmd->add_option("--dir", *dir_path, "Directory of .sNp files (one per stir state)")
            ->required();
        cmd->add_option("--out", *out_path, "Output CSV path")->required();
        cmd->callback([&, dir_path, out_path] {
            actions.emplace_back([&, dir_path, out_path] {
                const SweepDataset dataset = load_touchstone_directory(*dir_path);
                const VarianceCurve curve = variance_curve(dataset);
                if (curve.low_confidence)
                    err << "warning: only " << curve.stir_count
                        << " stir states; variance estimates are low-confidence\n";
                nlohmann::json params{{"dir", *dir_path}, {"out", *out_path}};
                detail::write_with_manifest("analyze-touchstone", params, *out_path,
                                            variance_curve_csv(curve));
            });
        });
    }

    // reversed vector, as CLI11's vector overload expects
    std::reverse(args.begin(), args.end());
    try {
        app.parse(args);
    } catch (const CLI::ParseError& e) {
        return app.exit(e, out, err);
    }

    try {
        for (auto& action : actions) action();
        return kExitOk;
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const TouchstoneParseError& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::invalid_argument& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::domain_error& e) {
        err << "error: " << e.what() << "\n";
        return kExitData;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kExitInternal;
    }
}

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout,
               std::ostream& err = std::cerr) {
    std::vector<std::string> args;
    args.reserve(static_cast<std::size_t>(argc > 0 ? argc - 1 : 0));
    for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
    return run(std::move(args), out, err);
}

}  // namespace isoscatter::cli
