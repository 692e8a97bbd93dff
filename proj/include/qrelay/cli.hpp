#ifndef QRELAY_CLI_HPP
#define QRELAY_CLI_HPP

// Command-line front end: config parsing, sweep execution, CSV/SVG output.
// All numeric output uses "%.12g" so identical inputs give identical bytes.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "qrelay/coincidence.hpp"
#include "qrelay/oracle.hpp"

namespace qrelay {

/// One fully resolved run: physical parameters plus the sweep request.
/// The computation is deterministic; there is no random seed to record.
struct RunConfig {
    RelayParams params;
    std::string sweep = "angle"; // "angle", "chi", "distance", or "nmax"
    std::vector<double> grid;    // empty selects the per-sweep default grid
    double alpha_tilde = M_PI / 2;
    std::string out_csv;
    std::string out_svg;
    int workers = 1;
    int max_row_failures = 0; // rows allowed to fail before a nonzero exit
};

namespace config_detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& value, const std::string& where) {
    std::size_t pos = 0;
    double x = 0.0;
    try {
        x = std::stod(value, &pos);
    } catch (const std::exception&) {
        throw ValidationError(where + ": expected a number, got '" + value + "'");
    }
    if (pos != value.size())
        throw ValidationError(where + ": trailing characters in number '" + value + "'");
    return x;
}

inline int parse_int(const std::string& value, const std::string& where) {
    const double x = parse_double(value, where);
    const int i = int(x);
    if (double(i) != x)
        throw ValidationError(where + ": expected an integer, got '" + value + "'");
    return i;
}

inline std::vector<double> parse_grid(const std::string& value, const std::string& where) {
    std::vector<double> out;
    if (value.find(':') != std::string::npos) {
        // start:stop:step, endpoints inclusive up to rounding of the step
        std::vector<std::string> parts;
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ':')) parts.push_back(trim(item));
        if (parts.size() != 3)
            throw ValidationError(where + ": grid range must be start:stop:step");
        const double start = parse_double(parts[0], where);
        const double stop = parse_double(parts[1], where);
        const double step = parse_double(parts[2], where);
        if (!(step > 0.0)) throw ValidationError(where + ": grid step must be > 0");
        if (stop < start) throw ValidationError(where + ": grid stop must be >= start");
        for (int i = 0;; ++i) {
            const double x = start + double(i) * step;
            if (x > stop + 0.5 * step * 1e-9 + 1e-15) break;
            out.push_back(x);
        }
    } else {
        std::stringstream ss(value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (item.empty()) throw ValidationError(where + ": empty grid entry");
            out.push_back(parse_double(item, where));
        }
    }
    if (out.empty()) throw ValidationError(where + ": grid is empty");
    for (std::size_t i = 1; i < out.size(); ++i)
        if (!(out[i] > out[i - 1]))
            throw ValidationError(where + ": grid must be strictly increasing");
    return out;
}

struct ChiSource {
    bool saw_chi = false;
    bool saw_chi_squared = false;

    void note(bool squared, const std::string& where) {
        (squared ? saw_chi_squared : saw_chi) = true;
        if (saw_chi && saw_chi_squared)
            throw ValidationError(where + ": chi and chi_squared are mutually exclusive");
    }
};

inline void set_field(RunConfig& cfg, ChiSource& chi_src, const std::string& key,
                      const std::string& value, const std::string& where) {
    if (key == "n_stations") cfg.params.n_stations = parse_int(value, where);
    else if (key == "chi") {
        chi_src.note(false, where);
        cfg.params.chi = parse_double(value, where);
    } else if (key == "chi_squared") {
        chi_src.note(true, where);
        const double c2 = parse_double(value, where);
        if (c2 < 0.0) throw ValidationError(where + ": chi_squared must be >= 0");
        cfg.params.chi = std::sqrt(c2);
    } else if (key == "eta0") cfg.params.eta0 = parse_double(value, where);
    else if (key == "darkcount") cfg.params.darkcount = parse_double(value, where);
    else if (key == "alpha") cfg.params.alpha_db_per_km = parse_double(value, where);
    else if (key == "alpha0") cfg.params.alpha0_db = parse_double(value, where);
    else if (key == "distance") cfg.params.distance_km = parse_double(value, where);
    else if (key == "n_max") cfg.params.n_max = parse_int(value, where);
    else if (key == "tuple_sum_min") cfg.params.tuple_sum_min = parse_int(value, where);
    else if (key == "tuple_sum_max") cfg.params.tuple_sum_max = parse_int(value, where);
    else if (key == "sweep") {
        if (value != "angle" && value != "chi" && value != "distance" && value != "nmax")
            throw ValidationError(where + ": sweep must be angle, chi, distance, or nmax");
        cfg.sweep = value;
    } else if (key == "grid") cfg.grid = parse_grid(value, where);
    else if (key == "alpha_tilde") cfg.alpha_tilde = parse_double(value, where);
    else if (key == "out_csv") cfg.out_csv = value;
    else if (key == "out_svg") cfg.out_svg = value;
    else if (key == "workers") cfg.workers = parse_int(value, where);
    else if (key == "max_row_failures") cfg.max_row_failures = parse_int(value, where);
    else throw ValidationError(where + ": unknown key '" + key + "'");
}

} // namespace config_detail

/// Parses a key=value document into a RunConfig. Lines may hold several
/// comma-separated assignments; a comma-separated segment without '=' is
/// value text continuing the previous assignment, so "grid = 1,2,3" works.
/// '#' starts a comment. Unknown keys and out-of-range values are rejected
/// with the offending line number.
inline RunConfig parse_config(const std::string& text) {
    using namespace config_detail;
    RunConfig cfg;
    ChiSource chi_src;
    std::stringstream ss(text);
    std::string line;
    for (int lineno = 1; std::getline(ss, line); ++lineno) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        if (trim(line).empty()) continue;
        const std::string where = "line " + std::to_string(lineno);

        std::vector<std::string> records;
        std::stringstream ls(line);
        std::string seg;
        while (std::getline(ls, seg, ',')) {
            if (!records.empty() && seg.find('=') == std::string::npos)
                records.back() += "," + seg;
            else
                records.push_back(seg);
        }
        for (const std::string& rec : records) {
            const auto eq = rec.find('=');
            if (eq == std::string::npos)
                throw ValidationError(where + ": expected key=value, got '" + trim(rec) + "'");
            const std::string key = trim(rec.substr(0, eq));
            const std::string value = trim(rec.substr(eq + 1));
            if (key.empty()) throw ValidationError(where + ": missing key before '='");
            set_field(cfg, chi_src, key, value, where + ", key '" + key + "'");
        }
    }
    validate_params(cfg.params);
    if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
    return cfg;
}

namespace csv_detail {

inline std::string fmt_g(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

inline std::string preamble(const RunConfig& cfg) {
    std::ostringstream os;
    os << "# qrelay sweep\n"
       << "# variable = " << cfg.sweep << "\n"
       << "# n_stations = " << cfg.params.n_stations << "\n"
       << "# chi = " << fmt_g(cfg.params.chi) << "\n"
       << "# eta0 = " << fmt_g(cfg.params.eta0) << "\n"
       << "# darkcount = " << fmt_g(cfg.params.darkcount) << "\n"
       << "# alpha = " << fmt_g(cfg.params.alpha_db_per_km) << "\n"
       << "# alpha0 = " << fmt_g(cfg.params.alpha0_db) << "\n"
       << "# distance = " << fmt_g(cfg.params.distance_km) << "\n"
       << "# n_max = " << cfg.params.n_max << "\n"
       << "# tuple_sum_min = " << cfg.params.tuple_sum_min << "\n"
       << "# tuple_sum_max = " << cfg.params.tuple_sum_max << "\n"
       << "# alpha_tilde = " << fmt_g(cfg.alpha_tilde) << "\n";
    os << "# grid =";
    for (double x : cfg.grid) os << " " << fmt_g(x);
    os << "\n";
    return os.str();
}

inline std::string header(const RunConfig& cfg) {
    return cfg.sweep + ",Q1010,Q0101,Q0110,Q1001,Vmax,Vmin,V\n";
}

// Failed rows keep the eight-column schema with nan data cells.
inline std::string row_line(const SweepRow& row) {
    const double nan = std::nan("");
    const double q1 = row.ok ? row.q.q1010 : nan;
    const double q2 = row.ok ? row.q.q0101 : nan;
    const double q3 = row.ok ? row.q.q0110 : nan;
    const double q4 = row.ok ? row.q.q1001 : nan;
    const double vmax = row.ok ? row.v_max : nan;
    const double vmin = row.ok ? row.v_min : nan;
    const double v = row.ok ? row.v : nan;
    std::ostringstream os;
    os << fmt_g(row.x) << "," << fmt_g(q1) << "," << fmt_g(q2) << "," << fmt_g(q3) << ","
       << fmt_g(q4) << "," << fmt_g(vmax) << "," << fmt_g(vmin) << "," << fmt_g(v) << "\n";
    return os.str();
}

/// Counts the complete, matching data rows already present at `path` so an
/// interrupted sweep resumes after the last fully written grid point. A
/// trailing partial line is discarded by rewriting the valid prefix. Any
/// other mismatch against the expected head or grid is an error: the file
/// belongs to a different configuration and is never silently overwritten.
inline std::size_t resume_rows(const std::string& path, const std::string& head,
                               const std::vector<double>& grid) {
    std::ifstream in(path, std::ios::binary);
    if (!in) return std::size_t(-1); // no file yet
    std::ostringstream buf;
    buf << in.rdbuf();
    const std::string content = buf.str();
    if (content.empty()) return std::size_t(-1);
    if (content.size() < head.size() || content.compare(0, head.size(), head) != 0)
        throw ValidationError("out_csv exists with a different configuration: " + path);

    std::size_t rows = 0;
    std::size_t pos = head.size();
    std::size_t valid_end = pos;
    while (pos < content.size()) {
        const auto nl = content.find('\n', pos);
        if (nl == std::string::npos) break; // partial row, recompute it
        const std::string line = content.substr(pos, nl - pos);
        const auto comma = line.find(',');
        if (rows >= grid.size() || line.substr(0, comma) != fmt_g(grid[rows]))
            throw ValidationError("out_csv exists with a different grid: " + path);
        ++rows;
        pos = nl + 1;
        valid_end = pos;
    }
    if (valid_end != content.size()) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        out.write(content.data(), std::streamsize(valid_end));
        if (!out) throw ValidationError("cannot rewrite out_csv: " + path);
    }
    return rows;
}

} // namespace csv_detail

namespace svg_detail {

struct Series {
    std::string label;
    std::string color;
    std::vector<std::pair<double, double>> pts;
};

inline std::string render(const std::string& x_label, const std::string& y_label,
                          const std::vector<Series>& series) {
    const double w = 720, h = 480, ml = 70, mr = 20, mt = 20, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series)
        for (const auto& [x, y] : s.pts) {
            if (!std::isfinite(x) || !std::isfinite(y)) continue;
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            } else {
                xmin = std::min(xmin, x);
                xmax = std::max(xmax, x);
                ymin = std::min(ymin, y);
                ymax = std::max(ymax, y);
            }
        }
    if (xmax - xmin < 1e-300) xmax = xmin + 1.0;
    const double pad = (ymax - ymin < 1e-300) ? 0.5 : 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    const auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * (w - ml - mr); };
    const auto sy = [&](double y) { return h - mb - (y - ymin) / (ymax - ymin) * (h - mt - mb); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 " << w << " " << h
       << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"" << w << "\" height=\"" << h << "\" fill=\"white\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << h - mb << "\" x2=\"" << w - mr << "\" y2=\""
       << h - mb << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << h - mb
       << "\" stroke=\"black\"/>\n";
    for (int t = 0; t <= 4; ++t) {
        const double fx = xmin + (xmax - xmin) * t / 4.0;
        const double fy = ymin + (ymax - ymin) * t / 4.0;
        os << "<text x=\"" << sx(fx) << "\" y=\"" << h - mb + 16
           << "\" text-anchor=\"middle\">" << csv_detail::fmt_g(fx) << "</text>\n";
        os << "<text x=\"" << ml - 6 << "\" y=\"" << sy(fy) + 4
           << "\" text-anchor=\"end\">" << csv_detail::fmt_g(fy) << "</text>\n";
    }
    os << "<text x=\"" << (ml + w - mr) / 2 << "\" y=\"" << h - 12
       << "\" text-anchor=\"middle\">" << x_label << "</text>\n";
    os << "<text x=\"16\" y=\"" << (mt + h - mb) / 2 << "\" text-anchor=\"middle\" "
       << "transform=\"rotate(-90 16 " << (mt + h - mb) / 2 << ")\">" << y_label
       << "</text>\n";
    int li = 0;
    for (const auto& s : series) {
        os << "<polyline fill=\"none\" stroke=\"" << s.color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : s.pts)
            if (std::isfinite(x) && std::isfinite(y))
                os << sx(x) << "," << sy(y) << " ";
        os << "\"/>\n";
        os << "<text x=\"" << w - mr - 8 << "\" y=\"" << mt + 16 + 16 * li++
           << "\" text-anchor=\"end\" fill=\"" << s.color << "\">" << s.label << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

} // namespace svg_detail

namespace run_detail {

inline std::vector<double> default_grid(const std::string& sweep) {
    if (sweep == "angle") {
        std::vector<double> g;
        for (int i = 0; i <= 64; ++i) g.push_back(double(i) * M_PI / 32.0);
        return g;
    }
    if (sweep == "chi") return config_detail::parse_grid("0.02:0.40:0.02", "default chi grid");
    if (sweep == "distance")
        return config_detail::parse_grid("0:1800:50", "default distance grid");
    return {2.0, 3.0}; // nmax
}

inline SweepRow compute_row(const RunConfig& cfg, double x) {
    if (cfg.sweep == "chi") return sweep_chi(cfg.params, {x}, cfg.alpha_tilde, cfg.workers).rows[0];
    if (cfg.sweep == "distance")
        return sweep_distance(cfg.params, {x}, cfg.alpha_tilde, cfg.workers).rows[0];
    return sweep_nmax(cfg.params, {int(x)}, cfg.alpha_tilde, cfg.workers).rows[0];
}

} // namespace run_detail

struct RunResult {
    int exit_code = 0;
    std::size_t rows_resumed = 0;
    std::size_t rows_failed = 0;
    std::vector<SweepRow> rows; // rows computed in this process only
};

/// Executes one sweep: resolves the grid, resumes a partially written CSV if
/// one exists, computes the remaining rows (appending after each completes),
/// and renders the SVG from the finished CSV. Without out_csv the CSV text
/// goes to stdout.
inline RunResult run_sweep(const RunConfig& cfg_in) {
    RunConfig cfg = cfg_in;
    validate_params(cfg.params);
    if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
    if (cfg.sweep != "angle" && cfg.sweep != "chi" && cfg.sweep != "distance" &&
        cfg.sweep != "nmax")
        throw ValidationError("sweep must be angle, chi, distance, or nmax");
    if (cfg.grid.empty()) cfg.grid = run_detail::default_grid(cfg.sweep);
    for (std::size_t i = 1; i < cfg.grid.size(); ++i)
        if (!(cfg.grid[i] > cfg.grid[i - 1]))
            throw ValidationError("grid must be strictly increasing");
    if (cfg.sweep == "nmax")
        for (double x : cfg.grid)
            if (x != double(int(x)) || int(x) < 1 || int(x) > kMaxNmax)
                throw ValidationError("nmax grid values must be integers in [1, " +
                                      std::to_string(kMaxNmax) + "]");

    const std::string head = csv_detail::preamble(cfg) + csv_detail::header(cfg);

    RunResult result;
    std::ofstream file;
    const bool to_file = !cfg.out_csv.empty();
    if (to_file) {
        const std::size_t done = csv_detail::resume_rows(cfg.out_csv, head, cfg.grid);
        if (done == std::size_t(-1)) {
            file.open(cfg.out_csv, std::ios::binary | std::ios::trunc);
            if (!file) throw ValidationError("cannot open out_csv for writing: " + cfg.out_csv);
            file << head << std::flush;
        } else {
            result.rows_resumed = done;
            file.open(cfg.out_csv, std::ios::binary | std::ios::app);
            if (!file) throw ValidationError("cannot open out_csv for appending: " + cfg.out_csv);
        }
    } else {
        std::fputs(head.c_str(), stdout);
    }

    const auto emit = [&](const SweepRow& row) {
        result.rows.push_back(row);
        if (!row.ok) {
            ++result.rows_failed;
            std::fprintf(stderr, "row %s failed: %s\n", csv_detail::fmt_g(row.x).c_str(),
                         row.error.c_str());
        }
        const std::string line = csv_detail::row_line(row);
        if (to_file)
            file << line << std::flush;
        else
            std::fputs(line.c_str(), stdout);
    };

    if (result.rows_resumed < cfg.grid.size()) {
        if (cfg.sweep == "angle") {
            // One pattern pass serves every angle row; compute the remainder
            // in one block, then append in grid order.
            const std::vector<double> rest(cfg.grid.begin() +
                                               std::ptrdiff_t(result.rows_resumed),
                                           cfg.grid.end());
            const SweepTable t = sweep_angle(cfg.params, cfg.alpha_tilde, rest, cfg.workers);
            for (const SweepRow& row : t.rows) emit(row);
        } else {
            for (std::size_t i = result.rows_resumed; i < cfg.grid.size(); ++i)
                emit(run_detail::compute_row(cfg, cfg.grid[i]));
        }
    }
    if (to_file) file.close();

    if (!cfg.out_svg.empty()) {
        // Plot from the finished CSV so resumed rows are included.
        std::vector<std::vector<double>> data;
        if (to_file) {
            std::ifstream in(cfg.out_csv);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || line.compare(0, cfg.sweep.size(),
                                                                   cfg.sweep) == 0)
                    continue;
                std::vector<double> cells;
                std::stringstream ls(line);
                std::string cell;
                while (std::getline(ls, cell, ',')) cells.push_back(std::atof(cell.c_str()));
                if (cells.size() == 8) data.push_back(cells);
            }
        } else {
            for (const SweepRow& row : result.rows) {
                std::stringstream ls(csv_detail::row_line(row));
                std::string cell;
                std::vector<double> cells;
                while (std::getline(ls, cell, ',')) cells.push_back(std::atof(cell.c_str()));
                data.push_back(cells);
            }
        }
        std::vector<svg_detail::Series> series;
        if (cfg.sweep == "angle") {
            const char* names[4] = {"Q1010", "Q0101", "Q0110", "Q1001"};
            const char* colors[4] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728"};
            for (int c = 0; c < 4; ++c) {
                svg_detail::Series s{names[c], colors[c], {}};
                for (const auto& cells : data) s.pts.emplace_back(cells[0], cells[1 + c]);
                series.push_back(std::move(s));
            }
        } else {
            svg_detail::Series s{"V", "#1f77b4", {}};
            for (const auto& cells : data) s.pts.emplace_back(cells[0], cells[7]);
            series.push_back(std::move(s));
        }
        std::ofstream svg(cfg.out_svg, std::ios::binary | std::ios::trunc);
        if (!svg) throw ValidationError("cannot open out_svg for writing: " + cfg.out_svg);
        svg << svg_detail::render(cfg.sweep, cfg.sweep == "angle" ? "Q" : "V", series);
    }

    if (result.rows_failed > std::size_t(std::max(0, cfg.max_row_failures))) result.exit_code = 2;
    return result;
}

inline int run(const RunConfig& cfg) { return run_sweep(cfg).exit_code; }

namespace cli_detail {

// Raw flag storage plus the CLI11 option handles needed to tell "explicitly
// set" from "default", so flags override the config file only when given.
struct FlagBindings {
    std::string config_path, grid, out_csv, out_svg;
    int n_stations = 0, n_max = 0, ts_min = 0, ts_max = 0, workers = 0, max_fail = 0;
    double chi = 0, chi2 = 0, eta0 = 0, darkcount = 0, alpha = 0, alpha0 = 0, distance = 0;
    double alpha_tilde = 0, delta_tilde = 0;
    CLI::Option *o_config = nullptr, *o_grid = nullptr, *o_out_csv = nullptr,
                *o_out_svg = nullptr, *o_n_stations = nullptr, *o_n_max = nullptr,
                *o_ts_min = nullptr, *o_ts_max = nullptr, *o_workers = nullptr,
                *o_max_fail = nullptr, *o_chi = nullptr, *o_chi2 = nullptr, *o_eta0 = nullptr,
                *o_darkcount = nullptr, *o_alpha = nullptr, *o_alpha0 = nullptr,
                *o_distance = nullptr, *o_alpha_tilde = nullptr, *o_delta_tilde = nullptr;
};

inline void add_common(CLI::App* cmd, FlagBindings& b, bool with_grid) {
    b.o_config = cmd->add_option("--config", b.config_path, "key=value configuration file");
    b.o_n_stations = cmd->add_option("-N,--n-stations", b.n_stations, "relay stations (1-8)");
    b.o_chi = cmd->add_option("--chi", b.chi, "source pair parameter");
    b.o_chi2 = cmd->add_option("--chi-squared", b.chi2, "source pair rate chi^2");
    b.o_eta0 = cmd->add_option("--eta0", b.eta0, "intrinsic detector efficiency");
    b.o_darkcount = cmd->add_option("--darkcount", b.darkcount, "dark-count probability");
    b.o_alpha = cmd->add_option("--alpha", b.alpha, "fibre loss in dB/km");
    b.o_alpha0 = cmd->add_option("--alpha0", b.alpha0, "constant loss per leg in dB");
    b.o_distance = cmd->add_option("--distance", b.distance, "total separation in km");
    b.o_n_max = cmd->add_option("--n-max", b.n_max, "per-mode photon truncation");
    b.o_ts_min = cmd->add_option("--tuple-sum-min", b.ts_min, "min photons per four-tuple");
    b.o_ts_max = cmd->add_option("--tuple-sum-max", b.ts_max, "max photons per four-tuple");
    b.o_alpha_tilde = cmd->add_option("--alpha-tilde", b.alpha_tilde, "a-side rotator angle");
    b.o_workers = cmd->add_option("--workers", b.workers, "worker threads");
    b.o_out_csv = cmd->add_option("--out-csv", b.out_csv, "CSV output path");
    b.o_out_svg = cmd->add_option("--out-svg", b.out_svg, "SVG plot output path");
    b.o_max_fail = cmd->add_option("--max-row-failures", b.max_fail,
                                   "rows allowed to fail before exit code 2");
    if (with_grid)
        b.o_grid = cmd->add_option("--grid", b.grid, "sweep grid: start:stop:step or v1,v2,...");
}

inline RunConfig build_config(const FlagBindings& b, const std::string& sweep) {
    RunConfig cfg;
    config_detail::ChiSource chi_src;
    if (b.o_config->count()) {
        std::ifstream in(b.config_path, std::ios::binary);
        if (!in) throw ValidationError("cannot read config file: " + b.config_path);
        std::ostringstream buf;
        buf << in.rdbuf();
        cfg = parse_config(buf.str());
    }
    if (!sweep.empty()) cfg.sweep = sweep;
    if (b.o_n_stations->count()) cfg.params.n_stations = b.n_stations;
    if (b.o_chi->count()) chi_src.note(false, "--chi"), cfg.params.chi = b.chi;
    if (b.o_chi2->count()) {
        chi_src.note(true, "--chi-squared");
        if (b.chi2 < 0.0) throw ValidationError("--chi-squared must be >= 0");
        cfg.params.chi = std::sqrt(b.chi2);
    }
    if (b.o_eta0->count()) cfg.params.eta0 = b.eta0;
    if (b.o_darkcount->count()) cfg.params.darkcount = b.darkcount;
    if (b.o_alpha->count()) cfg.params.alpha_db_per_km = b.alpha;
    if (b.o_alpha0->count()) cfg.params.alpha0_db = b.alpha0;
    if (b.o_distance->count()) cfg.params.distance_km = b.distance;
    if (b.o_n_max->count()) cfg.params.n_max = b.n_max;
    if (b.o_ts_min->count()) cfg.params.tuple_sum_min = b.ts_min;
    if (b.o_ts_max->count()) cfg.params.tuple_sum_max = b.ts_max;
    if (b.o_alpha_tilde->count()) cfg.alpha_tilde = b.alpha_tilde;
    if (b.o_workers->count()) cfg.workers = b.workers;
    if (b.o_out_csv->count()) cfg.out_csv = b.out_csv;
    if (b.o_out_svg->count()) cfg.out_svg = b.out_svg;
    if (b.o_max_fail->count()) cfg.max_row_failures = b.max_fail;
    if (b.o_grid && b.o_grid->count())
        cfg.grid = config_detail::parse_grid(b.grid, "--grid");
    validate_params(cfg.params);
    if (cfg.workers < 1) throw ValidationError("workers must be >= 1");
    return cfg;
}

inline int cmd_visibility(const RunConfig& cfg) {
    const VisibilityReport rep = visibility(cfg.params, cfg.alpha_tilde, cfg.workers);
    using csv_detail::fmt_g;
    std::printf("Q1010 = %s\n", fmt_g(rep.q1010).c_str());
    std::printf("Q0101 = %s\n", fmt_g(rep.q0101).c_str());
    std::printf("Q0110 = %s\n", fmt_g(rep.q0110).c_str());
    std::printf("Q1001 = %s\n", fmt_g(rep.q1001).c_str());
    std::printf("Vmax = %s\n", fmt_g(rep.v_max).c_str());
    std::printf("Vmin = %s\n", fmt_g(rep.v_min).c_str());
    std::printf("V = %s\n", fmt_g(rep.visibility).c_str());
    if (!cfg.out_csv.empty()) {
        RunConfig one = cfg;
        one.sweep = "angle";
        one.grid = {cfg.alpha_tilde};
        const std::string head = csv_detail::preamble(one) + csv_detail::header(one);
        SweepRow row;
        row.x = cfg.alpha_tilde;
        sweep_detail::fill_row(row, QSet{rep.q1010, rep.q0101, rep.q0110, rep.q1001});
        std::ofstream out(cfg.out_csv, std::ios::binary | std::ios::trunc);
        if (!out) throw ValidationError("cannot open out_csv for writing: " + cfg.out_csv);
        out << head << csv_detail::row_line(row);
    }
    return 0;
}

inline int cmd_oracle_check(const RunConfig& cfg, double delta_tilde) {
    const RotatorAngles angles{cfg.alpha_tilde, delta_tilde};
    const std::vector<ClickTuple> clicks(cfg.params.bell_measurements(), kSingletClicksHV);
    const CoincidenceContext ctx(cfg.params, clicks, cfg.workers);
    const QSet fast = ctx.class_probs(angles);
    const QSet slow = oracle_relay(cfg.params, angles, clicks).q;
    using csv_detail::fmt_g;
    double worst = 0.0;
    const auto report = [&](const char* name, double a, double b) {
        worst = std::max(worst, std::abs(a - b));
        std::printf("%s closed=%s oracle=%s diff=%s\n", name, fmt_g(a).c_str(), fmt_g(b).c_str(),
                    fmt_g(a - b).c_str());
    };
    report("Q1010", fast.q1010, slow.q1010);
    report("Q0101", fast.q0101, slow.q0101);
    report("Q0110", fast.q0110, slow.q0110);
    report("Q1001", fast.q1001, slow.q1001);
    std::printf("max_abs_diff = %s\n", fmt_g(worst).c_str());
    if (worst > 1e-9) {
        std::fprintf(stderr, "oracle-check failed: max diff %s exceeds 1e-9\n",
                     fmt_g(worst).c_str());
        return 2;
    }
    return 0;
}

} // namespace cli_detail

/// Full command-line entry point; `args` excludes the program name.
/// Exit codes: 0 success, 1 validation error, 2 computational error.
inline int run_cli(const std::vector<std::string>& args) {
    CLI::App app{"post-selected coincidence and visibility calculator for "
                 "entanglement-swapping photon relays"};
    app.require_subcommand(1);

    using cli_detail::FlagBindings;
    FlagBindings b_vis, b_angle, b_chi, b_dist, b_nmax, b_oracle;
    CLI::App* c_vis = app.add_subcommand("visibility", "Q classes and V at equal rotator angles");
    cli_detail::add_common(c_vis, b_vis, false);
    CLI::App* c_angle = app.add_subcommand("sweep-angle", "Q classes vs d-side rotator angle");
    cli_detail::add_common(c_angle, b_angle, true);
    CLI::App* c_chi = app.add_subcommand("sweep-chi", "visibility vs source brightness");
    cli_detail::add_common(c_chi, b_chi, true);
    CLI::App* c_dist = app.add_subcommand("sweep-distance", "visibility vs total distance");
    cli_detail::add_common(c_dist, b_dist, true);
    CLI::App* c_nmax = app.add_subcommand("compare-nmax", "visibility at each truncation level");
    cli_detail::add_common(c_nmax, b_nmax, true);
    CLI::App* c_oracle =
        app.add_subcommand("oracle-check", "closed form vs brute-force simulator (N <= 2)");
    cli_detail::add_common(c_oracle, b_oracle, false);
    b_oracle.o_delta_tilde =
        c_oracle->add_option("--delta-tilde", b_oracle.delta_tilde, "d-side rotator angle");

    std::vector<const char*> argv;
    argv.push_back("qrelay");
    for (const std::string& a : args) argv.push_back(a.c_str());
    try {
        app.parse(int(argv.size()), argv.data());
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (app.got_subcommand(c_vis))
            return cli_detail::cmd_visibility(cli_detail::build_config(b_vis, ""));
        if (app.got_subcommand(c_angle))
            return run(cli_detail::build_config(b_angle, "angle"));
        if (app.got_subcommand(c_chi)) return run(cli_detail::build_config(b_chi, "chi"));
        if (app.got_subcommand(c_dist)) return run(cli_detail::build_config(b_dist, "distance"));
        if (app.got_subcommand(c_nmax)) {
            RunConfig cfg = cli_detail::build_config(b_nmax, "nmax");
            if (cfg.grid.empty()) cfg.grid = {2.0, 3.0};
            return run(cfg);
        }
        if (app.got_subcommand(c_oracle)) {
            const RunConfig cfg = cli_detail::build_config(b_oracle, "");
            const double delta =
                b_oracle.o_delta_tilde->count() ? b_oracle.delta_tilde : cfg.alpha_tilde;
            return cli_detail::cmd_oracle_check(cfg, delta);
        }
    } catch (const ValidationError& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 2;
    }
    return 1; // unreachable with require_subcommand(1)
}

} // namespace qrelay

#endif // QRELAY_CLI_HPP
