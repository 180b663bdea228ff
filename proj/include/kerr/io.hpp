// Artifact formats: Q datasets as CSV with a JSON sidecar, density matrices
// and diagnostics as JSON, atomic file writes, and the FNV-1a content hash
// used by run manifests.
#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>
#include <kerr/errors.hpp>
#include <kerr/measurement.hpp>
#include <kerr/tomography.hpp>

namespace kerr {

inline const char* qkind_name(QKind kind) {
    switch (kind) {
        case QKind::ideal: return "ideal";
        case QKind::signal: return "signal";
        case QKind::sampled: return "sampled";
    }
    throw std::invalid_argument("qkind_name: unknown kind");
}

inline QKind qkind_from_name(const std::string& name) {
    if (name == "ideal") return QKind::ideal;
    if (name == "signal") return QKind::signal;
    if (name == "sampled") return QKind::sampled;
    throw ParseError("unknown dataset kind '" + name + "'");
}

namespace detail {

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline constexpr const char* csv_header = "n,re_alpha,im_alpha,value,kind";

}  // namespace detail

// ---------------------------------------------------------------------------
// Q dataset CSV + sidecar

// One row per (n, grid point), point-minor, matching the grid's row-major
// point order.
inline std::string dataset_to_csv(const QDataset& ds) {
    std::string out = detail::csv_header;
    out += '\n';
    const char* kind = qkind_name(ds.kind);
    for (Eigen::Index k = 0; k < ds.values.rows(); ++k)
        for (Eigen::Index p = 0; p < ds.values.cols(); ++p) {
            out += std::to_string(ds.n_list[std::size_t(k)]);
            out += ',';
            out += detail::format_double(ds.grid.points[std::size_t(p)].real());
            out += ',';
            out += detail::format_double(ds.grid.points[std::size_t(p)].imag());
            out += ',';
            out += detail::format_double(ds.values(k, p));
            out += ',';
            out += kind;
            out += '\n';
        }
    return out;
}

// Same schema; Wigner values carry n = -1 and kind "wigner".
inline std::string wigner_to_csv(const WignerGrid& w) {
    std::string out = detail::csv_header;
    out += '\n';
    for (Eigen::Index p = 0; p < w.values.size(); ++p) {
        out += "-1,";
        out += detail::format_double(w.grid.points[std::size_t(p)].real());
        out += ',';
        out += detail::format_double(w.grid.points[std::size_t(p)].imag());
        out += ',';
        out += detail::format_double(w.values(p));
        out += ",wigner\n";
    }
    return out;
}

inline nlohmann::json grid_to_json(const QGrid& grid) {
    return {{"rows", grid.rows},     {"cols", grid.cols},     {"re_min", grid.re_min},
            {"re_max", grid.re_max}, {"im_min", grid.im_min}, {"im_max", grid.im_max}};
}

inline QGrid grid_from_json(const nlohmann::json& j) {
    try {
        return make_grid(j.at("rows").get<int>(), j.at("cols").get<int>(),
                         j.at("re_min").get<double>(), j.at("re_max").get<double>(),
                         j.at("im_min").get<double>(), j.at("im_max").get<double>());
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("grid sidecar: ") + e.what());
    }
}

inline nlohmann::json dataset_sidecar(const QDataset& ds) {
    return {{"grid", grid_to_json(ds.grid)},
            {"n_list", ds.n_list},
            {"kind", qkind_name(ds.kind)},
            {"p_e", ds.p_e}};
}

// Parses the CSV against its sidecar; the sidecar fixes grid geometry and the
// photon-number blocks, the CSV must agree row by row.
inline QDataset dataset_from_csv(const std::string& csv, const nlohmann::json& sidecar) {
    QDataset ds;
    try {
        ds.grid = grid_from_json(sidecar.at("grid"));
        ds.n_list = sidecar.at("n_list").get<std::vector<int>>();
        ds.kind = qkind_from_name(sidecar.at("kind").get<std::string>());
        ds.p_e = sidecar.value("p_e", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("dataset sidecar: ") + e.what());
    }
    const std::size_t n_points = ds.grid.points.size();
    ds.values.resize(ds.n_list.size(), n_points);

    std::istringstream in(csv);
    std::string line;
    auto chomp = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    if (!std::getline(in, line)) throw ParseError("row 1: empty file");
    chomp(line);
    if (line != detail::csv_header)
        throw ParseError("row 1: expected header '" + std::string(detail::csv_header) + "'");

    std::size_t count = 0;
    const std::size_t total = ds.n_list.size() * n_points;
    for (std::size_t row = 2; std::getline(in, line); ++row) {
        chomp(line);
        if (line.empty()) continue;
        if (count >= total) throw ParseError("row " + std::to_string(row) + ": extra data row");
        const std::size_t k = count / n_points;
        const std::size_t p = count % n_points;

        int n = 0;
        double re = 0.0, im = 0.0, value = 0.0;
        char kind[16] = {0};
        if (std::sscanf(line.c_str(), "%d,%lf,%lf,%lf,%15s", &n, &re, &im, &value, kind) != 5)
            throw ParseError("row " + std::to_string(row) + ": malformed record '" + line + "'");
        if (n != ds.n_list[k])
            throw ParseError("row " + std::to_string(row) + ": expected n=" +
                             std::to_string(ds.n_list[k]) + ", got " + std::to_string(n));
        const cxd alpha = ds.grid.points[p];
        if (std::abs(re - alpha.real()) > 1e-9 || std::abs(im - alpha.imag()) > 1e-9)
            throw ParseError("row " + std::to_string(row) + ": alpha does not match the grid");
        if (kind != std::string(qkind_name(ds.kind)))
            throw ParseError("row " + std::to_string(row) + ": kind mismatch");
        ds.values(Eigen::Index(k), Eigen::Index(p)) = value;
        ++count;
    }
    if (count != total)
        throw ParseError("row " + std::to_string(count + 2) + ": expected " +
                         std::to_string(total) + " data rows, found " + std::to_string(count));
    return ds;
}

// ---------------------------------------------------------------------------
// Density matrix JSON

inline nlohmann::json rho_to_json(const DensityMatrix& rho) {
    const int d = rho.dim();
    std::vector<std::vector<double>> re(d, std::vector<double>(d));
    std::vector<std::vector<double>> im(d, std::vector<double>(d));
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) {
            re[i][j] = rho.mat(i, j).real();
            im[i][j] = rho.mat(i, j).imag();
        }
    return {{"dim", d}, {"re", re}, {"im", im}};
}

inline DensityMatrix rho_from_json(const nlohmann::json& j) {
    try {
        const int d = j.at("dim").get<int>();
        auto re = j.at("re").get<std::vector<std::vector<double>>>();
        auto im = j.at("im").get<std::vector<std::vector<double>>>();
        if (int(re.size()) != d || int(im.size()) != d)
            throw ParseError("density matrix: dim does not match row count");
        DensityMatrix rho;
        rho.mat.resize(d, d);
        for (int i = 0; i < d; ++i) {
            if (int(re[i].size()) != d || int(im[i].size()) != d)
                throw ParseError("density matrix: ragged rows");
            for (int jj = 0; jj < d; ++jj) rho.mat(i, jj) = cxd(re[i][jj], im[i][jj]);
        }
        return rho;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("density matrix JSON: ") + e.what());
    }
}

// ---------------------------------------------------------------------------
// Files and hashing

inline std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : data) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

inline void write_text_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const std::filesystem::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), std::streamsize(content.size()));
        out.flush();
        if (!out) throw std::runtime_error("short write to " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

inline std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace kerr
