#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include <unistd.h>

#include "json.hpp"
#include "lattice.hpp"
#include "moyal.hpp"
#include "torus.hpp"

namespace nctorus {

using json = nlohmann::json;

// ---- theta from JSON ------------------------------------------------------

/// A JSON integer is exact, a JSON string is "p/q" or a decimal literal, and a
/// JSON float stays floating.
inline ThetaEntry theta_entry_from_json(const json& v) {
    if (v.is_number_integer()) return Rational(v.get<std::int64_t>());
    if (v.is_number_float()) return v.get<double>();
    if (v.is_string()) return parse_theta_entry(v.get<std::string>());
    throw ConfigError("theta entry must be a number or a string, got " + v.dump());
}

inline json theta_entry_to_json(const ThetaEntry& e) {
    if (std::holds_alternative<Rational>(e)) return entry_string(e);
    return std::get<double>(e);
}

/// Full square matrix given as an array of rows.
inline SkewMatrix theta_from_json(const json& v) {
    if (!v.is_array() || v.empty()) throw ConfigError("theta must be a non-empty array of rows");
    std::vector<std::vector<ThetaEntry>> rows;
    for (const auto& row : v) {
        if (!row.is_array()) throw ConfigError("theta rows must be arrays");
        auto& out = rows.emplace_back();
        for (const auto& e : row) out.push_back(theta_entry_from_json(e));
    }
    return SkewMatrix(std::move(rows));
}

inline json theta_to_json(const SkewMatrix& t) {
    json rows = json::array();
    for (std::size_t i = 0; i < t.dim(); ++i) {
        json row = json::array();
        for (std::size_t j = 0; j < t.dim(); ++j) row.push_back(theta_entry_to_json(t.entry(i, j)));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- elements -------------------------------------------------------------

inline LatticePoint point_from_json(const json& v, std::size_t n) {
    if (!v.is_array() || v.size() != n) throw DimensionError("lattice point must have " + std::to_string(n) + " entries");
    LatticePoint p(n);
    for (std::size_t i = 0; i < n; ++i) p[i] = v[i].get<std::int64_t>();
    return p;
}

inline json point_to_json(const LatticePoint& p) {
    json out = json::array();
    for (std::size_t i = 0; i < p.size(); ++i) out.push_back(p[i]);
    return out;
}

/// {"theta": [[...]], "terms": [{"k": [...], "re": x, "im": y}, ...]}, terms in lattice order.
inline json element_to_json(const TorusElement& a) {
    json terms = json::array();
    for (const auto& [k, c] : a.coeffs()) terms.push_back({{"k", point_to_json(k)}, {"re", c.real()}, {"im", c.imag()}});
    return {{"theta", theta_to_json(a.theta())}, {"terms", std::move(terms)}};
}

inline TorusElement element_from_json(const json& v, const SkewMatrix& theta) {
    TorusElement a(theta);
    for (const auto& t : v.at("terms"))
        a.add(point_from_json(t.at("k"), theta.dim()), Complex(t.value("re", 0.0), t.value("im", 0.0)));
    return a;
}

inline TorusElement element_from_json(const json& v) { return element_from_json(v, theta_from_json(v.at("theta"))); }

inline json moyal_to_json(const MoyalMatrix& a) {
    json digits = json::array();
    const Eigen::MatrixXcd d = a.dense();
    for (Eigen::Index i = 0; i < d.rows(); ++i)
        for (Eigen::Index j = 0; j < d.cols(); ++j)
            if (d(i, j) != Complex{}) digits.push_back({{"row", i}, {"col", j}, {"re", d(i, j).real()}, {"im", d(i, j).imag()}});
    return {{"N", a.half_dim()}, {"M", a.truncation()}, {"theta", a.theta()}, {"tail_mass", a.tail_mass()},
            {"entries", std::move(digits)}};
}

// ---- CSV ------------------------------------------------------------------

inline std::string format_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// RFC-4180 table with a mandatory header and LF line endings.
class CsvTable {
public:
    using Cell = std::variant<std::string, double, std::int64_t>;

    explicit CsvTable(std::vector<std::string> header) : width_(header.size()) {
        if (header.empty()) throw ConfigError("CSV header must not be empty");
        append(header);
    }

    void add_row(const std::vector<Cell>& cells) {
        if (cells.size() != width_) throw ShapeError("CSV row has " + std::to_string(cells.size()) + " cells, header has " +
                                                     std::to_string(width_));
        std::vector<std::string> text;
        text.reserve(cells.size());
        for (const auto& c : cells)
            text.push_back(std::visit([](const auto& v) -> std::string {
                using T = std::decay_t<decltype(v)>;
                if constexpr (std::is_same_v<T, std::string>) return v;
                else if constexpr (std::is_same_v<T, double>) return format_double(v);
                else return std::to_string(v);
            }, c));
        append(text);
    }

    std::size_t rows() const noexcept { return rows_ - 1; }
    const std::string& str() const noexcept { return body_; }

    static std::string quote(const std::string& field) {
        if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
        std::string out = "\"";
        for (char ch : field) {
            if (ch == '"') out += '"';
            out += ch;
        }
        return out + '"';
    }

private:
    void append(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) body_ += ',';
            body_ += quote(fields[i]);
        }
        body_ += '\n';
        ++rows_;
    }

    std::size_t width_;
    std::size_t rows_ = 0;
    std::string body_;
};

/// Writes to a sibling temp file and renames it over the target, so readers
/// never see a half-written artifact.
inline void write_atomic(const std::filesystem::path& path, const std::string& content) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    fs::path tmp = path;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw ConfigError("cannot open " + tmp.string() + " for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        out.flush();
        if (!out) throw ConfigError("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw ConfigError("cannot rename into " + path.string() + ": " + ec.message());
    }
}

} // namespace nctorus
