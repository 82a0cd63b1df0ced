#pragma once

// Experiment kinds behind `nctorus run`, and the acceptance criteria behind
// `nctorus verify-all`. Everything here is deterministic given the seed: random
// draws come from one mt19937_64 per experiment, parallel work writes into
// preallocated slots, and CSV rows are emitted in a fixed order.

#include <chrono>
#include <cmath>
#include <array>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "covering.hpp"
#include "gaussian.hpp"
#include "io.hpp"
#include "moyal.hpp"
#include "parallel.hpp"
#include "periodize.hpp"
#include "torus.hpp"

namespace nctorus {

struct Check {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
    std::string relation = "<=";
    bool pass = false;
};

inline Check at_most(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, "<=", value <= threshold};
}
inline Check less_than(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, "<", value < threshold};
}
inline Check at_least(std::string name, double value, double threshold) {
    return {std::move(name), value, threshold, ">=", value >= threshold};
}

struct ExperimentResult {
    ExperimentResult(std::string k, CsvTable t) : kind(std::move(k)), table(std::move(t)) {}

    std::string kind;
    CsvTable table;
    json summary = json::object();
    std::vector<Check> checks;

    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

inline json checks_to_json(const std::vector<Check>& checks) {
    json out = json::array();
    for (const auto& c : checks)
        out.push_back({{"check", c.name}, {"value", c.value}, {"relation", c.relation}, {"threshold", c.threshold},
                       {"pass", c.pass}});
    return out;
}

// ---- parameter access -------------------------------------------------------

/// Typed view of a "params" object. Every lookup validates type and range and
/// names the offending key in the ConfigError.
class Params {
public:
    explicit Params(const json& j) : j_(j.is_null() ? json::object() : j) {
        if (!j_.is_object()) throw ConfigError("params must be a JSON object");
    }

    bool has(const std::string& key) const { return j_.contains(key); }
    const json& raw(const std::string& key) const {
        if (!has(key)) throw ConfigError("missing parameter '" + key + "'");
        return j_.at(key);
    }

    std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo, std::int64_t hi) const {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number_integer()) throw ConfigError("parameter '" + key + "' must be an integer");
        const auto x = v.get<std::int64_t>();
        if (x < lo || x > hi)
            throw ConfigError("parameter '" + key + "' = " + std::to_string(x) + " outside [" + std::to_string(lo) + ", " +
                              std::to_string(hi) + "]");
        return x;
    }

    double real(const std::string& key, double def, double lo, double hi) const {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_number()) throw ConfigError("parameter '" + key + "' must be a number");
        const double x = v.get<double>();
        if (!(x >= lo && x <= hi))
            throw ConfigError("parameter '" + key + "' = " + format_double(x) + " outside [" + format_double(lo) + ", " +
                              format_double(hi) + "]");
        return x;
    }

    ThetaEntry entry(const std::string& key, ThetaEntry def) const { return has(key) ? theta_entry_from_json(j_.at(key)) : def; }

    std::vector<std::int64_t> integers(const std::string& key, std::vector<std::int64_t> def, std::int64_t lo,
                                       std::int64_t hi) const {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_array() || v.empty()) throw ConfigError("parameter '" + key + "' must be a non-empty integer array");
        std::vector<std::int64_t> out;
        for (const auto& e : v) {
            if (!e.is_number_integer()) throw ConfigError("parameter '" + key + "' must contain integers");
            const auto x = e.get<std::int64_t>();
            if (x < lo || x > hi) throw ConfigError("parameter '" + key + "' entry " + std::to_string(x) + " out of range");
            out.push_back(x);
        }
        return out;
    }

    std::vector<double> reals(const std::string& key, std::vector<double> def) const {
        if (!has(key)) return def;
        const auto& v = j_.at(key);
        if (!v.is_array()) throw ConfigError("parameter '" + key + "' must be an array of numbers");
        std::vector<double> out;
        for (const auto& e : v) {
            if (!e.is_number()) throw ConfigError("parameter '" + key + "' must contain numbers");
            out.push_back(e.get<double>());
        }
        return out;
    }

    SkewMatrix matrix(const std::string& key) const { return theta_from_json(raw(key)); }

private:
    json j_;
};

namespace detail {

inline std::size_t to_size(std::int64_t v) { return static_cast<std::size_t>(v); }

inline TorusElement draw_element(const SkewMatrix& theta, std::int64_t radius, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::bernoulli_distribution keep(0.6);
    TorusElement a(theta);
    for (const auto& k : window_sum(radius, theta.dim()))
        if (keep(rng)) a.add(k, Complex(u(rng), u(rng)));
    if (a.empty()) a.add(LatticePoint(theta.dim()), 1.0);
    return a;
}

inline double l1_diff(const TorusElement& a, const TorusElement& b) { return l1_bound(a - b); }

inline double max_coeff_diff(const TorusElement& a, const TorusElement& b) {
    const TorusElement diff = a - b;
    double m = 0.0;
    for (const auto& [k, c] : diff.coeffs()) m = std::max(m, std::abs(c));
    return m;
}

} // namespace detail

// ---- candidates in the Gaussian family ---------------------------------------

/// The rank-one projection f_00 (tensor N) for Theta = theta J on the exp(2 pi i k.x) scale.
inline Gaussian f00_gaussian(std::size_t N, double theta) {
    if (!(theta > 0.0)) throw DomainError("f00 needs theta > 0");
    const std::size_t d = 2 * N;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)) *
                              (2.0 * std::numbers::pi / theta);
    return Gaussian::centered(A, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(d)), Polynomial::constant(d, 1.0),
                              std::pow(2.0, static_cast<double>(N)));
}

/// "f00" | "standard" | "zero" | {"A": [[...]], "mu": [...], "amplitude": x | [re, im],
/// "poly": [{"exp": [...], "re": x, "im": y}, ...]}.
inline Gaussian candidate_from_json(const json& v, std::size_t N, double theta) {
    const std::size_t d = 2 * N;
    if (v.is_string()) {
        const auto name = v.get<std::string>();
        if (name == "f00") return f00_gaussian(N, theta);
        if (name == "standard") return Gaussian::standard(d);
        if (name == "zero") return Gaussian::zero(d);
        throw ConfigError("unknown candidate '" + name + "'");
    }
    if (!v.is_object()) throw ConfigError("candidate must be a name or an object");
    const auto n = static_cast<Eigen::Index>(d);
    Eigen::MatrixXd A(n, n);
    const auto& rows = v.at("A");
    if (!rows.is_array() || rows.size() != d) throw DimensionError("candidate A must be " + std::to_string(d) + "x" + std::to_string(d));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& row = rows[static_cast<std::size_t>(i)];
        if (!row.is_array() || row.size() != d) throw DimensionError("candidate A row has wrong length");
        for (Eigen::Index j = 0; j < n; ++j) A(i, j) = row[static_cast<std::size_t>(j)].get<double>();
    }
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(n);
    if (v.contains("mu")) {
        const auto& m = v.at("mu");
        if (!m.is_array() || m.size() != d) throw DimensionError("candidate mu has wrong length");
        for (Eigen::Index i = 0; i < n; ++i) mu[i] = m[static_cast<std::size_t>(i)].get<double>();
    }
    Complex amp{1.0, 0.0};
    if (v.contains("amplitude")) {
        const auto& a = v.at("amplitude");
        amp = a.is_array() ? Complex(a.at(0).get<double>(), a.at(1).get<double>()) : Complex(a.get<double>(), 0.0);
    }
    Polynomial P = Polynomial::constant(d, 1.0);
    if (v.contains("poly")) {
        P = Polynomial(d);
        for (const auto& t : v.at("poly")) {
            const auto e = t.at("exp").get<std::vector<int>>();
            if (e.size() != d) throw DimensionError("polynomial exponent has wrong length");
            for (int x : e)
                if (x < 0) throw ConfigError("polynomial exponents must be nonnegative");
            P.add(e, Complex(t.value("re", 0.0), t.value("im", 0.0)));
        }
    }
    return Gaussian::centered(A, mu, std::move(P), amp);
}

// ---- experiment kinds --------------------------------------------------------

/// Associativity, involution anti-homomorphism and the generator relations of
/// the torus product on random finitely supported elements.
inline ExperimentResult star_check(const json& params, std::uint64_t seed, unsigned threads = 1) {
    const Params p(params);
    std::vector<SkewMatrix> thetas;
    if (p.has("thetas")) {
        for (const auto& t : p.raw("thetas")) thetas.push_back(theta_from_json(t));
        if (thetas.empty()) throw ConfigError("'thetas' must not be empty");
    } else {
        thetas.push_back(p.has("theta") ? p.matrix("theta") : SkewMatrix::planar(Rational(1, 3)));
    }
    const auto radius = p.integer("radius", 4, 0, 6);
    const auto samples = detail::to_size(p.integer("samples", 1000, 1, 100000));

    ExperimentResult r{"star-check", CsvTable({"theta", "sample", "assoc_residual", "involution_residual"})};
    std::mt19937_64 rng(seed);
    double assoc = 0.0, invol = 0.0, gen = 0.0;
    std::size_t row = 0;
    for (std::size_t t = 0; t < thetas.size(); ++t) {
        const auto& theta = thetas[t];
        // share the sample budget across the matrices
        const std::size_t count = samples / thetas.size() + (t < samples % thetas.size() ? 1 : 0);
        std::vector<std::array<TorusElement, 3>> triples;
        for (std::size_t s = 0; s < count; ++s)
            triples.push_back({detail::draw_element(theta, radius, rng), detail::draw_element(theta, radius, rng),
                               detail::draw_element(theta, radius, rng)});
        std::vector<std::pair<double, double>> res(count);
        parallel_for(count, threads, [&](std::size_t s) {
            const auto& [a, b, c] = triples[s];
            const auto ab = a * b;
            res[s] = {detail::l1_diff(ab * c, a * (b * c)), detail::l1_diff(involution(ab), involution(b) * involution(a))};
        });
        for (std::size_t s = 0; s < count; ++s) {
            r.table.add_row({theta.str(), static_cast<std::int64_t>(row++), res[s].first, res[s].second});
            assoc = std::max(assoc, res[s].first);
            invol = std::max(invol, res[s].second);
        }
        // U_i U_j = e^{-2 pi i theta_ij} U_j U_i
        for (std::size_t i = 0; i < theta.dim(); ++i)
            for (std::size_t j = 0; j < theta.dim(); ++j) {
                const auto ui = TorusElement::generator(theta, i), uj = TorusElement::generator(theta, j);
                const auto lhs = ui * uj;
                const auto rhs = std::polar(1.0, -2.0 * std::numbers::pi * theta(i, j)) * (uj * ui);
                gen = std::max(gen, detail::max_coeff_diff(lhs, rhs));
            }
    }
    r.checks = {at_most("associativity_l1", assoc, 1e-10), at_most("involution_l1", invol, 1e-10),
                at_most("generator_relation", gen, 1e-12)};
    r.summary = {{"samples", samples}, {"radius", radius}};
    return r;
}

/// Orthonormality of the GNS basis and the trace property on random pairs.
inline ExperimentResult trace_check(const json& params, std::uint64_t seed, unsigned threads = 1) {
    const Params p(params);
    const SkewMatrix theta = p.has("theta") ? p.matrix("theta") : SkewMatrix::planar(Rational(2, 7));
    const auto radius = p.integer("radius", 4, 0, 6);
    const auto samples = detail::to_size(p.integer("samples", 1000, 1, 100000));
    const auto window = p.integer("window", 3, 0, 5);

    // <U_k, U_l> for every pair in the window, compared with delta_kl exactly.
    std::int64_t mismatches = 0;
    for (const auto& k : window_sum(window, theta.dim()))
        for (const auto& l : window_sum(window, theta.dim())) {
            const Complex v = gns_inner(TorusElement::basis(theta, k), TorusElement::basis(theta, l));
            if (v != Complex(k == l ? 1.0 : 0.0, 0.0)) ++mismatches;
        }

    ExperimentResult r{"trace-check", CsvTable({"sample", "trace_commutator", "scale", "relative"})};
    std::mt19937_64 rng(seed);
    std::vector<std::pair<TorusElement, TorusElement>> pairs;
    for (std::size_t s = 0; s < samples; ++s)
        pairs.emplace_back(detail::draw_element(theta, radius, rng), detail::draw_element(theta, radius, rng));
    std::vector<std::array<double, 2>> res(samples);
    parallel_for(samples, threads, [&](std::size_t s) {
        const auto& [a, b] = pairs[s];
        res[s] = {std::abs(trace(a * b) - trace(b * a)), l1_bound(a) * l1_bound(b)};
    });
    double worst = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        const double rel = res[s][0] / res[s][1];
        worst = std::max(worst, rel);
        r.table.add_row({static_cast<std::int64_t>(s), res[s][0], res[s][1], rel});
    }
    r.checks = {at_most("orthonormality_mismatches", static_cast<double>(mismatches), 0.0),
                at_most("tracial_symmetry_relative", worst, 1e-12)};
    return r;
}

/// Lift multiplicativity, group-average fixed points, module decomposition and
/// the sublattice support of the Hilbert-module inner product.
inline ExperimentResult covering_check(const json& params, std::uint64_t seed, unsigned threads = 1) {
    const Params p(params);
    const SkewMatrix base = p.has("theta_base") ? p.matrix("theta_base") : SkewMatrix::planar(Rational(1, 5));
    const SkewMatrix cover = p.has("theta_cover") ? p.matrix("theta_cover") : SkewMatrix::planar(Rational(1, 20));
    const auto k = p.integers("k", {2, 2}, 1, 64);
    const auto samples = detail::to_size(p.integer("samples", 500, 1, 100000));
    const auto radius = p.integer("radius", 2, 0, 5);
    const CoveringMap cov(base, cover, k);
    const auto group = cov.group();
    const double order = static_cast<double>(cov.group_order());

    std::mt19937_64 rng(seed);
    struct Draw {
        TorusElement a, b, x;
    };
    std::vector<Draw> draws;
    for (std::size_t s = 0; s < samples; ++s)
        draws.push_back({detail::draw_element(base, radius, rng), detail::draw_element(base, radius, rng),
                         detail::draw_element(cover, radius + 1, rng)});

    std::vector<std::array<double, 4>> res(samples);
    parallel_for(samples, threads, [&](std::size_t s) {
        const auto& [a, b, x] = draws[s];
        const double scale = l1_bound(a) * l1_bound(b);
        const double lift_res = detail::l1_diff(lift(cov, a * b), lift(cov, a) * lift(cov, b)) / scale;
        // average(x) is fixed by every g, and lifted elements satisfy average = |G| id
        const auto avg = average(cov, x);
        double fixed = 0.0;
        for (const auto& g : group) fixed = std::max(fixed, detail::l1_diff(act(g, avg), avg) / l1_bound(x));
        const auto la = lift(cov, a);
        fixed = std::max(fixed, detail::l1_diff(average(cov, la), order * la) / (order * l1_bound(la)));
        const double round_trip = detail::l1_diff(module_reconstruct(cov, module_decompose(cov, x)), x) / l1_bound(x);
        const auto h = hilbert_inner_detailed(cov, x, lift(cov, b) * x);
        res[s] = {lift_res, fixed, round_trip, h.off_sublattice / std::max(1.0, l1_bound(h.value))};
    });

    ExperimentResult r{"covering-check",
                       CsvTable({"sample", "lift_residual", "fixed_point_residual", "roundtrip_residual", "off_sublattice"})};
    std::array<double, 4> worst{};
    for (std::size_t s = 0; s < samples; ++s) {
        r.table.add_row({static_cast<std::int64_t>(s), res[s][0], res[s][1], res[s][2], res[s][3]});
        for (int i = 0; i < 4; ++i) worst[i] = std::max(worst[i], res[s][i]);
    }
    r.checks = {at_most("lift_multiplicativity", worst[0], 1e-12), at_most("fixed_point_characterization", worst[1], 1e-14),
                at_most("module_roundtrip", worst[2], 1e-12), at_most("hilbert_sublattice", worst[3], 1e-14)};
    r.summary = {{"group_order", cov.group_order()}, {"k", k}};
    return r;
}

/// Theta = 0, n = 1, multiplicity 3: the lift is the dilation p -> 3p with no phases.
inline Check commutative_dilation_check(std::uint64_t seed) {
    const CoveringMap cov(SkewMatrix::zero(1), SkewMatrix::zero(1), {3});
    std::mt19937_64 rng(seed);
    std::int64_t mismatches = 0;
    for (int trial = 0; trial < 50; ++trial) {
        const auto a = detail::draw_element(cov.theta_base(), 6, rng);
        const auto img = lift(cov, a);
        if (img.size() != a.size()) ++mismatches;
        for (const auto& [q, c] : a.coeffs()) {
            LatticePoint q3(1);
            q3[0] = 3 * q[0];
            if (img.coeff(q3) != c) ++mismatches;
        }
    }
    return at_most("commutative_dilation_mismatches", static_cast<double>(mismatches), 0.0);
}

/// Group orders of the tower against m_j^{2N}, and direct lifts against composed ones.
inline ExperimentResult tower_check(const json& params, std::uint64_t seed, unsigned = 1) {
    const Params p(params);
    TowerSpec spec{p.entry("theta0", Rational(2)), p.integers("factors", {2, 3, 2}, 2, 64),
                   detail::to_size(p.integer("N", 1, 1, 4))};
    const auto samples = p.integer("samples", 20, 0, 10000);
    const auto radius = p.integer("radius", 2, 0, 4);
    const auto maps = build_tower(spec);

    std::mt19937_64 rng(seed);
    std::vector<TorusElement> draws;
    for (std::int64_t s = 0; s < samples; ++s) draws.push_back(detail::draw_element(spec.level_theta(0), radius, rng));

    ExperimentResult r{"tower", CsvTable({"level", "m", "group_order", "expected_order", "composite_residual"})};
    double worst = 0.0;
    std::int64_t order_mismatch = 0;
    std::vector<TorusElement> stepped = draws;
    json orders = json::array();
    for (std::size_t j = 1; j <= spec.levels(); ++j) {
        const auto direct = tower_map(spec, 0, j);
        double res = 0.0;
        for (std::size_t s = 0; s < draws.size(); ++s) {
            stepped[s] = lift(maps[j - 1], stepped[s]);
            res = std::max(res, detail::l1_diff(stepped[s], lift(direct, draws[s])) / l1_bound(draws[s]));
        }
        std::int64_t expected = 1;
        for (std::size_t i = 0; i < 2 * spec.half_dim; ++i) expected *= spec.m(j);
        if (direct.group_order() != expected) ++order_mismatch;
        worst = std::max(worst, res);
        orders.push_back(direct.group_order());
        r.table.add_row({static_cast<std::int64_t>(j), spec.m(j), direct.group_order(), expected, res});
    }
    r.checks = {at_most("composite_lift_residual", worst, 1e-12),
                at_most("group_order_mismatches", static_cast<double>(order_mismatch), 0.0)};
    r.summary = {{"group_orders", orders}};
    return r;
}

/// The full oscillator-basis product table f_mn f_kl = delta_nk f_ml, the
/// idempotents f_nn and the involution f_mn* = f_nm.
inline ExperimentResult moyal_table(const json& params, std::uint64_t = 0, unsigned threads = 1) {
    const Params p(params);
    const auto M = detail::to_size(p.integer("M", 8, 1, 64));
    const auto N = detail::to_size(p.integer("N", 1, 1, 3));
    const double theta = p.real("theta", 2.0, 1e-6, 1e6);
    std::size_t side = 1;
    for (std::size_t i = 0; i < N; ++i) side *= M;
    if (side * side * side * side > 2'000'000) throw ConfigError("moyal-table: M^(4N) exceeds 2e6 products");

    MoyalMatrix probe = MoyalMatrix::zero(theta, N, M);
    auto unit = [&](std::size_t a, std::size_t b) {
        const auto da = probe.digits(a), db = probe.digits(b);
        return MoyalMatrix::basis(theta, M, da, db);
    };
    std::vector<MoyalMatrix> units;
    units.reserve(side * side);
    for (std::size_t a = 0; a < side; ++a)
        for (std::size_t b = 0; b < side; ++b) units.push_back(unit(a, b));

    auto max_abs = [](const Eigen::MatrixXcd& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; };
    const std::size_t rows = side * side * side * side;
    std::vector<double> residual(rows);
    parallel_for(side * side, threads, [&](std::size_t mn) {
        const std::size_t n = mn % side;
        for (std::size_t kl = 0; kl < side * side; ++kl) {
            const std::size_t k = kl / side, l = kl % side;
            const Eigen::MatrixXcd got = (units[mn] * units[kl]).dense();
            const Eigen::MatrixXcd want = n == k ? units[(mn / side) * side + l].dense()
                                                 : Eigen::MatrixXcd::Zero(got.rows(), got.cols());
            residual[mn * side * side + kl] = max_abs(got - want);
        }
    });

    ExperimentResult r{"moyal-table", CsvTable({"m", "n", "k", "l", "residual"})};
    double worst = 0.0, idem = 0.0, invol = 0.0;
    for (std::size_t i = 0; i < rows; ++i) {
        const std::size_t mn = i / (side * side), kl = i % (side * side);
        r.table.add_row({static_cast<std::int64_t>(mn / side), static_cast<std::int64_t>(mn % side),
                         static_cast<std::int64_t>(kl / side), static_cast<std::int64_t>(kl % side), residual[i]});
        worst = std::max(worst, residual[i]);
    }
    for (std::size_t a = 0; a < side; ++a) {
        const auto& f = units[a * side + a];
        idem = std::max(idem, max_abs((f * f).dense() - f.dense()));
        for (std::size_t b = 0; b < side; ++b)
            invol = std::max(invol, max_abs(involution(units[a * side + b]).dense() - units[b * side + a].dense()));
    }
    r.checks = {at_most("table_residual", worst, 1e-13), at_most("idempotent_residual", idem, 0.0),
                at_most("involution_residual", invol, 0.0)};
    r.summary = {{"M", M}, {"N", N}, {"theta", theta}, {"products", rows}};
    return r;
}

/// Truncated spectral norm against the calibrated L2 bound on random matrices.
inline ExperimentResult opnorm_check(const json& params, std::uint64_t seed, unsigned threads = 1) {
    const Params p(params);
    const auto M = detail::to_size(p.integer("M", 16, 1, 64));
    const auto N = detail::to_size(p.integer("N", 1, 1, 2));
    const double theta = p.real("theta", 2.0, 1e-3, 1e3);
    const auto samples = detail::to_size(p.integer("samples", 1000, 1, 100000));
    const auto cal = calibrate_f00(theta);

    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g;
    std::vector<MoyalMatrix> mats;
    for (std::size_t s = 0; s < samples; ++s) {
        std::vector<Eigen::MatrixXcd> factors;
        for (std::size_t t = 0; t < N; ++t) {
            Eigen::MatrixXcd m(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
            for (Eigen::Index i = 0; i < m.rows(); ++i)
                for (Eigen::Index j = 0; j < m.cols(); ++j) m(i, j) = Complex(g(rng), g(rng));
            factors.push_back(std::move(m));
        }
        mats.push_back(MoyalMatrix::tensor(theta, std::move(factors)));
    }
    std::vector<OpNormBound> res(samples);
    parallel_for(samples, threads, [&](std::size_t s) { res[s] = opnorm_bound_check(mats[s], cal); });

    ExperimentResult r{"opnorm-check", CsvTable({"sample", "opnorm_trunc", "bound", "ratio"})};
    double excess = -std::numeric_limits<double>::infinity(), ratio = 0.0;
    for (std::size_t s = 0; s < samples; ++s) {
        r.table.add_row({static_cast<std::int64_t>(s), res[s].opnorm_trunc, res[s].bound, res[s].opnorm_trunc / res[s].bound});
        excess = std::max(excess, res[s].opnorm_trunc - res[s].bound);
        ratio = std::max(ratio, res[s].opnorm_trunc / res[s].bound);
    }
    r.checks = {at_most("max_opnorm_minus_bound", excess, 1e-12)};
    r.summary = {{"kappa", cal.kappa}, {"kappa_squared_over_2pi_theta", cal.kappa * cal.kappa / (2.0 * std::numbers::pi * theta)},
                 {"quadrature_change", cal.quadrature_change}, {"max_ratio", ratio}};
    return r;
}

/// The plane-wave scaling identity between *_theta and *_2.
inline ExperimentResult scaling_check(const json& params, std::uint64_t seed, unsigned = 1) {
    const Params p(params);
    const auto samples = p.integer("samples", 200, 1, 100000);
    const auto thetas = p.reals("thetas", {0.5, 2.0, 5.0});
    for (double t : thetas)
        if (!(t > 0.0)) throw ConfigError("'thetas' must be positive");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-4.0, 4.0);
    std::uniform_int_distribution<std::size_t> pick(0, thetas.size() - 1), half(1, 2);
    ExperimentResult r{"scaling-check", CsvTable({"sample", "theta", "N", "residual"})};
    double worst = 0.0;
    for (std::int64_t s = 0; s < samples; ++s) {
        const double theta = thetas[pick(rng)];
        const std::size_t N = half(rng);
        PlaneWave a, b;
        for (std::size_t i = 0; i < 2 * N; ++i) {
            a.k.push_back(u(rng));
            b.k.push_back(u(rng));
        }
        // the identity is linear in the amplitudes, so unit-modulus phases suffice
        a.amplitude = std::polar(1.0, u(rng));
        b.amplitude = std::polar(1.0, u(rng));
        const double res = scaling_identity_check(a, b, theta);
        worst = std::max(worst, res);
        r.table.add_row({s, theta, static_cast<std::int64_t>(N), res});
    }
    r.checks = {at_most("scaling_identity_residual", worst, 1e-12)};
    return r;
}

/// Periodization against the lattice samples of the transform (m = 1) and
/// against direct summation of lattice translates on a grid.
inline ExperimentResult periodize_check(const json& params, std::uint64_t = 0, unsigned = 1) {
    const Params p(params);
    const auto N = detail::to_size(p.integer("N", 1, 1, 2));
    const double theta = p.real("theta", 2.0, 1e-6, 1e6);
    const auto m = p.integer("m", 2, 1, 16);
    const auto grid = p.integer("grid", 9, 2, 64);
    const Gaussian f = p.has("candidate")
                           ? candidate_from_json(p.raw("candidate"), N, theta)
                           : candidate_from_json(json::parse(R"({"A": [[3.2, 0.6], [0.6, 2.1]], "mu": [0.3, -0.2],
                                 "poly": [{"exp": [0, 0], "re": 1.0}, {"exp": [1, 0], "re": 0.5, "im": -0.25},
                                          {"exp": [0, 2], "re": -0.4}]})"),
                                                 N, theta);
    const std::size_t d = 2 * N;

    // m = 1: the level-0 coefficients are the samples of Ff on Z^d
    const LevelElement a1 = periodize(f, 0, 1, 1e-16);
    const Gaussian F = gaussian_ft(f);
    std::vector<double> u(d);
    double sample_err = 0.0;
    for (const auto& [k, c] : a1.coeffs.coeffs()) {
        for (std::size_t i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]);
        sample_err = std::max(sample_err, std::abs(c - F(u)));
    }

    // grid oracle: sum_v f(x + m v) over enough translates, against the wave sum
    const LevelElement am = periodize(f, 1, m, 1e-16);
    ExperimentResult r{"periodize-check", CsvTable({"point", "direct_sum_re", "direct_sum_im", "wave_sum_re", "wave_sum_im", "abs_diff"})};
    double grid_err = 0.0;
    const std::int64_t reach = 8;
    std::vector<double> x(d), y(d);
    std::int64_t idx = 0;
    for (const auto& g : window_sum(grid, d)) {
        bool inside = true;
        for (std::size_t i = 0; i < d; ++i) inside = inside && g[i] >= 0;
        if (!inside) continue;
        for (std::size_t i = 0; i < d; ++i) x[i] = static_cast<double>(m) * static_cast<double>(g[i]) / static_cast<double>(grid);
        Complex direct{};
        for (const auto& v : window_sum(reach, d)) {
            for (std::size_t i = 0; i < d; ++i) y[i] = x[i] + static_cast<double>(m * v[i]);
            direct += f(y);
        }
        const Complex waves = am.value_at(x);
        const double diff = std::abs(direct - waves);
        grid_err = std::max(grid_err, diff);
        r.table.add_row({idx++, direct.real(), direct.imag(), waves.real(), waves.imag(), diff});
    }
    r.checks = {at_most("m1_lattice_samples", sample_err, 1e-12), at_most("grid_summation_oracle", grid_err, 1e-7)};
    r.summary = {{"m1_coefficients", a1.coeffs.size()}, {"m1_tail", a1.tail}, {"m", m}, {"coefficients", am.coeffs.size()},
                 {"tail", am.tail}};
    return r;
}

namespace detail {

inline std::vector<std::vector<double>> delta_grid(const Params& p, std::size_t d) {
    const double dmax = p.real("delta_max", 32.0, 0.0, 1e4);
    const double step = p.real("delta_step", 1.0, 1e-6, 1e4);
    std::vector<double> dir = p.reals("direction", {});
    if (dir.empty()) {
        dir.assign(d, 0.0);
        dir[0] = 1.0;
    }
    if (dir.size() != d) throw DimensionError("'direction' must have " + std::to_string(d) + " entries");
    const double n = detail::vec_norm(dir);
    if (n == 0.0) throw ConfigError("'direction' must be nonzero");
    std::vector<std::vector<double>> out;
    const auto count = static_cast<std::int64_t>(std::floor(dmax / step + 1e-9));
    for (std::int64_t i = 0; i <= count; ++i) {
        std::vector<double> v(d);
        for (std::size_t c = 0; c < d; ++c) v[c] = static_cast<double>(i) * step * dir[c] / n;
        out.push_back(std::move(v));
    }
    return out;
}

inline DecayOptions decay_options(const Params& p, unsigned threads) {
    DecayOptions o;
    const auto window = p.reals("fit_window", {4.0, 32.0});
    if (window.size() != 2 || !(window[0] < window[1])) throw ConfigError("'fit_window' must be [lo, hi] with lo < hi");
    o.fit_lo = window[0];
    o.fit_hi = window[1];
    o.target_slope = p.real("target_slope", -4.0, -1e6, 0.0);
    o.min_r2 = p.real("min_r2", 0.99, 0.0, 1.0);
    o.threads = threads;
    return o;
}

inline void decay_rows(ExperimentResult& r, const DecayTable& t) {
    const double C = t.log_C.empty() ? 0.0 : std::exp(t.log_C.front());
    for (const auto& row : t.rows)
        r.table.add_row({row.delta_norm, std::exp(row.log_value), row.log_value, t.fitted_m(), C, t.fit.r2});
    json cm = json::object();
    for (std::size_t i = 0; i < t.m_list.size(); ++i) cm[std::to_string(t.m_list[i])] = t.log_C[i];
    r.summary = {{"slope", t.fit.slope}, {"intercept", t.fit.intercept}, {"R2", t.fit.r2}, {"fit_points", t.fit.n},
                 {"fit_window", {t.fit_lo, t.fit_hi}}, {"log_C_m", cm}, {"windowed_slopes", windowed_slopes(t, 5)}};
    r.checks = {at_most("fitted_slope", t.fit.slope, t.target_slope), at_least("R2", t.fit.r2, t.min_r2)};
}

} // namespace detail

/// ||a_delta * b||_2 along a ray of translations with the log-log fit.
inline ExperimentResult decay_translate_experiment(const json& params, std::uint64_t = 0, unsigned threads = 1) {
    const Params p(params);
    const auto N = detail::to_size(p.integer("N", 1, 1, 3));
    const ThetaEntry theta = p.entry("theta", Rational(2));
    const Gaussian a = candidate_from_json(p.has("a") ? p.raw("a") : json("standard"), N, entry_value(theta));
    const Gaussian b = candidate_from_json(p.has("b") ? p.raw("b") : json("standard"), N, entry_value(theta));
    const auto m_list = p.integers("m_list", {4}, 0, 1000);
    const auto t = decay_translate(a, b, detail::delta_grid(p, 2 * N), m_list, SkewMatrix::symplectic(N, theta),
                                   detail::decay_options(p, threads));
    ExperimentResult r{"decay-translate", CsvTable({"delta_norm", "l2_norm", "log_l2_norm", "fitted_m", "C_fit", "R2"})};
    detail::decay_rows(r, t);
    return r;
}

/// The l1 coefficient bound of the level-j periodization of a_delta * a.
inline ExperimentResult lattice_decay_experiment(const json& params, std::uint64_t = 0, unsigned threads = 1) {
    const Params p(params);
    const auto N = detail::to_size(p.integer("N", 1, 1, 3));
    const ThetaEntry theta = p.entry("theta", Rational(2));
    const Gaussian a = candidate_from_json(p.has("a") ? p.raw("a") : json("standard"), N, entry_value(theta));
    const TowerSpec spec{theta, p.integers("factors", {2, 2}, 2, 64), N};
    spec.validate();
    const auto j = detail::to_size(p.integer("j", 2, 0, static_cast<std::int64_t>(spec.levels())));
    const auto m_list = p.integers("m_list", {4}, 0, 1000);
    const auto t = lattice_sum_decay(a, detail::delta_grid(p, 2 * N), spec.m(j), SkewMatrix::symplectic(N, theta), m_list,
                                     detail::decay_options(p, threads));
    ExperimentResult r{"lattice-decay", CsvTable({"delta_norm", "l1_bound", "log_l1_bound", "fitted_m", "C_fit", "R2"})};
    detail::decay_rows(r, t);
    r.summary["j"] = j;
    r.summary["m_j"] = spec.m(j);
    return r;
}

/// ||b_j^2 - c_j|| bounds along the tower with certified tails.
inline ExperimentResult square_condition_experiment(const json& params, std::uint64_t = 0, unsigned threads = 1) {
    const Params p(params);
    const auto N = detail::to_size(p.integer("N", 1, 1, 2));
    const ThetaEntry theta = p.entry("theta", Rational(2));
    const TowerSpec spec{theta, p.integers("factors", {2, 2, 2}, 2, 64), N};
    spec.validate();
    const double eps = p.real("eps", 1e-3, 1e-300, 1e6);
    const double tail_tol = p.real("tail_tol", 1e-18, 1e-300, 1.0);
    const Gaussian f = candidate_from_json(p.has("candidate") ? p.raw("candidate") : json("f00"), N, entry_value(theta));
    std::optional<TorusElement> z;
    if (p.has("z")) z = element_from_json(p.raw("z"), spec.level_theta(0));

    const auto t = square_condition(f, z, spec, eps, tail_tol, threads);
    ExperimentResult r{"square-condition", CsvTable({"j", "m", "value", "tail_bound", "bound", "below_eps"})};
    for (const auto& row : t.rows)
        r.table.add_row({static_cast<std::int64_t>(row.level), row.m, row.value, row.tail_bound, row.bound,
                         std::string(row.bound < eps ? "true" : "false")});
    r.checks = {at_least("strictly_decreasing", t.strictly_decreasing ? 1.0 : 0.0, 1.0),
                less_than("final_bound", t.rows.empty() ? 0.0 : t.rows.back().bound, eps)};
    return r;
}

using ExperimentFn = std::function<ExperimentResult(const json&, std::uint64_t, unsigned)>;

/// The kinds accepted by `run`.
inline const std::map<std::string, ExperimentFn>& experiment_kinds() {
    static const std::map<std::string, ExperimentFn> kinds = {
        {"star-check", star_check},
        {"covering-check", covering_check},
        {"tower", tower_check},
        {"moyal-table", moyal_table},
        {"decay-translate", decay_translate_experiment},
        {"lattice-decay", lattice_decay_experiment},
        {"square-condition", square_condition_experiment},
    };
    return kinds;
}

struct ExperimentConfig {
    std::string kind;
    json params = json::object();
    std::uint64_t seed = 0;
    std::string output_path;
};

inline ExperimentConfig parse_config(const json& j) {
    if (!j.is_object()) throw ConfigError("config must be a JSON object");
    for (const auto& [key, v] : j.items())
        if (key != "kind" && key != "params" && key != "seed" && key != "output_path")
            throw ConfigError("unknown config key '" + key + "'");
    ExperimentConfig c;
    if (!j.contains("kind") || !j.at("kind").is_string()) throw ConfigError("config needs a string 'kind'");
    c.kind = j.at("kind").get<std::string>();
    if (!experiment_kinds().count(c.kind)) throw ConfigError("unknown experiment kind '" + c.kind + "'");
    if (j.contains("params")) c.params = j.at("params");
    if (j.contains("seed")) {
        if (!j.at("seed").is_number_unsigned()) throw ConfigError("'seed' must be a nonnegative integer");
        c.seed = j.at("seed").get<std::uint64_t>();
    }
    c.output_path = j.value("output_path", c.kind + ".csv");
    if (c.output_path.empty()) throw ConfigError("'output_path' must not be empty");
    return c;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c, unsigned threads) {
    return experiment_kinds().at(c.kind)(c.params, c.seed, threads);
}

// ---- acceptance criteria -----------------------------------------------------

/// [[0, t], [-t, 0]] as config JSON, t a "p/q" string.
inline json planar_json(const std::string& t) {
    return json::array({json::array({0, t}), json::array({"-" + t, 0})});
}

struct CriterionRun {
    std::vector<Check> checks;
    std::vector<std::pair<std::string, std::string>> artifacts; ///< file name, CSV text
    double seconds = 0.0;

    void absorb(const std::string& file, const ExperimentResult& r) {
        checks.insert(checks.end(), r.checks.begin(), r.checks.end());
        artifacts.emplace_back(file, r.table.str());
    }
    bool pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

struct Criterion {
    int id = 0;
    std::string module;
    std::string title;
    double budget_seconds = 0.0;
    /// Fills checks and named CSV artifacts.
    std::function<void(CriterionRun&, unsigned)> body;
};


/// Criteria 1-10. Determinism (11) needs two complete runs and is driven by the caller.
inline std::vector<Criterion> acceptance_criteria() {
    std::vector<Criterion> c;
    c.push_back({1, "nctorus", "torus algebra exactness", 10.0, [](CriterionRun& run, unsigned th) {
                     const json params = {{"thetas", {planar_json("1/3"), planar_json("2/7")}},
                                          {"radius", 4},
                                          {"samples", 1000}};
                     run.absorb("c01_star_check.csv", star_check(params, 1, th));
                 }});
    c.push_back({2, "nctorus", "GNS orthonormality and trace", 5.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c02_trace.csv", trace_check({{"theta", planar_json("2/7")}}, 2, th));
                 }});
    c.push_back({3, "covering", "covering suite", 20.0, [](CriterionRun& run, unsigned th) {
                     auto k22 = covering_check({{"theta_base", planar_json("1/5")},
                                                {"theta_cover", planar_json("1/20")},
                                                {"k", {2, 2}}},
                                               31, th);
                     for (auto& ch : k22.checks) ch.name = "k22_" + ch.name;
                     run.absorb("c03_covering_k22.csv", k22);
                     auto k23 = covering_check({{"theta_base", planar_json("1/5")},
                                                {"theta_cover", planar_json("1/30")},
                                                {"k", {2, 3}}},
                                               32, th);
                     for (auto& ch : k23.checks) ch.name = "k23_" + ch.name;
                     run.absorb("c03_covering_k23.csv", k23);
                     run.checks.push_back(commutative_dilation_check(33));
                 }});
    c.push_back({4, "covering", "tower lifts and group orders", 10.0, [](CriterionRun& run, unsigned th) {
                     const auto r = tower_check({{"factors", {2, 3, 2}}, {"N", 1}}, 4, th);
                     run.absorb("c04_tower.csv", r);
                     const auto orders = r.summary.at("group_orders").get<std::vector<std::int64_t>>();
                     run.checks.push_back(at_most("orders_equal_4_36_144",
                                                  orders == std::vector<std::int64_t>{4, 36, 144} ? 0.0 : 1.0, 0.0));
                 }});
    c.push_back({5, "moyal", "oscillator-basis product table", 2.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c05_moyal_table.csv", moyal_table({{"M", 8}, {"N", 1}, {"theta", 2.0}}, 0, th));
                 }});
    c.push_back({6, "moyal", "calibrated operator-norm bound", 30.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c06_opnorm.csv", opnorm_check({{"M", 16}, {"N", 1}, {"theta", 2.0}, {"samples", 1000}}, 6, th));
                 }});
    c.push_back({7, "moyal", "plane-wave scaling identity", 5.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c07_scaling.csv", scaling_check({{"samples", 200}}, 7, th));
                 }});
    c.push_back({8, "periodize", "periodization coefficients", 10.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c08_periodize.csv", periodize_check({{"m", 2}}, 8, th));
                 }});
    c.push_back({9, "periodize", "decay experiments", 60.0, [](CriterionRun& run, unsigned th) {
                     const json params = {{"delta_max", 32}, {"delta_step", 1}, {"m_list", {4}}};
                     auto d = decay_translate_experiment(params, 0, th);
                     for (auto& ch : d.checks) ch.name = "translate_" + ch.name;
                     run.absorb("c09_decay_translate.csv", d);
                     json lp = params;
                     lp["factors"] = {2, 2};
                     lp["j"] = 2;
                     auto l = lattice_decay_experiment(lp, 0, th);
                     for (auto& ch : l.checks) ch.name = "lattice_" + ch.name;
                     run.absorb("c09_lattice_decay.csv", l);
                 }});
    c.push_back({10, "periodize", "special-element square condition", 60.0, [](CriterionRun& run, unsigned th) {
                     run.absorb("c10_square_condition.csv",
                                square_condition_experiment({{"factors", {2, 2, 2}}, {"eps", 1e-3}}, 0, th));
                 }});
    return c;
}

/// Runs one criterion and records its wall time (kept out of every artifact).
inline CriterionRun run_criterion(const Criterion& c, unsigned threads) {
    CriterionRun run;
    const auto t0 = std::chrono::steady_clock::now();
    c.body(run, threads);
    run.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return run;
}

} // namespace nctorus
