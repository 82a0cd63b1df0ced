#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "covering.hpp"
#include "errors.hpp"
#include "gaussian.hpp"
#include "lattice.hpp"
#include "parallel.hpp"
#include "torus.hpp"

namespace nctorus {

/// A finite-level element sum_k c_k exp(2 pi i (k/m) . x) of the tower algebra
/// with deformation Theta_j = theta J / m^2. `tail` is a certified bound on the
/// l1 mass of coefficients that were dropped while building it.
struct LevelElement {
    std::size_t level = 0;
    std::int64_t m = 1;
    ThetaEntry theta = Rational(2);
    std::size_t N = 1;
    TorusElement coeffs;
    double tail = 0.0;

    /// sum_k c_k exp(2 pi i (k/m).x).
    Complex value_at(std::span<const double> x) const {
        if (x.size() != 2 * N) throw DimensionError("point has wrong dimension");
        Complex s{};
        for (const auto& [k, c] : coeffs.coeffs()) {
            double phase = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) phase += static_cast<double>(k[i]) * x[i];
            s += c * std::polar(1.0, 2.0 * std::numbers::pi * phase / static_cast<double>(m));
        }
        return s;
    }

    double l1() const { return l1_bound(coeffs); }
};

/// Theta_j = theta J / m^2 for the level with refinement m.
inline SkewMatrix level_theta(const ThetaEntry& theta, std::size_t N, std::int64_t m) {
    return SkewMatrix::symplectic(N, theta).divided_by(detail::checked_mul(m, m));
}

inline LevelElement empty_level(std::size_t level, std::int64_t m, const ThetaEntry& theta, std::size_t N) {
    return {level, m, theta, N, TorusElement(level_theta(theta, N, m)), 0.0};
}

/// Pointwise bound |F(u)| <= h(|u - u*|) for a member of the Gaussian family, with
/// h(r) = P_bound(|u*| + r) exp(peak - lambda r^2), made nonincreasing by
/// evaluating at max(r, r0).
class FourierEnvelope {
public:
    explicit FourierEnvelope(const Gaussian& F) : poly_(F.poly()) {
        const Eigen::MatrixXd reA = F.A().real();
        const Eigen::VectorXd reb = F.b().real();
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(reA);
        lambda_ = eig.eigenvalues().minCoeff();
        if (!(lambda_ > 0.0)) throw DomainError("Fourier transform does not decay");
        center_ = 0.5 * reA.ldlt().solve(reb);
        peak_ = F.c().real() + 0.25 * reb.dot(reA.ldlt().solve(reb));
        a_ = center_.norm();
        const double D = poly_.degree();
        r0_ = 0.5 * (-a_ + std::sqrt(a_ * a_ + 2.0 * D / lambda_));
    }

    const Eigen::VectorXd& center() const noexcept { return center_; }

    /// log sup_{r' >= r} h(r').
    double log_h(double r) const {
        r = std::max(r, r0_);
        const double p = poly_.magnitude_bound(a_ + r);
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(p) + peak_ - lambda_ * r * r;
    }

    /// Radius beyond which the envelope is decreasing.
    double monotone_radius() const noexcept { return r0_; }

private:
    Polynomial poly_;
    Eigen::VectorXd center_;
    double lambda_ = 0.0, peak_ = 0.0, a_ = 0.0, r0_ = 0.0;
};

namespace detail {

inline double log_add(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b), lo = std::min(a, b);
    return hi + std::log1p(std::exp(lo - hi));
}

/// log of sum_{s > R} #shell(s) h((s - 1/2)/m) / m^d: a bound on the l1 mass of
/// coefficients F(k/m)/m^d with |k - c0|_inf > R, where c0 = round(m u*).
inline double log_shell_tail(const FourierEnvelope& env, std::int64_t m, std::size_t d, std::int64_t R) {
    const double md = static_cast<double>(d) * std::log(static_cast<double>(m));
    auto log_term = [&](std::int64_t s) {
        const double outer = std::pow(2.0 * s + 1.0, static_cast<double>(d));
        const double inner = std::pow(2.0 * s - 1.0, static_cast<double>(d));
        return std::log(outer - inner) + env.log_h((static_cast<double>(s) - 0.5) / static_cast<double>(m)) - md;
    };
    double acc = -std::numeric_limits<double>::infinity();
    double prev = log_term(R + 1);
    for (std::int64_t s = R + 1;; ++s) {
        acc = log_add(acc, prev);
        const double next = log_term(s + 1);
        const double ratio = std::exp(next - prev);
        const bool monotone = (static_cast<double>(s) - 0.5) / static_cast<double>(m) >= env.monotone_radius();
        // Past the monotone radius the term ratio is nonincreasing, so the rest
        // is dominated by a geometric series.
        if (monotone && ratio <= 0.5 && next < acc - 80.0) return log_add(acc, next - std::log1p(-ratio));
        if (next == -std::numeric_limits<double>::infinity()) return acc;
        prev = next;
        if (s - R > 1000000) throw NumericsError("tail series did not settle");
    }
}

inline LatticePoint round_center(const Eigen::VectorXd& u, std::int64_t m) {
    LatticePoint c(static_cast<std::size_t>(u.size()));
    for (Eigen::Index i = 0; i < u.size(); ++i) c[static_cast<std::size_t>(i)] = std::llround(u[i] * static_cast<double>(m));
    return c;
}

inline constexpr std::size_t kMaxLevelCoefficients = 4'000'000;

} // namespace detail

/// Coefficients c_k = F f(k/m) / m^{2N} of the periodization of f over the
/// lattice m Z^{2N}, truncated to the smallest cube around the spectral peak for
/// which the certified l1 tail is at most tail_tol.
inline LevelElement periodize(const Gaussian& f, std::size_t level, std::int64_t m, double tail_tol,
                              const ThetaEntry& theta = Rational(2)) {
    if (!(tail_tol > 0.0)) throw DomainError("tail tolerance must be positive");
    if (m < 1) throw DomainError("refinement m must be >= 1");
    const std::size_t d = f.dim();
    if (d == 0 || d % 2 != 0) throw DimensionError("periodize needs an even ambient dimension");
    LevelElement out = empty_level(level, m, theta, d / 2);
    if (f.is_zero()) return out;

    const Gaussian F = gaussian_ft(f);
    const FourierEnvelope env(F);
    const double log_tol = std::log(tail_tol);
    std::int64_t R = 0;
    double log_tail = detail::log_shell_tail(env, m, d, R);
    while (log_tail > log_tol) {
        ++R;
        if (std::pow(2.0 * R + 1.0, static_cast<double>(d)) > static_cast<double>(detail::kMaxLevelCoefficients))
            throw NumericsError("periodize: tail tolerance needs more than " +
                                std::to_string(detail::kMaxLevelCoefficients) + " coefficients");
        log_tail = detail::log_shell_tail(env, m, d, R);
    }
    out.tail = std::exp(log_tail);

    const double scale = std::pow(static_cast<double>(m), -static_cast<double>(d));
    std::vector<double> u(d);
    for (const auto& k : cube_around(detail::round_center(env.center(), m), R)) {
        for (std::size_t i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / static_cast<double>(m);
        const Complex c = F(u) * scale;
        if (std::abs(c) < kPruneThreshold) out.tail += std::abs(c);
        else out.coeffs.add(k, c);
    }
    return out;
}

/// Product at a fixed level: the torus product with Theta_j on the refined lattice.
inline LevelElement level_star(const LevelElement& a, const LevelElement& b) {
    if (a.level != b.level || a.m != b.m || a.N != b.N || !(a.coeffs.theta() == b.coeffs.theta()))
        throw LevelMismatch("level_star: operands live at different levels");
    LevelElement out = a;
    out.coeffs = star_product(a.coeffs, b.coeffs);
    out.tail = a.l1() * b.tail + a.tail * b.l1() + a.tail * b.tail;
    return out;
}

inline LevelElement level_involution(const LevelElement& a) {
    LevelElement out = a;
    out.coeffs = involution(a.coeffs);
    return out;
}

inline LevelElement level_scale(const LevelElement& a, Complex s) {
    LevelElement out = a;
    out.coeffs *= s;
    out.tail = std::abs(s) * a.tail;
    return out;
}

inline LevelElement level_sub(const LevelElement& a, const LevelElement& b) {
    if (a.level != b.level || a.m != b.m || !(a.coeffs.theta() == b.coeffs.theta()))
        throw LevelMismatch("level_sub: operands live at different levels");
    LevelElement out = a;
    out.coeffs -= b.coeffs;
    out.tail = a.tail + b.tail;
    return out;
}

/// A base-algebra element (level 0, Theta = theta J) pushed up the tower to level j.
inline LevelElement lift_to_level(const TorusElement& z, const TowerSpec& tower, std::size_t j) {
    if (!(z.theta() == tower.level_theta(0))) throw AlgebraMismatch("lift_to_level: element is not over the base level");
    LevelElement out = empty_level(j, tower.m(j), tower.theta0, tower.half_dim);
    out.coeffs = j == 0 ? z : lift(tower_map(tower, 0, j), z);
    return out;
}

/// Result of the rank-one test f * f = lambda f.
struct RankOneTest {
    bool rank_one = false;
    double lambda = 0.0;
    double relative_residual = 0.0;
};

/// f is a positive multiple lambda P of a rank-one projection iff f is real,
/// f * f = lambda f and lambda > 0; lambda = <f, f*f> / <f, f>.
inline RankOneTest rank_one_test(const Gaussian& f, const SkewMatrix& theta, double tol = 1e-10) {
    RankOneTest t;
    if (f.is_zero()) return t;
    const Gaussian ff = moyal_product(f, f, theta);
    const double norm2 = inner_product(f, f).real();
    const Complex lam = inner_product(f, ff) / norm2;
    t.lambda = lam.real();
    const double ffn = inner_product(ff, ff).real();
    // ||ff - lambda f||^2 = ||ff||^2 - 2 Re(lambda conj <f, ff>) + |lambda|^2 ||f||^2
    const double res2 = ffn - 2.0 * (std::conj(lam) * inner_product(f, ff)).real() + std::norm(lam) * norm2;
    t.relative_residual = std::sqrt(std::max(0.0, res2) / ffn);
    const double self_adj = l2_distance(f, f.conj()) / std::sqrt(norm2);
    t.rank_one = t.relative_residual <= std::sqrt(tol) && std::abs(lam.imag()) <= tol * std::abs(lam) &&
                 t.lambda > 0.0 && self_adj <= std::sqrt(tol);
    return t;
}

/// The four lattice partial sums at one level plus the scalars behind them.
struct PartialSums {
    LevelElement a, b, c;
    std::optional<LevelElement> d;
    double s = 0.0;       ///< ||z f z*|| (Moyal mode)
    double kprime = 0.0;  ///< f_eps scalar
    double lambda = 0.0;  ///< f * f = lambda f
    bool commutative = false;
};

struct PartialSumOptions {
    double eps = 1e-3;
    double tail_tol = 1e-18;
    bool want_d = true;
};

/// a_j, b_j = z a_j z*, c_j = periodization of (z f z*)^2 and d_j = periodization of f_eps(z f z*).
///
/// With theta != 0 the candidate must be a positive multiple of a rank-one
/// projection: then z f z* = lambda |z psi><z psi|, its norm is
/// s = lambda sum_p w_p Ff(-p) / Ff(0) with w = z* z, its square is s z f z*,
/// and f_eps acts on it by the scalar k'. Non-rank-one candidates are accepted
/// only for z = 1 without d_j, where c_j is the periodization of f * f.
///
/// With theta == 0 products are pointwise: c_j = (z z*)^2 times the
/// periodization of f^2, and d_j is not available.
inline PartialSums partial_sums(const Gaussian& f, const TowerSpec& tower, std::size_t j,
                                const std::optional<TorusElement>& z, const PartialSumOptions& opt) {
    tower.validate();
    if (f.dim() != 2 * tower.half_dim) throw DimensionError("candidate dimension does not match the tower");
    const std::int64_t m = tower.m(j);
    const double theta = entry_value(tower.theta0);
    const SkewMatrix ambient = SkewMatrix::symplectic(tower.half_dim, tower.theta0);
    const TorusElement zbase = z.value_or(TorusElement::identity(tower.level_theta(0)));
    const bool z_is_one = zbase == TorusElement::identity(tower.level_theta(0));

    PartialSums out;
    out.commutative = theta == 0.0;
    out.a = periodize(f, j, m, opt.tail_tol, tower.theta0);
    const LevelElement zj = lift_to_level(zbase, tower, j);
    const LevelElement zj_star = level_involution(zj);
    out.b = level_star(level_star(zj, out.a), zj_star);

    if (out.commutative) {
        if (opt.want_d) throw UnsupportedCandidate("f_eps has no scalar form for pointwise products");
        const LevelElement ww = level_star(zj, zj_star);
        out.c = level_star(level_star(ww, ww), periodize(f * f, j, m, opt.tail_tol, tower.theta0));
        return out;
    }

    const RankOneTest r1 = rank_one_test(f, ambient);
    out.lambda = r1.lambda;
    if (!r1.rank_one) {
        if (opt.want_d || !z_is_one)
            throw UnsupportedCandidate("candidate is not a positive multiple of a rank-one projection (residual " +
                                       std::to_string(r1.relative_residual) + ")");
        out.c = periodize(moyal_product(f, f, ambient), j, m, opt.tail_tol, tower.theta0);
        return out;
    }

    const Gaussian F = gaussian_ft(f);
    const std::vector<double> origin(f.dim(), 0.0);
    const Complex F0 = F(origin);
    const TorusElement w = involution(zbase) * zbase;
    Complex s{};
    std::vector<double> u(f.dim());
    for (const auto& [p, wp] : w.coeffs()) {
        for (std::size_t i = 0; i < u.size(); ++i) u[i] = -static_cast<double>(p[i]);
        s += wp * F(u) / F0;
    }
    out.s = r1.lambda * s.real();
    out.c = level_scale(out.b, out.s);
    if (opt.want_d) {
        out.kprime = f_eps_rank_one(std::max(0.0, out.s), opt.eps);
        out.d = level_scale(out.b, out.kprime);
    }
    return out;
}

/// One row of the square-condition table.
struct SquareConditionRow {
    std::size_t level = 0;
    std::int64_t m = 1;
    double value = 0.0;      ///< l1 norm of the computed b_j^2 - c_j
    double tail_bound = 0.0; ///< what the truncation can add to it
    double bound = 0.0;      ///< value + tail_bound, an upper bound for the operator norm
};

struct SquareConditionTable {
    std::vector<SquareConditionRow> rows;
    double eps = 0.0;
    bool strictly_decreasing = false;
    bool pass = false; ///< final bound < eps
};

/// ||b_j^2 - c_j|| through its l1 coefficient bound for j = 1..J of the tower.
inline SquareConditionTable square_condition(const Gaussian& f, const std::optional<TorusElement>& z,
                                             const TowerSpec& tower, double eps, double tail_tol = 1e-18,
                                             unsigned threads = 1) {
    if (!(eps > 0.0)) throw DomainError("eps must be positive");
    SquareConditionTable t;
    t.eps = eps;
    t.rows.resize(tower.levels());
    parallel_for(tower.levels(), threads, [&](std::size_t i) {
        const std::size_t j = i + 1;
        const PartialSums ps = partial_sums(f, tower, j, z, {eps, tail_tol, false});
        const LevelElement b2 = level_star(ps.b, ps.b);
        const LevelElement diff = level_sub(b2, ps.c);
        SquareConditionRow row;
        row.level = j;
        row.m = tower.m(j);
        row.value = diff.l1();
        // True (b_T + b_R)^2 - (c_T + c_R) minus the computed b_T^2 - c_T.
        const double T = ps.b.tail;
        row.tail_bound = 2.0 * ps.b.l1() * T + T * T + ps.c.tail;
        row.bound = row.value + row.tail_bound;
        t.rows[i] = row;
    });
    t.strictly_decreasing = true;
    for (std::size_t i = 1; i < t.rows.size(); ++i)
        t.strictly_decreasing = t.strictly_decreasing && t.rows[i].bound < t.rows[i - 1].bound;
    t.pass = !t.rows.empty() && t.rows.back().bound < eps;
    return t;
}

/// Ordinary least squares of y against x with the coefficient of determination.
struct LinearFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::size_t n = 0;
};

inline LinearFit fit_line(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw DimensionError("fit: x and y lengths differ");
    LinearFit f;
    f.n = x.size();
    if (f.n < 2) throw DomainError("fit needs at least two points");
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(f.n);
    my /= static_cast<double>(f.n);
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) throw DomainError("fit: all x values coincide");
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double sse = 0.0;
    for (std::size_t i = 0; i < f.n; ++i) {
        const double r = y[i] - (f.intercept + f.slope * x[i]);
        sse += r * r;
    }
    f.r2 = syy == 0.0 ? 1.0 : 1.0 - sse / syy;
    return f;
}

/// One row of a decay experiment.
struct DecayRow {
    double delta_norm = 0.0;
    double log_value = 0.0; ///< natural log of the norm or bound
};

struct DecayTable {
    std::vector<DecayRow> rows;
    LinearFit fit;          ///< log value against log(1 + |delta|) inside the fit window
    double fit_lo = 4.0, fit_hi = 32.0;
    std::vector<std::int64_t> m_list;
    std::vector<double> log_C; ///< log C_m = max over the grid of log value + m log(1 + |delta|)
    double target_slope = -4.0;
    double min_r2 = 0.99;

    double fitted_m() const { return -fit.slope; }
    bool pass() const { return fit.slope <= target_slope && fit.r2 >= min_r2; }
};

namespace detail {

inline double vec_norm(std::span<const double> v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline void finish_decay(DecayTable& t) {
    std::vector<double> x, y;
    for (const auto& r : t.rows)
        if (r.delta_norm >= t.fit_lo && r.delta_norm <= t.fit_hi && std::isfinite(r.log_value)) {
            x.push_back(std::log1p(r.delta_norm));
            y.push_back(r.log_value);
        }
    if (x.size() >= 2) t.fit = fit_line(x, y);
    t.log_C.clear();
    for (auto m : t.m_list) {
        double c = -std::numeric_limits<double>::infinity();
        for (const auto& r : t.rows) c = std::max(c, r.log_value + static_cast<double>(m) * std::log1p(r.delta_norm));
        t.log_C.push_back(c);
    }
}

} // namespace detail

struct DecayOptions {
    double fit_lo = 4.0, fit_hi = 32.0;
    double target_slope = -4.0;
    double min_r2 = 0.99;
    unsigned threads = 1;
};

/// ||a_delta * b||_2 over a grid of translations, evaluated in closed form and
/// in log space, with the log-log fit of the decay.
inline DecayTable decay_translate(const Gaussian& a, const Gaussian& b, const std::vector<std::vector<double>>& deltas,
                                  const std::vector<std::int64_t>& m_list, const SkewMatrix& theta,
                                  const DecayOptions& opt = {}) {
    DecayTable t;
    t.fit_lo = opt.fit_lo;
    t.fit_hi = opt.fit_hi;
    t.target_slope = opt.target_slope;
    t.min_r2 = opt.min_r2;
    t.m_list = m_list;
    t.rows.resize(deltas.size());
    parallel_for(deltas.size(), opt.threads, [&](std::size_t i) {
        const Gaussian prod = moyal_product(a.translate(deltas[i]), b, theta);
        t.rows[i] = {detail::vec_norm(deltas[i]), log_l2_norm(prod)};
    });
    detail::finish_decay(t);
    return t;
}

/// log of the certified l1 bound sum_k |F g(k/m)| / m^d (plus tail) for g in the family.
inline double log_l1_periodized(const Gaussian& g, std::int64_t m, double rel_tol = 1e-16) {
    if (g.is_zero()) return -std::numeric_limits<double>::infinity();
    const std::size_t d = g.dim();
    const Gaussian F = gaussian_ft(g);
    const FourierEnvelope env(F);
    const LatticePoint c0 = detail::round_center(env.center(), m);
    const double md = static_cast<double>(d) * std::log(static_cast<double>(m));
    std::vector<double> u(d);
    double acc = -std::numeric_limits<double>::infinity();
    for (std::int64_t R = 0;; ++R) {
        // add the shell |k - c0|_inf == R
        for (const auto& k : cube_around(c0, R)) {
            if ((k - c0).linf() != R) continue;
            for (std::size_t i = 0; i < d; ++i) u[i] = static_cast<double>(k[i]) / static_cast<double>(m);
            acc = detail::log_add(acc, F.log_abs(u) - md);
        }
        const double tail = detail::log_shell_tail(env, m, d, R);
        if (tail <= acc + std::log(rel_tol)) return detail::log_add(acc, tail);
        if (std::pow(2.0 * R + 1.0, static_cast<double>(d)) > static_cast<double>(detail::kMaxLevelCoefficients))
            throw NumericsError("log_l1_periodized: lattice sum did not settle");
    }
}

/// The l1 coefficient bound of the level-j periodization of a_delta * a over a
/// grid of translations, with the same log-log fit as decay_translate.
inline DecayTable lattice_sum_decay(const Gaussian& a, const std::vector<std::vector<double>>& deltas, std::int64_t m,
                                    const SkewMatrix& theta, const std::vector<std::int64_t>& m_list,
                                    const DecayOptions& opt = {}) {
    DecayTable t;
    t.fit_lo = opt.fit_lo;
    t.fit_hi = opt.fit_hi;
    t.target_slope = opt.target_slope;
    t.min_r2 = opt.min_r2;
    t.m_list = m_list;
    t.rows.resize(deltas.size());
    parallel_for(deltas.size(), opt.threads, [&](std::size_t i) {
        const Gaussian prod = moyal_product(a.translate(deltas[i]), a, theta);
        t.rows[i] = {detail::vec_norm(deltas[i]), log_l1_periodized(prod, m)};
    });
    detail::finish_decay(t);
    return t;
}

/// Slopes of the log-log curve over consecutive windows of `width` points
/// (rows sorted by |delta|), used to watch the decay rate grow outward.
inline std::vector<double> windowed_slopes(const DecayTable& t, std::size_t width) {
    std::vector<DecayRow> rows = t.rows;
    std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.delta_norm < b.delta_norm; });
    std::vector<double> out;
    for (std::size_t i = 0; i + width <= rows.size(); ++i) {
        std::vector<double> x, y;
        for (std::size_t k = i; k < i + width; ++k) {
            x.push_back(std::log1p(rows[k].delta_norm));
            y.push_back(rows[k].log_value);
        }
        out.push_back(fit_line(x, y).slope);
    }
    return out;
}

} // namespace nctorus
