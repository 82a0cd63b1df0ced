#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <compare>
#include <cstdint>
#include <initializer_list>
#include <iterator>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "rational.hpp"

namespace nctorus {

using Complex = std::complex<double>;

/// Largest ambient dimension supported by the inline lattice-point storage.
inline constexpr std::size_t kMaxDim = 8;

/// A point of Z^n with inline storage (n <= kMaxDim). Ordered lexicographically.
class LatticePoint {
public:
    LatticePoint() = default;

    explicit LatticePoint(std::size_t n) : n_(check_dim(n)) {}

    LatticePoint(std::initializer_list<std::int64_t> coords) : n_(check_dim(coords.size())) {
        std::copy(coords.begin(), coords.end(), c_.begin());
    }

    explicit LatticePoint(std::span<const std::int64_t> coords) : n_(check_dim(coords.size())) {
        std::copy(coords.begin(), coords.end(), c_.begin());
    }

    static LatticePoint unit(std::size_t n, std::size_t j) {
        LatticePoint e(n);
        e.c_.at(j) = 1;
        return e;
    }

    std::size_t size() const noexcept { return n_; }
    std::int64_t operator[](std::size_t i) const noexcept { return c_[i]; }
    std::int64_t& operator[](std::size_t i) noexcept { return c_[i]; }
    const std::int64_t* begin() const noexcept { return c_.data(); }
    const std::int64_t* end() const noexcept { return c_.data() + n_; }
    std::span<const std::int64_t> coords() const noexcept { return {c_.data(), n_}; }

    bool is_zero() const noexcept {
        return std::all_of(begin(), end(), [](std::int64_t v) { return v == 0; });
    }

    /// Euclidean norm sqrt(sum k_i^2).
    double norm() const noexcept {
        double s = 0.0;
        for (auto v : coords()) s += static_cast<double>(v) * static_cast<double>(v);
        return std::sqrt(s);
    }

    /// l-infinity norm max |k_i|.
    std::int64_t linf() const noexcept {
        std::int64_t m = 0;
        for (auto v : coords()) m = std::max(m, v < 0 ? -v : v);
        return m;
    }

    LatticePoint& operator+=(const LatticePoint& o) {
        require_same(o);
        for (std::size_t i = 0; i < n_; ++i) c_[i] += o.c_[i];
        return *this;
    }
    LatticePoint& operator-=(const LatticePoint& o) {
        require_same(o);
        for (std::size_t i = 0; i < n_; ++i) c_[i] -= o.c_[i];
        return *this;
    }
    friend LatticePoint operator+(LatticePoint a, const LatticePoint& b) { return a += b; }
    friend LatticePoint operator-(LatticePoint a, const LatticePoint& b) { return a -= b; }
    friend LatticePoint operator-(LatticePoint a) {
        for (std::size_t i = 0; i < a.n_; ++i) a.c_[i] = -a.c_[i];
        return a;
    }
    friend LatticePoint operator*(std::int64_t s, LatticePoint a) {
        for (std::size_t i = 0; i < a.n_; ++i) a.c_[i] *= s;
        return a;
    }

    friend bool operator==(const LatticePoint& a, const LatticePoint& b) noexcept {
        return a.n_ == b.n_ && std::equal(a.begin(), a.end(), b.begin());
    }
    friend std::strong_ordering operator<=>(const LatticePoint& a, const LatticePoint& b) noexcept {
        if (auto c = a.n_ <=> b.n_; c != 0) return c;
        return std::lexicographical_compare_three_way(a.begin(), a.end(), b.begin(), b.end());
    }

    std::string str() const {
        std::string s = "(";
        for (std::size_t i = 0; i < n_; ++i) s += (i ? "," : "") + std::to_string(c_[i]);
        return s + ")";
    }

private:
    static std::size_t check_dim(std::size_t n) {
        if (n > kMaxDim) throw DimensionError("lattice dimension " + std::to_string(n) + " exceeds " + std::to_string(kMaxDim));
        return n;
    }
    void require_same(const LatticePoint& o) const {
        if (o.n_ != n_) throw DimensionError("lattice points of different dimension");
    }

    std::size_t n_ = 0;
    std::array<std::int64_t, kMaxDim> c_{};
};

/// Sublattice membership and componentwise helpers.
inline LatticePoint hadamard(const LatticePoint& a, std::span<const std::int64_t> d) {
    if (d.size() != a.size()) throw DimensionError("diagonal length mismatch");
    LatticePoint r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] * d[i];
    return r;
}

/// Reduce x into [-1, 1) modulo 2.
inline double reduce_mod2(double x) {
    double r = std::fmod(x, 2.0);
    if (r >= 1.0) r -= 2.0;
    if (r < -1.0) r += 2.0;
    return r;
}

/// e^{-i pi x} for x already reduced mod 2.
inline Complex unit_phase(double reduced) {
    if (reduced == 0.0) return {1.0, 0.0};
    if (reduced == -1.0) return {-1.0, 0.0};
    if (reduced == 0.5) return {0.0, -1.0};
    if (reduced == -0.5) return {0.0, 1.0};
    return std::polar(1.0, -std::numbers::pi * reduced);
}

/// One entry of a deformation matrix: exact rational or floating value.
using ThetaEntry = std::variant<Rational, double>;

/// Parses "p/q" (exact) or a decimal literal (floating).
inline ThetaEntry parse_theta_entry(const std::string& text) {
    if (text.find('/') != std::string::npos) return Rational::parse(text);
    try {
        std::size_t used = 0;
        double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::logic_error&) {
        throw ConfigError("not a numeric literal: '" + text + "'");
    }
}

inline double entry_value(const ThetaEntry& e) {
    return std::visit([](const auto& v) -> double {
        if constexpr (std::is_same_v<std::decay_t<decltype(v)>, Rational>) return v.to_double();
        else return v;
    }, e);
}

inline std::string entry_string(const ThetaEntry& e) {
    if (const auto* r = std::get_if<Rational>(&e)) return r->str();
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", std::get<double>(e));
    return buf;
}

/// Real skew-symmetric n x n deformation matrix.
///
/// When every entry is rational the matrix is held as an integer matrix over a
/// common denominator D, so k.Theta l is an exact fraction t/D and phases are
/// reduced mod 2 in integer arithmetic. Otherwise the floating values are used
/// and reduced with fmod.
class SkewMatrix {
public:
    SkewMatrix() = default;

    /// Full-matrix constructor; rejects non-square or non-skew input.
    explicit SkewMatrix(std::vector<std::vector<ThetaEntry>> rows) {
        n_ = rows.size();
        if (n_ == 0 || n_ > kMaxDim) throw DimensionError("skew matrix dimension out of range");
        for (const auto& r : rows)
            if (r.size() != n_) throw DimensionError("skew matrix is not square");
        entries_.resize(n_ * n_);
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) entries_[i * n_ + j] = rows[i][j];
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j <= i; ++j)
                if (!negatives(entries_[i * n_ + j], entries_[j * n_ + i]))
                    throw DimensionError("matrix is not skew-symmetric at (" + std::to_string(i) + "," +
                                         std::to_string(j) + ")");
        finish();
    }

    static SkewMatrix zero(std::size_t n) {
        std::vector<std::vector<ThetaEntry>> rows(n, std::vector<ThetaEntry>(n, Rational(0)));
        return SkewMatrix(std::move(rows));
    }

    /// Builds Theta from its strict upper triangle, row by row.
    static SkewMatrix from_upper(std::size_t n, const std::vector<ThetaEntry>& upper) {
        if (upper.size() != n * (n - 1) / 2) throw DimensionError("upper-triangle length mismatch");
        std::vector<std::vector<ThetaEntry>> rows(n, std::vector<ThetaEntry>(n, Rational(0)));
        std::size_t idx = 0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                rows[i][j] = upper[idx];
                rows[j][i] = negate(upper[idx]);
                ++idx;
            }
        return SkewMatrix(std::move(rows));
    }

    /// n = 2 with theta_12 = theta.
    static SkewMatrix planar(const ThetaEntry& theta) { return from_upper(2, {theta}); }

    /// Theta = theta * J, J = [[0, 1_N], [-1_N, 0]].
    static SkewMatrix symplectic(std::size_t half_dim, const ThetaEntry& theta) {
        const std::size_t n = 2 * half_dim;
        std::vector<std::vector<ThetaEntry>> rows(n, std::vector<ThetaEntry>(n, Rational(0)));
        for (std::size_t i = 0; i < half_dim; ++i) {
            rows[i][half_dim + i] = theta;
            rows[half_dim + i][i] = negate(theta);
        }
        return SkewMatrix(std::move(rows));
    }

    std::size_t dim() const noexcept { return n_; }
    bool exact() const noexcept { return exact_; }
    /// Common denominator of the exact representation (1 when not exact).
    std::int64_t denominator() const noexcept { return den_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * n_ + j]; }
    const ThetaEntry& entry(std::size_t i, std::size_t j) const { return entries_[i * n_ + j]; }
    std::int64_t scaled_entry(std::size_t i, std::size_t j) const { return ints_[i * n_ + j]; }

    /// Theta / d for a positive integer d (exact entries stay exact).
    SkewMatrix divided_by(std::int64_t d) const {
        if (d <= 0) throw DomainError("divisor must be positive");
        std::vector<std::vector<ThetaEntry>> rows(n_, std::vector<ThetaEntry>(n_));
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = 0; j < n_; ++j) {
                const auto& e = entries_[i * n_ + j];
                if (const auto* r = std::get_if<Rational>(&e)) rows[i][j] = *r / Rational(d);
                else rows[i][j] = std::get<double>(e) / static_cast<double>(d);
            }
        return SkewMatrix(std::move(rows));
    }

    /// Exact numerator t of k.Theta l = t / denominator(). Requires exact().
    std::int64_t form_numerator(const LatticePoint& k, const LatticePoint& l) const {
        check(k, l);
        std::int64_t t = 0;
        for (std::size_t i = 0; i < n_; ++i) {
            if (k[i] == 0) continue;
            std::int64_t row = 0;
            for (std::size_t j = 0; j < n_; ++j)
                row = detail::checked_add(row, detail::checked_mul(ints_[i * n_ + j], l[j]));
            t = detail::checked_add(t, detail::checked_mul(k[i], row));
        }
        return t;
    }

    /// k.(Theta l) as a real number.
    double form(const LatticePoint& k, const LatticePoint& l) const {
        check(k, l);
        if (exact_) return static_cast<double>(form_numerator(k, l)) / static_cast<double>(den_);
        // Pairing (i, j) with (j, i) keeps the result exactly antisymmetric.
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) {
                const double minor = static_cast<double>(k[i] * l[j] - k[j] * l[i]);
                s += values_[i * n_ + j] * minor;
            }
        return s;
    }

    /// Bilinear form on real vectors.
    double form(std::span<const double> k, std::span<const double> l) const {
        if (k.size() != n_ || l.size() != n_) throw DimensionError("vector length does not match Theta");
        double s = 0.0;
        for (std::size_t i = 0; i < n_; ++i)
            for (std::size_t j = i + 1; j < n_; ++j) s += values_[i * n_ + j] * (k[i] * l[j] - k[j] * l[i]);
        return s;
    }

    /// k.Theta l reduced modulo 2 into [-1, 1).
    double reduced_form(const LatticePoint& k, const LatticePoint& l) const {
        if (!exact_) return reduce_mod2(form(k, l));
        return reduce_numerator(form_numerator(k, l));
    }

    /// Exact numerator t (mod 2D) mapped to t/D in [-1, 1).
    double reduce_numerator(std::int64_t t) const {
        const std::int64_t span = 2 * den_;
        std::int64_t r = detail::mod_floor(t, span);
        if (r >= den_) r -= span;
        return static_cast<double>(r) / static_cast<double>(den_);
    }

    /// e^{-i pi k.Theta l}.
    Complex twist(const LatticePoint& k, const LatticePoint& l) const { return unit_phase(reduced_form(k, l)); }

    friend bool operator==(const SkewMatrix& a, const SkewMatrix& b) {
        if (a.n_ != b.n_ || a.exact_ != b.exact_) return false;
        if (a.exact_) return a.den_ == b.den_ && a.ints_ == b.ints_;
        return a.values_ == b.values_;
    }

    std::string str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < n_; ++i) {
            s += i ? ",[" : "[";
            for (std::size_t j = 0; j < n_; ++j) s += (j ? "," : "") + entry_string(entries_[i * n_ + j]);
            s += "]";
        }
        return s + "]";
    }

private:
    static ThetaEntry negate(const ThetaEntry& e) {
        if (const auto* r = std::get_if<Rational>(&e)) return -*r;
        return -std::get<double>(e);
    }

    static bool negatives(const ThetaEntry& a, const ThetaEntry& b) {
        const auto* ra = std::get_if<Rational>(&a);
        const auto* rb = std::get_if<Rational>(&b);
        if (ra && rb) return *ra == -*rb;
        return entry_value(a) == -entry_value(b);
    }

    void finish() {
        values_.resize(n_ * n_);
        exact_ = true;
        den_ = 1;
        for (std::size_t i = 0; i < n_ * n_; ++i) {
            values_[i] = entry_value(entries_[i]);
            if (const auto* r = std::get_if<Rational>(&entries_[i]))
                den_ = std::lcm(den_, r->den());
            else
                exact_ = false;
        }
        ints_.assign(n_ * n_, 0);
        if (!exact_) {
            den_ = 1;
            return;
        }
        for (std::size_t i = 0; i < n_ * n_; ++i) {
            const auto& r = std::get<Rational>(entries_[i]);
            ints_[i] = detail::checked_mul(r.num(), den_ / r.den());
        }
    }

    void check(const LatticePoint& k, const LatticePoint& l) const {
        if (k.size() != n_ || l.size() != n_)
            throw DimensionError("lattice point dimension " + std::to_string(k.size()) + "/" +
                                 std::to_string(l.size()) + " does not match Theta dimension " + std::to_string(n_));
    }

    std::size_t n_ = 0;
    bool exact_ = true;
    std::int64_t den_ = 1;
    std::vector<ThetaEntry> entries_;
    std::vector<double> values_;
    std::vector<std::int64_t> ints_;
};

/// The exponent argument k.Theta l of the twisted-product phase e^{-i pi k.Theta l}.
inline double phase_form(const LatticePoint& k, const LatticePoint& l, const SkewMatrix& theta) {
    return theta.form(k, l);
}

/// l-infinity truncation window {k : max |k_i| <= radius} in Z^n.
struct SupportWindow {
    std::int64_t radius = 0;
    std::size_t n = 1;

    bool contains(const LatticePoint& k) const { return k.size() == n && k.linf() <= radius; }
    std::size_t count() const {
        std::size_t c = 1;
        for (std::size_t i = 0; i < n; ++i) c *= static_cast<std::size_t>(2 * radius + 1);
        return c;
    }
};

/// Odometer enumeration of an axis-aligned box lo <= k <= hi (inclusive), in
/// lexicographic order.
class BoxRange {
public:
    class iterator {
    public:
        using iterator_category = std::forward_iterator_tag;
        using value_type = LatticePoint;
        using difference_type = std::ptrdiff_t;
        using pointer = const LatticePoint*;
        using reference = const LatticePoint&;

        iterator() = default;
        iterator(const BoxRange* box, bool done) : box_(box), cur_(box->lo_), done_(done) {}

        reference operator*() const { return cur_; }
        pointer operator->() const { return &cur_; }
        iterator& operator++() {
            for (std::size_t i = cur_.size(); i-- > 0;) {
                if (cur_[i] < box_->hi_[i]) {
                    ++cur_[i];
                    return *this;
                }
                cur_[i] = box_->lo_[i];
            }
            done_ = true;
            return *this;
        }
        iterator operator++(int) {
            auto t = *this;
            ++*this;
            return t;
        }
        friend bool operator==(const iterator& a, const iterator& b) {
            if (a.done_ || b.done_) return a.done_ == b.done_;
            return a.cur_ == b.cur_;
        }

    private:
        const BoxRange* box_ = nullptr;
        LatticePoint cur_;
        bool done_ = true;
    };

    BoxRange(LatticePoint lo, LatticePoint hi) : lo_(std::move(lo)), hi_(std::move(hi)) {
        if (lo_.size() != hi_.size() || lo_.size() == 0) throw DimensionError("box corners of different dimension");
        for (std::size_t i = 0; i < lo_.size(); ++i)
            if (lo_[i] > hi_[i]) empty_ = true;
    }

    iterator begin() const { return iterator(this, empty_); }
    iterator end() const { return iterator(this, true); }

    std::size_t count() const {
        if (empty_) return 0;
        std::size_t c = 1;
        for (std::size_t i = 0; i < lo_.size(); ++i) c *= static_cast<std::size_t>(hi_[i] - lo_[i] + 1);
        return c;
    }

private:
    LatticePoint lo_, hi_;
    bool empty_ = false;
};

/// Cube of l-infinity radius `radius` around `center`.
inline BoxRange cube_around(const LatticePoint& center, std::int64_t radius) {
    LatticePoint lo = center, hi = center;
    for (std::size_t i = 0; i < center.size(); ++i) {
        lo[i] -= radius;
        hi[i] += radius;
    }
    return {lo, hi};
}

/// All (2 radius + 1)^n lattice points with l-infinity norm <= radius, each once.
inline BoxRange window_sum(std::int64_t radius, std::size_t n) {
    if (radius < 0) throw DomainError("window radius must be nonnegative");
    if (n == 0) throw DimensionError("window dimension must be >= 1");
    return cube_around(LatticePoint(n), radius);
}

inline BoxRange window_points(const SupportWindow& w) { return window_sum(w.radius, w.n); }

} // namespace nctorus
