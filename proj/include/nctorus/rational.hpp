#pragma once

#include <cstdint>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>

#include "errors.hpp"

namespace nctorus {

namespace detail {

inline std::int64_t checked_mul(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_mul_overflow(a, b, &r)) throw DomainError("integer overflow in exact phase arithmetic");
    return r;
}

inline std::int64_t checked_add(std::int64_t a, std::int64_t b) {
    std::int64_t r;
    if (__builtin_add_overflow(a, b, &r)) throw DomainError("integer overflow in exact phase arithmetic");
    return r;
}

/// Least nonnegative residue of a modulo m (m > 0).
inline std::int64_t mod_floor(std::int64_t a, std::int64_t m) {
    std::int64_t r = a % m;
    return r < 0 ? r + m : r;
}

} // namespace detail

/// Exact rational p/q with q > 0 and gcd(p, q) == 1.
class Rational {
public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1) : num_(num), den_(den) {
        if (den_ == 0) throw DomainError("rational with zero denominator");
        normalize();
    }

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    bool is_zero() const noexcept { return num_ == 0; }

    friend Rational operator+(const Rational& a, const Rational& b) {
        const std::int64_t g = std::gcd(a.den_, b.den_);
        const std::int64_t l = detail::checked_mul(a.den_ / g, b.den_);
        return {detail::checked_add(detail::checked_mul(a.num_, l / a.den_),
                                    detail::checked_mul(b.num_, l / b.den_)),
                l};
    }
    friend Rational operator-(const Rational& a) { return {-a.num_, a.den_}; }
    friend Rational operator-(const Rational& a, const Rational& b) { return a + (-b); }
    friend Rational operator*(const Rational& a, const Rational& b) {
        const std::int64_t g1 = std::gcd(a.num_, b.den_) == 0 ? 1 : std::gcd(a.num_, b.den_);
        const std::int64_t g2 = std::gcd(b.num_, a.den_) == 0 ? 1 : std::gcd(b.num_, a.den_);
        return {detail::checked_mul(a.num_ / g1, b.num_ / g2),
                detail::checked_mul(a.den_ / g2, b.den_ / g1)};
    }
    friend Rational operator/(const Rational& a, const Rational& b) {
        if (b.num_ == 0) throw DomainError("rational division by zero");
        return a * Rational(b.den_, b.num_);
    }
    friend bool operator==(const Rational&, const Rational&) = default;

    /// Reduce into [0, modulus) for a positive integer modulus.
    Rational mod(std::int64_t modulus) const {
        const std::int64_t span = detail::checked_mul(modulus, den_);
        return {detail::mod_floor(num_, span), den_};
    }

    /// Parses "p/q" or a bare integer "p".
    static Rational parse(const std::string& text) {
        const auto slash = text.find('/');
        try {
            std::size_t used = 0;
            if (slash == std::string::npos) {
                const auto v = std::stoll(text, &used);
                if (used != text.size()) throw std::invalid_argument(text);
                return Rational(v);
            }
            const std::string p = text.substr(0, slash), q = text.substr(slash + 1);
            const auto pv = std::stoll(p, &used);
            if (used != p.size()) throw std::invalid_argument(text);
            const auto qv = std::stoll(q, &used);
            if (used != q.size()) throw std::invalid_argument(text);
            if (qv == 0) throw ConfigError("zero denominator in '" + text + "'");
            return Rational(pv, qv);
        } catch (const std::logic_error&) {
            throw ConfigError("not a rational literal: '" + text + "'");
        }
    }

    std::string str() const {
        return den_ == 1 ? std::to_string(num_) : std::to_string(num_) + "/" + std::to_string(den_);
    }

    friend std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.str(); }

private:
    void normalize() {
        if (den_ < 0) {
            num_ = -num_;
            den_ = -den_;
        }
        const std::int64_t g = std::gcd(num_, den_);
        if (g > 1) {
            num_ /= g;
            den_ /= g;
        }
    }

    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

} // namespace nctorus
