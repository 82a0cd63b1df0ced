#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstddef>
#include <map>
#include <span>
#include <vector>

#include "errors.hpp"

namespace nctorus {

/// Complex polynomial in `dim` variables, stored as exponent vector -> coefficient.
class Polynomial {
public:
    using Complex = std::complex<double>;
    using Exponents = std::vector<int>;

    Polynomial() = default;
    explicit Polynomial(std::size_t dim) : dim_(dim) {}

    static Polynomial constant(std::size_t dim, Complex c) {
        Polynomial p(dim);
        p.add(Exponents(dim, 0), c);
        return p;
    }
    static Polynomial variable(std::size_t dim, std::size_t j) {
        if (j >= dim) throw DimensionError("polynomial variable index out of range");
        Exponents e(dim, 0);
        e[j] = 1;
        Polynomial p(dim);
        p.add(e, 1.0);
        return p;
    }
    /// sum_j coeffs[j] x_j + offset.
    static Polynomial affine(std::span<const Complex> coeffs, Complex offset) {
        Polynomial p = constant(coeffs.size(), offset);
        for (std::size_t j = 0; j < coeffs.size(); ++j) {
            Exponents e(coeffs.size(), 0);
            e[j] = 1;
            p.add(e, coeffs[j]);
        }
        return p;
    }

    std::size_t dim() const noexcept { return dim_; }
    const std::map<Exponents, Complex>& terms() const noexcept { return terms_; }
    bool is_zero() const noexcept { return terms_.empty(); }

    int degree() const {
        int d = 0;
        for (const auto& [e, c] : terms_) d = std::max(d, total(e));
        return d;
    }

    void add(const Exponents& e, Complex c) {
        if (e.size() != dim_) throw DimensionError("exponent vector has wrong length");
        if (c == Complex(0.0, 0.0)) return;
        auto [it, inserted] = terms_.try_emplace(e, c);
        if (!inserted) {
            it->second += c;
            if (it->second == Complex(0.0, 0.0)) terms_.erase(it);
        }
    }

    Complex coeff(const Exponents& e) const {
        auto it = terms_.find(e);
        return it == terms_.end() ? Complex{} : it->second;
    }

    /// Coefficient of the constant monomial.
    Complex constant_term() const { return coeff(Exponents(dim_, 0)); }

    Polynomial& operator+=(const Polynomial& o) {
        require(o);
        for (const auto& [e, c] : o.terms_) add(e, c);
        return *this;
    }
    Polynomial& operator*=(Complex s) {
        if (s == Complex(0.0, 0.0)) terms_.clear();
        for (auto& [e, c] : terms_) c *= s;
        return *this;
    }
    friend Polynomial operator+(Polynomial a, const Polynomial& b) { return a += b; }
    friend Polynomial operator*(Complex s, Polynomial a) { return a *= s; }
    friend Polynomial operator*(const Polynomial& a, const Polynomial& b) {
        a.require(b);
        Polynomial out(a.dim_);
        Exponents e(a.dim_);
        for (const auto& [ea, ca] : a.terms_)
            for (const auto& [eb, cb] : b.terms_) {
                for (std::size_t j = 0; j < a.dim_; ++j) e[j] = ea[j] + eb[j];
                out.add(e, ca * cb);
            }
        return out;
    }

    Polynomial conj() const {
        Polynomial out(dim_);
        for (const auto& [e, c] : terms_) out.terms_.emplace(e, std::conj(c));
        return out;
    }

    Polynomial derivative(std::size_t j) const {
        if (j >= dim_) throw DimensionError("derivative index out of range");
        Polynomial out(dim_);
        for (const auto& [e, c] : terms_) {
            if (e[j] == 0) continue;
            Exponents lower = e;
            --lower[j];
            out.add(lower, static_cast<double>(e[j]) * c);
        }
        return out;
    }

    template <class Scalar>
    Complex evaluate(std::span<const Scalar> x) const {
        if (x.size() != dim_) throw DimensionError("evaluation point has wrong dimension");
        Complex s{};
        for (const auto& [e, c] : terms_) {
            Complex t = c;
            for (std::size_t j = 0; j < dim_; ++j)
                for (int k = 0; k < e[j]; ++k) t *= x[j];
            s += t;
        }
        return s;
    }

    /// sum |c_a| r^{|a|}: bounds |P(x)| whenever every |x_j| <= r.
    double magnitude_bound(double r) const {
        double s = 0.0;
        for (const auto& [e, c] : terms_) s += std::abs(c) * std::pow(r, total(e));
        return s;
    }

    /// Q(z) = P(L z + t) for L of shape dim() x k.
    Polynomial compose_affine(const Eigen::MatrixXcd& L, const Eigen::VectorXcd& t) const {
        if (static_cast<std::size_t>(L.rows()) != dim_ || t.size() != L.rows())
            throw DimensionError("affine substitution has wrong shape");
        const auto k = static_cast<std::size_t>(L.cols());
        std::vector<Polynomial> lin;
        lin.reserve(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            std::vector<Complex> row(k);
            for (std::size_t j = 0; j < k; ++j) row[j] = L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
            lin.push_back(affine(row, t[static_cast<Eigen::Index>(i)]));
        }
        // powers[i][p] = lin_i^p
        std::vector<std::vector<Polynomial>> powers(dim_);
        for (const auto& [e, c] : terms_)
            for (std::size_t i = 0; i < dim_; ++i)
                while (static_cast<int>(powers[i].size()) <= e[i])
                    powers[i].push_back(powers[i].empty() ? constant(k, 1.0) : powers[i].back() * lin[i]);
        Polynomial out(k);
        for (const auto& [e, c] : terms_) {
            Polynomial term = constant(k, c);
            for (std::size_t i = 0; i < dim_; ++i)
                if (e[i] > 0) term = term * powers[i][static_cast<std::size_t>(e[i])];
            out += term;
        }
        return out;
    }

    friend bool operator==(const Polynomial&, const Polynomial&) = default;

private:
    static int total(const Exponents& e) {
        int s = 0;
        for (int x : e) s += x;
        return s;
    }
    void require(const Polynomial& o) const {
        if (o.dim_ != dim_) throw DimensionError("polynomials in different numbers of variables");
    }

    std::size_t dim_ = 0;
    std::map<Exponents, Complex> terms_;
};

} // namespace nctorus
