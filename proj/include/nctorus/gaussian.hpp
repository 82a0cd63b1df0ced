#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <map>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "polynomial.hpp"

namespace nctorus {

namespace detail {

/// P(x) exp(-x^T A x + b^T x + c) with no positivity requirement on A; used for
/// the joint integrands that appear inside Fourier transforms and products.
struct QuadraticExp {
    Eigen::MatrixXcd A;
    Eigen::VectorXcd b;
    Complex c{};
    Polynomial P;

    std::size_t dim() const { return static_cast<std::size_t>(b.size()); }
};

/// E[w^a] for the complex Gaussian weight e^{-w^T B w}, i.e. covariance (2B)^{-1},
/// by the recursion E[w_j w^g] = sum_i S_ji g_i E[w^{g - e_i}].
class WickMoments {
public:
    explicit WickMoments(Eigen::MatrixXcd cov) : S_(std::move(cov)) {}

    Complex operator()(const Polynomial::Exponents& a) {
        int tot = 0;
        for (int x : a) tot += x;
        if (tot == 0) return 1.0;
        if (tot % 2 == 1) return 0.0;
        if (auto it = memo_.find(a); it != memo_.end()) return it->second;
        std::size_t j = 0;
        while (a[j] == 0) ++j;
        Polynomial::Exponents g = a;
        --g[j];
        Complex s{};
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (g[i] == 0) continue;
            Polynomial::Exponents h = g;
            --h[i];
            s += S_(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) * static_cast<double>(g[i]) * (*this)(h);
        }
        memo_.emplace(a, s);
        return s;
    }

private:
    Eigen::MatrixXcd S_;
    std::map<Polynomial::Exponents, Complex> memo_;
};

/// Integrates out the trailing dim() - keep variables. Only the real part of
/// the trailing block has to be positive definite.
inline QuadraticExp partial_integrate(const QuadraticExp& f, std::size_t keep) {
    const auto D = static_cast<Eigen::Index>(f.dim());
    const auto kx = static_cast<Eigen::Index>(keep);
    const auto ky = D - kx;
    if (ky < 0) throw DimensionError("cannot keep more variables than exist");
    if (ky == 0) return f;

    const Eigen::MatrixXcd B = f.A.bottomRightCorner(ky, ky);
    const Eigen::MatrixXd reB = B.real();
    Eigen::LLT<Eigen::MatrixXd> chol(reB);
    if (chol.info() != Eigen::Success) throw DomainError("integrated block is not positive definite");
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(B);
    const Eigen::MatrixXcd Axy = f.A.topRightCorner(kx, ky);
    const Eigen::MatrixXcd Ayx = f.A.bottomLeftCorner(ky, kx);
    const Eigen::VectorXcd bx = f.b.head(kx), by = f.b.tail(ky);
    const Eigen::MatrixXcd BinvAyx = lu.solve(Ayx);
    const Eigen::VectorXcd Binvby = lu.solve(by);

    QuadraticExp out;
    out.A = f.A.topLeftCorner(kx, kx) - Axy * BinvAyx;
    out.A = (0.5 * (out.A + out.A.transpose())).eval();
    out.b = bx - Axy * Binvby;
    Complex logdet{};
    Eigen::ComplexEigenSolver<Eigen::MatrixXcd> eig(B, false);
    for (Eigen::Index i = 0; i < ky; ++i) logdet += std::log(eig.eigenvalues()(i));
    out.c = f.c + 0.25 * (by.transpose() * Binvby)(0) +
            0.5 * static_cast<double>(ky) * std::log(std::numbers::pi) - 0.5 * logdet;

    // y = -B^{-1} A_yx x + w + B^{-1} b_y / 2, then average the polynomial over w.
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Identity(D, D);
    L.bottomLeftCorner(ky, kx) = -BinvAyx;
    Eigen::VectorXcd t = Eigen::VectorXcd::Zero(D);
    t.tail(ky) = 0.5 * Binvby;
    const Polynomial shifted = f.P.compose_affine(L, t);
    WickMoments moments(0.5 * lu.inverse());
    out.P = Polynomial(keep);
    for (const auto& [e, coef] : shifted.terms()) {
        const Polynomial::Exponents ex(e.begin(), e.begin() + kx), ew(e.begin() + kx, e.end());
        const Complex m = moments(ew);
        if (m != Complex(0.0, 0.0)) out.P.add(ex, coef * m);
    }
    return out;
}

} // namespace detail

/// f(x) = P(x) exp(-x^T A x + b^T x + c) on R^d with A complex symmetric and
/// Re A positive definite. The family is closed under translation, modulation,
/// products, the Fourier transform and the Moyal product, all in closed form.
class Gaussian {
public:
    Gaussian() = default;

    Gaussian(Eigen::MatrixXcd A, Eigen::VectorXcd b, Complex c, Polynomial P)
        : A_(std::move(A)), b_(std::move(b)), c_(c), P_(std::move(P)) {
        validate();
    }

    /// exp(-pi |x|^2), its own Fourier transform.
    static Gaussian standard(std::size_t d) {
        return {std::numbers::pi * Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d)),
                Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(d)), 0.0, Polynomial::constant(d, 1.0)};
    }

    /// amplitude * p(x) * exp(-(x - mu)^T A (x - mu)) with A real.
    static Gaussian centered(const Eigen::MatrixXd& A, const Eigen::VectorXd& mu, Polynomial p, Complex amplitude) {
        if (amplitude == Complex(0.0, 0.0)) p = Polynomial(static_cast<std::size_t>(mu.size()));
        const Complex la = amplitude == Complex(0.0, 0.0) ? Complex{} : std::log(amplitude);
        return {A.cast<Complex>(), (2.0 * A * mu).cast<Complex>(), la - mu.dot(A * mu), std::move(p)};
    }

    static Gaussian zero(std::size_t d) {
        Gaussian g = standard(d);
        g.P_ = Polynomial(d);
        return g;
    }

    std::size_t dim() const { return static_cast<std::size_t>(b_.size()); }
    const Eigen::MatrixXcd& A() const noexcept { return A_; }
    const Eigen::VectorXcd& b() const noexcept { return b_; }
    Complex c() const noexcept { return c_; }
    const Polynomial& poly() const noexcept { return P_; }
    bool is_zero() const noexcept { return P_.is_zero(); }

    Complex operator()(std::span<const double> x) const {
        if (is_zero()) return 0.0;
        return P_.evaluate(x) * std::exp(exponent(x));
    }

    /// log |f(x)|, -inf where f vanishes.
    double log_abs(std::span<const double> x) const {
        const double p = std::abs(P_.evaluate(x));
        if (p == 0.0) return -std::numeric_limits<double>::infinity();
        return std::log(p) + exponent(x).real();
    }

    /// The exponent -x^T A x + b^T x + c.
    Complex exponent(std::span<const double> x) const {
        if (x.size() != dim()) throw DimensionError("evaluation point has wrong dimension");
        const Eigen::Map<const Eigen::VectorXd> v(x.data(), static_cast<Eigen::Index>(x.size()));
        const Eigen::VectorXcd vc = v.cast<Complex>();
        return -(vc.transpose() * A_ * vc)(0) + (b_.transpose() * vc)(0) + c_;
    }

    /// x -> f(x + delta).
    Gaussian translate(std::span<const double> delta) const {
        if (delta.size() != dim()) throw DimensionError("translation has wrong dimension");
        const Eigen::VectorXcd d = Eigen::Map<const Eigen::VectorXd>(delta.data(), static_cast<Eigen::Index>(dim())).cast<Complex>();
        Gaussian g = *this;
        g.b_ = b_ - 2.0 * A_ * d;
        g.c_ = c_ - (d.transpose() * A_ * d)(0) + (b_.transpose() * d)(0);
        g.P_ = P_.compose_affine(Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim())), d);
        return g;
    }

    /// x -> e^{2 pi i xi.x} f(x).
    Gaussian modulate(std::span<const double> xi) const {
        if (xi.size() != dim()) throw DimensionError("modulation has wrong dimension");
        Gaussian g = *this;
        for (std::size_t j = 0; j < dim(); ++j) g.b_[static_cast<Eigen::Index>(j)] += Complex(0.0, 2.0 * std::numbers::pi * xi[j]);
        return g;
    }

    /// x -> f(-x).
    Gaussian reflect() const {
        Gaussian g = *this;
        g.b_ = -b_;
        g.P_ = P_.compose_affine(-Eigen::MatrixXcd::Identity(static_cast<Eigen::Index>(dim()), static_cast<Eigen::Index>(dim())),
                                 Eigen::VectorXcd::Zero(static_cast<Eigen::Index>(dim())));
        return g;
    }

    Gaussian conj() const {
        Gaussian g = *this;
        g.A_ = A_.conjugate();
        g.b_ = b_.conjugate();
        g.c_ = std::conj(c_);
        g.P_ = P_.conj();
        return g;
    }

    Gaussian scaled(Complex s) const {
        Gaussian g = *this;
        g.P_ *= s;
        return g;
    }

    /// Pointwise product.
    friend Gaussian operator*(const Gaussian& f, const Gaussian& g) {
        if (f.dim() != g.dim()) throw DimensionError("pointwise product of different dimensions");
        return {f.A_ + g.A_, f.b_ + g.b_, f.c_ + g.c_, f.P_ * g.P_};
    }

    detail::QuadraticExp raw() const { return {A_, b_, c_, P_}; }

    static Gaussian from_raw(const detail::QuadraticExp& q) { return {q.A, q.b, q.c, q.P}; }

private:
    void validate() {
        const auto d = b_.size();
        if (A_.rows() != d || A_.cols() != d) throw DimensionError("quadratic form and linear term disagree on dimension");
        if (P_.dim() != static_cast<std::size_t>(d)) throw DimensionError("polynomial has the wrong number of variables");
        const double scale = std::max(1.0, A_.cwiseAbs().maxCoeff());
        if ((A_ - A_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale) throw DomainError("quadratic form must be symmetric");
        A_ = (0.5 * (A_ + A_.transpose())).eval();
        if (d == 0) return;
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A_.real());
        if (!(eig.eigenvalues().minCoeff() > 0.0)) throw DomainError("real part of the quadratic form must be positive definite");
    }

    Eigen::MatrixXcd A_;
    Eigen::VectorXcd b_;
    Complex c_{};
    Polynomial P_;
};

namespace detail {

// Joint integrand in (u, t) for int f(t) e^{sign 2 pi i u.t} dt.
inline QuadraticExp fourier_joint(const Gaussian& f, double sign) {
    const auto d = static_cast<Eigen::Index>(f.dim());
    QuadraticExp q;
    q.A = Eigen::MatrixXcd::Zero(2 * d, 2 * d);
    q.A.topRightCorner(d, d) = Complex(0.0, -sign * std::numbers::pi) * Eigen::MatrixXcd::Identity(d, d);
    q.A.bottomLeftCorner(d, d) = q.A.topRightCorner(d, d);
    q.A.bottomRightCorner(d, d) = f.A();
    q.b = Eigen::VectorXcd::Zero(2 * d);
    q.b.tail(d) = f.b();
    q.c = f.c();
    Eigen::MatrixXcd L = Eigen::MatrixXcd::Zero(d, 2 * d);
    L.rightCols(d) = Eigen::MatrixXcd::Identity(d, d);
    q.P = f.poly().compose_affine(L, Eigen::VectorXcd::Zero(d));
    return q;
}

} // namespace detail

/// (Ff)(u) = int f(t) e^{-2 pi i t.u} dt in closed form.
inline Gaussian gaussian_ft(const Gaussian& f) {
    if (f.is_zero()) return Gaussian::zero(f.dim());
    return Gaussian::from_raw(detail::partial_integrate(detail::fourier_joint(f, -1.0), f.dim()));
}

/// (F^{-1}F)(x) = int F(u) e^{2 pi i u.x} du.
inline Gaussian gaussian_ift(const Gaussian& f) {
    if (f.is_zero()) return Gaussian::zero(f.dim());
    return Gaussian::from_raw(detail::partial_integrate(detail::fourier_joint(f, 1.0), f.dim()));
}

/// log |int f|, -inf for the zero function.
inline double log_abs_integral(const Gaussian& f) {
    if (f.is_zero()) return -std::numeric_limits<double>::infinity();
    const auto q = detail::partial_integrate(f.raw(), 0);
    const double p = std::abs(q.P.constant_term());
    if (p == 0.0) return -std::numeric_limits<double>::infinity();
    return std::log(p) + q.c.real();
}

inline Complex integral(const Gaussian& f) {
    if (f.is_zero()) return 0.0;
    const auto q = detail::partial_integrate(f.raw(), 0);
    return q.P.constant_term() * std::exp(q.c);
}

/// int conj(f) g.
inline Complex inner_product(const Gaussian& f, const Gaussian& g) { return integral(f.conj() * g); }

/// log ||f||_2, computed without leaving log space.
inline double log_l2_norm(const Gaussian& f) { return 0.5 * log_abs_integral(f.conj() * f); }

/// ||f - g||_2 from the three pairings.
inline double l2_distance(const Gaussian& f, const Gaussian& g) {
    const double ff = inner_product(f, f).real(), gg = inner_product(g, g).real();
    const double fg = inner_product(f, g).real();
    return std::sqrt(std::max(0.0, ff + gg - 2.0 * fg));
}

/// The Moyal product through F(f * g)(x) = int Ff(x - y) Fg(y) e^{pi i y.Theta x} dy.
/// With e_k(x) = exp(2 pi i k.x) this gives e_k * e_l = e^{-pi i k.Theta l} e_{k+l}.
inline Gaussian moyal_product(const Gaussian& f, const Gaussian& g, const SkewMatrix& theta) {
    if (f.dim() != g.dim() || f.dim() != theta.dim()) throw DimensionError("Moyal product: dimensions differ");
    const auto d = static_cast<Eigen::Index>(f.dim());
    if (f.is_zero() || g.is_zero()) return Gaussian::zero(f.dim());
    const Gaussian F = gaussian_ft(f), G = gaussian_ft(g);
    Eigen::MatrixXcd T(d, d);
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) T(i, j) = theta(static_cast<std::size_t>(i), static_cast<std::size_t>(j));
    const Complex half_pi_i(0.0, 0.5 * std::numbers::pi);

    detail::QuadraticExp q;
    q.A.resize(2 * d, 2 * d);
    q.A.topLeftCorner(d, d) = F.A();
    q.A.topRightCorner(d, d) = -F.A() + half_pi_i * T;
    q.A.bottomLeftCorner(d, d) = -F.A() - half_pi_i * T;
    q.A.bottomRightCorner(d, d) = F.A() + G.A();
    q.b.resize(2 * d);
    q.b.head(d) = F.b();
    q.b.tail(d) = G.b() - F.b();
    q.c = F.c() + G.c();
    Eigen::MatrixXcd Lf(d, 2 * d), Lg = Eigen::MatrixXcd::Zero(d, 2 * d);
    Lf << Eigen::MatrixXcd::Identity(d, d), -Eigen::MatrixXcd::Identity(d, d);
    Lg.rightCols(d) = Eigen::MatrixXcd::Identity(d, d);
    const Eigen::VectorXcd zero = Eigen::VectorXcd::Zero(d);
    q.P = F.poly().compose_affine(Lf, zero) * G.poly().compose_affine(Lg, zero);
    return gaussian_ift(Gaussian::from_raw(detail::partial_integrate(q, f.dim())));
}

} // namespace nctorus
