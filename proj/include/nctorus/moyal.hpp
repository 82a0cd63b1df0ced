#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "quadrature.hpp"

namespace nctorus {

/// A Moyal-plane element in the oscillator basis, truncated to indices below M
/// in each of the N tensor factors.
///
/// Tensor form holds N factor matrices and represents their tensor product;
/// expanded form holds one M^N x M^N matrix indexed by multi-indices in
/// row-major digit order (factor 0 is the most significant digit).
///
/// In this basis the product is the matrix product, which never moves support
/// outside the truncation. Loss of information only happens when an element is
/// cut down from a larger one; `tail_mass` then records sum |c|^2 over the
/// discarded coefficients and `exact` turns false. Products of inexact operands
/// carry a Frobenius bound on the truncation error instead.
class MoyalMatrix {
public:
    enum class Form { Tensor, Expanded };

    MoyalMatrix() = default;

    static MoyalMatrix tensor(double theta, std::vector<Eigen::MatrixXcd> factors) {
        if (factors.empty()) throw ShapeError("tensor form needs at least one factor");
        const auto M = factors.front().rows();
        for (const auto& f : factors)
            if (f.rows() != M || f.cols() != M) throw ShapeError("tensor factors must all be M x M");
        MoyalMatrix a;
        a.theta_ = check_theta(theta);
        a.N_ = factors.size();
        a.M_ = static_cast<std::size_t>(M);
        a.form_ = Form::Tensor;
        a.factors_ = std::move(factors);
        return a;
    }

    static MoyalMatrix expanded(double theta, std::size_t N, Eigen::MatrixXcd dense) {
        if (N == 0) throw ShapeError("N must be >= 1");
        const auto side = static_cast<std::size_t>(dense.rows());
        if (dense.cols() != dense.rows()) throw ShapeError("expanded matrix must be square");
        const std::size_t M = integer_root(side, N);
        MoyalMatrix a;
        a.theta_ = check_theta(theta);
        a.N_ = N;
        a.M_ = M;
        a.form_ = Form::Expanded;
        a.dense_ = std::move(dense);
        return a;
    }

    static MoyalMatrix zero(double theta, std::size_t N, std::size_t M) {
        return tensor(theta, std::vector<Eigen::MatrixXcd>(N, Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(M),
                                                                                     static_cast<Eigen::Index>(M))));
    }

    /// f_{mn} = f_{m_1 n_1} (x) ... (x) f_{m_N n_N}.
    static MoyalMatrix basis(double theta, std::size_t M, std::span<const std::size_t> m,
                             std::span<const std::size_t> n) {
        if (m.size() != n.size() || m.empty()) throw ShapeError("multi-index lengths differ");
        std::vector<Eigen::MatrixXcd> f;
        for (std::size_t t = 0; t < m.size(); ++t) {
            if (m[t] >= M || n[t] >= M) throw ShapeError("basis index outside the truncation");
            Eigen::MatrixXcd e = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(M), static_cast<Eigen::Index>(M));
            e(static_cast<Eigen::Index>(m[t]), static_cast<Eigen::Index>(n[t])) = 1.0;
            f.push_back(std::move(e));
        }
        return tensor(theta, std::move(f));
    }

    static MoyalMatrix basis(double theta, std::size_t M, std::size_t m, std::size_t n) {
        const std::size_t mm[1] = {m}, nn[1] = {n};
        return basis(theta, M, mm, nn);
    }

    std::size_t half_dim() const noexcept { return N_; }
    std::size_t truncation() const noexcept { return M_; }
    double theta() const noexcept { return theta_; }
    Form form() const noexcept { return form_; }
    bool exact() const noexcept { return exact_; }
    double tail_mass() const noexcept { return tail_; }
    const std::vector<Eigen::MatrixXcd>& factors() const noexcept { return factors_; }

    /// The M^N x M^N coefficient matrix (Kronecker product in tensor form).
    Eigen::MatrixXcd dense() const {
        if (form_ == Form::Expanded) return dense_;
        Eigen::MatrixXcd out = factors_.front();
        for (std::size_t t = 1; t < factors_.size(); ++t) out = kron(out, factors_[t]);
        return out;
    }

    MoyalMatrix to_expanded() const {
        MoyalMatrix a = expanded(theta_, N_, dense());
        a.exact_ = exact_;
        a.tail_ = tail_;
        return a;
    }

    /// Marks the element as a truncation of something larger whose discarded
    /// coefficients have squared mass `tail_mass`.
    MoyalMatrix with_tail(double tail_mass) const {
        if (tail_mass < 0.0) throw DomainError("tail mass must be nonnegative");
        MoyalMatrix a = *this;
        a.tail_ = tail_mass;
        a.exact_ = tail_mass == 0.0;
        return a;
    }

    /// Keeps indices below M' in every factor, recording what was dropped.
    MoyalMatrix truncate(std::size_t M_new) const {
        if (M_new == 0 || M_new > M_) throw ShapeError("truncation must shrink to a positive size");
        const Eigen::MatrixXcd full = dense();
        Eigen::MatrixXcd kept = Eigen::MatrixXcd::Zero(static_cast<Eigen::Index>(ipow(M_new, N_)),
                                                       static_cast<Eigen::Index>(ipow(M_new, N_)));
        double dropped = 0.0;
        for (Eigen::Index i = 0; i < full.rows(); ++i)
            for (Eigen::Index j = 0; j < full.cols(); ++j) {
                const auto di = digits(static_cast<std::size_t>(i)), dj = digits(static_cast<std::size_t>(j));
                bool inside = true;
                for (std::size_t t = 0; t < N_; ++t) inside = inside && di[t] < M_new && dj[t] < M_new;
                if (inside) kept(static_cast<Eigen::Index>(recode(di, M_new)),
                                 static_cast<Eigen::Index>(recode(dj, M_new))) = full(i, j);
                else dropped += std::norm(full(i, j));
            }
        MoyalMatrix a = expanded(theta_, N_, std::move(kept));
        a.tail_ = tail_ + dropped;
        a.exact_ = exact_ && dropped == 0.0;
        return a;
    }

    /// Multi-index digits of a flat expanded index.
    std::vector<std::size_t> digits(std::size_t flat) const {
        std::vector<std::size_t> d(N_);
        for (std::size_t t = N_; t-- > 0;) {
            d[t] = flat % M_;
            flat /= M_;
        }
        return d;
    }

    friend MoyalMatrix moyal_mul(const MoyalMatrix& a, const MoyalMatrix& b);
    friend MoyalMatrix involution(const MoyalMatrix& a);

private:
    static double check_theta(double theta) {
        if (!(theta > 0.0) || !std::isfinite(theta)) throw DomainError("theta must be positive");
        return theta;
    }

    static std::size_t ipow(std::size_t b, std::size_t e) {
        std::size_t r = 1;
        for (std::size_t i = 0; i < e; ++i) r *= b;
        return r;
    }

    static std::size_t integer_root(std::size_t side, std::size_t N) {
        for (std::size_t M = 1; ipow(M, N) <= side; ++M)
            if (ipow(M, N) == side) return M;
        throw ShapeError("expanded side " + std::to_string(side) + " is not an N-th power");
    }

    static std::size_t recode(const std::vector<std::size_t>& d, std::size_t M) {
        std::size_t flat = 0;
        for (auto x : d) flat = flat * M + x;
        return flat;
    }

    static Eigen::MatrixXcd kron(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
        Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
        for (Eigen::Index i = 0; i < a.rows(); ++i)
            for (Eigen::Index j = 0; j < a.cols(); ++j)
                out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
        return out;
    }

    double theta_ = 2.0;
    std::size_t N_ = 1;
    std::size_t M_ = 1;
    Form form_ = Form::Tensor;
    std::vector<Eigen::MatrixXcd> factors_;
    Eigen::MatrixXcd dense_;
    bool exact_ = true;
    double tail_ = 0.0;
};

/// sqrt(sum |c_mn|^2).
inline double coefficient_norm(const MoyalMatrix& a) {
    if (a.form() == MoyalMatrix::Form::Expanded) return a.dense().norm();
    double p = 1.0;
    for (const auto& f : a.factors()) p *= f.norm();
    return p;
}

/// Largest singular value of the coefficient matrix.
inline double spectral_norm(const MoyalMatrix& a) {
    auto top = [](const Eigen::MatrixXcd& m) {
        if (m.size() == 0) return 0.0;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(m);
        return svd.singularValues()(0);
    };
    if (a.form() == MoyalMatrix::Form::Expanded) return top(a.dense());
    double p = 1.0;
    for (const auto& f : a.factors()) p *= top(f);
    return p;
}

/// (ab)_mn = sum_k a_mk b_kn in every factor. A tensor operand meeting an
/// expanded one is expanded first.
inline MoyalMatrix moyal_mul(const MoyalMatrix& a, const MoyalMatrix& b) {
    if (a.N_ != b.N_ || a.M_ != b.M_)
        throw ShapeError("moyal_mul: shapes (N=" + std::to_string(a.N_) + ", M=" + std::to_string(a.M_) +
                         ") and (N=" + std::to_string(b.N_) + ", M=" + std::to_string(b.M_) + ") differ");
    if (a.theta_ != b.theta_) throw ShapeError("moyal_mul: theta differs between operands");
    MoyalMatrix out;
    if (a.form_ == MoyalMatrix::Form::Tensor && b.form_ == MoyalMatrix::Form::Tensor) {
        std::vector<Eigen::MatrixXcd> f(a.N_);
        for (std::size_t t = 0; t < a.N_; ++t) f[t] = a.factors_[t] * b.factors_[t];
        out = MoyalMatrix::tensor(a.theta_, std::move(f));
    } else {
        out = MoyalMatrix::expanded(a.theta_, a.N_, a.dense() * b.dense());
    }
    // (a_T + a_R)(b_T + b_R) - a_T b_T in Frobenius norm, with ||.||_op <= ||.||_F.
    const double ra = std::sqrt(a.tail_), rb = std::sqrt(b.tail_);
    const double err = ra * coefficient_norm(b) + coefficient_norm(a) * rb + ra * rb;
    out.tail_ = err * err;
    out.exact_ = a.exact_ && b.exact_;
    return out;
}

inline MoyalMatrix operator*(const MoyalMatrix& a, const MoyalMatrix& b) { return moyal_mul(a, b); }

/// f* has coefficient matrix c^dagger.
inline MoyalMatrix involution(const MoyalMatrix& a) {
    MoyalMatrix out = a;
    if (a.form_ == MoyalMatrix::Form::Tensor)
        for (auto& f : out.factors_) f = f.adjoint().eval();
    else
        out.dense_ = a.dense_.adjoint();
    return out;
}

/// r_k(c) = (sum theta^{2k} prod_t (m_t + 1/2)^k (n_t + 1/2)^k |c_mn|^2)^{1/2}.
inline double seminorm_rk(const MoyalMatrix& a, int k) {
    if (k < 0) throw DomainError("seminorm order must be >= 0");
    const double th = std::pow(a.theta(), 2.0 * k);
    auto weight = [k](std::size_t m) { return std::pow(static_cast<double>(m) + 0.5, k); };
    if (a.form() == MoyalMatrix::Form::Tensor) {
        double p = 1.0;
        for (const auto& f : a.factors()) {
            double s = 0.0;
            for (Eigen::Index m = 0; m < f.rows(); ++m)
                for (Eigen::Index n = 0; n < f.cols(); ++n)
                    s += th * weight(static_cast<std::size_t>(m)) * weight(static_cast<std::size_t>(n)) *
                         std::norm(f(m, n));
            p *= std::sqrt(s);
        }
        return p;
    }
    const Eigen::MatrixXcd d = a.dense();
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        const auto di = a.digits(static_cast<std::size_t>(i));
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            if (d(i, j) == Complex(0.0, 0.0)) continue;
            const auto dj = a.digits(static_cast<std::size_t>(j));
            double w = 1.0;
            for (std::size_t t = 0; t < di.size(); ++t) w *= th * weight(di[t]) * weight(dj[t]);
            s += w * std::norm(d(i, j));
        }
    }
    return std::sqrt(s);
}

/// The oscillator-basis pairing taken literally: <f_mn, f_kl> = theta^N delta,
/// which is the 2^N of the theta = 2 normalization.
inline double l2_norm(const MoyalMatrix& a) {
    return std::pow(a.theta(), 0.5 * static_cast<double>(a.half_dim())) * coefficient_norm(a);
}

/// The single normalization constant of the matrix model: kappa = ||f_00||_2 for
/// one factor, measured by quadrature of f_00(x) = 2 exp(-|x|^2 / theta) on R^2.
struct MoyalCalibration {
    double theta = 2.0;
    double kappa = 0.0;
    double quadrature_change = 0.0;
    std::size_t quadrature_points = 0;
};

inline MoyalCalibration calibrate_f00(double theta) {
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    // |f_00|^2 = 4 exp(-2|x|^2/theta) is below 1e-300 once |x|^2 > 350 theta.
    const double half_width = std::sqrt(350.0 * theta);
    const auto q = integrate_gaussian_like(
        [theta](std::span<const double> x) {
            const double r2 = x[0] * x[0] + x[1] * x[1];
            return std::complex<double>(4.0 * std::exp(-2.0 * r2 / theta), 0.0);
        },
        2, half_width);
    return {theta, std::sqrt(q.value.real()), q.relative_change, q.points_per_axis};
}

/// ||f||_2 with every factor scaled by the calibrated kappa.
inline double calibrated_l2_norm(const MoyalMatrix& a, const MoyalCalibration& cal) {
    if (cal.theta != a.theta()) throw DomainError("calibration was computed for a different theta");
    return std::pow(cal.kappa, static_cast<double>(a.half_dim())) * coefficient_norm(a);
}

struct OpNormBound {
    double opnorm_trunc = 0.0;
    double bound = 0.0;
    bool ok = false;
};

/// ||f||_op against (2 pi theta)^{-N/2} ||f||_2 on the truncated matrix.
inline OpNormBound opnorm_bound_check(const MoyalMatrix& a, const MoyalCalibration& cal) {
    OpNormBound r;
    r.opnorm_trunc = spectral_norm(a);
    r.bound = std::pow(2.0 * std::numbers::pi * a.theta(), -0.5 * static_cast<double>(a.half_dim())) *
              calibrated_l2_norm(a, cal);
    r.ok = r.opnorm_trunc <= r.bound + 1e-12;
    return r;
}

/// amplitude * exp(i k.x) on R^{2N}.
struct PlaneWave {
    std::vector<double> k;
    Complex amplitude{1.0, 0.0};

    std::size_t dim() const noexcept { return k.size(); }
    double modulus() const { return std::abs(amplitude); }
    /// Operator norm of the multiplication-by-wave operator.
    double opnorm() const { return modulus(); }
};

/// exp(ik.) * exp(il.) = exp(i(k+l).) e^{-pi i k.Theta l}.
inline PlaneWave plane_wave_mul(const PlaneWave& w1, const PlaneWave& w2, const SkewMatrix& theta) {
    if (w1.dim() != w2.dim() || w1.dim() != theta.dim()) throw DimensionError("plane waves and Theta disagree on dimension");
    PlaneWave out;
    out.k.resize(w1.dim());
    for (std::size_t i = 0; i < w1.dim(); ++i) out.k[i] = w1.k[i] + w2.k[i];
    out.amplitude = w1.amplitude * w2.amplitude * unit_phase(reduce_mod2(theta.form(w1.k, w2.k)));
    return out;
}

/// E_a f(x) = a^{N/2} f(a^{1/2} x) on a wave.
inline PlaneWave dilate(const PlaneWave& w, double a) {
    if (w.dim() % 2 != 0) throw DimensionError("plane wave dimension must be even");
    PlaneWave out = w;
    const double s = std::sqrt(a);
    for (auto& x : out.k) x *= s;
    out.amplitude *= std::pow(a, 0.25 * static_cast<double>(w.dim()));
    return out;
}

/// Max of covector and amplitude residuals between f *_theta g and
/// (theta/2)^{-N/2} E_{2/theta}(E_{theta/2} f *_2 E_{theta/2} g).
inline double scaling_identity_check(const PlaneWave& w1, const PlaneWave& w2, double theta) {
    if (!(theta > 0.0)) throw DomainError("theta must be positive");
    if (w1.dim() != w2.dim() || w1.dim() % 2 != 0 || w1.dim() == 0)
        throw DimensionError("plane waves must share an even dimension");
    const std::size_t N = w1.dim() / 2;
    const PlaneWave lhs = plane_wave_mul(w1, w2, SkewMatrix::symplectic(N, theta));
    PlaneWave rhs = dilate(plane_wave_mul(dilate(w1, theta / 2.0), dilate(w2, theta / 2.0), SkewMatrix::symplectic(N, 2.0)),
                           2.0 / theta);
    rhs.amplitude *= std::pow(theta / 2.0, -0.5 * static_cast<double>(N));
    double res = std::abs(lhs.amplitude - rhs.amplitude);
    for (std::size_t i = 0; i < lhs.k.size(); ++i) res = std::max(res, std::abs(lhs.k[i] - rhs.k[i]));
    return res;
}

} // namespace nctorus
