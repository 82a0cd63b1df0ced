#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <map>
#include <random>
#include <utility>
#include <vector>

#include <Eigen/Sparse>

#include "errors.hpp"
#include "lattice.hpp"

namespace nctorus {

/// Coefficients with magnitude below this are treated as exact zeros.
inline constexpr double kPruneThreshold = 1e-300;

/// Element sum_k c_k U_k of the smooth noncommutative torus with finite support.
/// Coefficients are kept in lexicographic order of k.
class TorusElement {
public:
    using CoeffMap = std::map<LatticePoint, Complex>;

    TorusElement() = default;
    explicit TorusElement(SkewMatrix theta) : theta_(std::move(theta)) {}
    TorusElement(SkewMatrix theta, const CoeffMap& coeffs) : theta_(std::move(theta)) {
        for (const auto& [k, c] : coeffs) add(k, c);
    }

    /// c U_k.
    static TorusElement basis(const SkewMatrix& theta, const LatticePoint& k, Complex c = 1.0) {
        TorusElement e(theta);
        e.add(k, c);
        return e;
    }
    static TorusElement identity(const SkewMatrix& theta) { return basis(theta, LatticePoint(theta.dim())); }
    /// The generator u_j = U_{e_j}.
    static TorusElement generator(const SkewMatrix& theta, std::size_t j) {
        return basis(theta, LatticePoint::unit(theta.dim(), j));
    }

    const SkewMatrix& theta() const noexcept { return theta_; }
    std::size_t dim() const noexcept { return theta_.dim(); }
    const CoeffMap& coeffs() const noexcept { return coeffs_; }
    std::size_t size() const noexcept { return coeffs_.size(); }
    bool empty() const noexcept { return coeffs_.empty(); }

    Complex coeff(const LatticePoint& k) const {
        auto it = coeffs_.find(k);
        return it == coeffs_.end() ? Complex{} : it->second;
    }

    /// Adds c to the coefficient at k, pruning the entry if it becomes negligible.
    void add(const LatticePoint& k, Complex c) {
        if (k.size() != dim()) throw DimensionError("coefficient index " + k.str() + " has wrong dimension");
        auto [it, inserted] = coeffs_.try_emplace(k, c);
        if (!inserted) it->second += c;
        if (std::abs(it->second) < kPruneThreshold) coeffs_.erase(it);
    }

    void set(const LatticePoint& k, Complex c) {
        coeffs_.erase(k);
        add(k, c);
    }

    /// Largest l-infinity norm over the support (0 for the zero element).
    std::int64_t support_radius() const {
        std::int64_t r = 0;
        for (const auto& [k, c] : coeffs_) r = std::max(r, k.linf());
        return r;
    }

    TorusElement& operator+=(const TorusElement& o) {
        require_same_algebra(o);
        for (const auto& [k, c] : o.coeffs_) add(k, c);
        return *this;
    }
    TorusElement& operator-=(const TorusElement& o) {
        require_same_algebra(o);
        for (const auto& [k, c] : o.coeffs_) add(k, -c);
        return *this;
    }
    TorusElement& operator*=(Complex s) {
        if (s == Complex{}) {
            coeffs_.clear();
            return *this;
        }
        for (auto it = coeffs_.begin(); it != coeffs_.end();) {
            it->second *= s;
            it = std::abs(it->second) < kPruneThreshold ? coeffs_.erase(it) : std::next(it);
        }
        return *this;
    }
    friend TorusElement operator+(TorusElement a, const TorusElement& b) { return a += b; }
    friend TorusElement operator-(TorusElement a, const TorusElement& b) { return a -= b; }
    friend TorusElement operator*(Complex s, TorusElement a) { return a *= s; }

    friend bool operator==(const TorusElement& a, const TorusElement& b) {
        return a.theta_ == b.theta_ && a.coeffs_ == b.coeffs_;
    }

    void require_same_algebra(const TorusElement& o) const {
        if (!(theta_ == o.theta_))
            throw AlgebraMismatch("elements belong to different algebras: Theta " + theta_.str() + " vs " + o.theta_.str());
    }

private:
    SkewMatrix theta_;
    CoeffMap coeffs_;
};

namespace detail {

/// Evaluates e^{-i pi r.Theta s} for a fixed left index r against many s.
/// Exact matrices use a table of the 2D roots of unity e^{-i pi t / D}.
class TwistKernel {
public:
    explicit TwistKernel(const SkewMatrix& theta) : theta_(theta), n_(theta.dim()) {
        if (theta_.exact() && theta_.denominator() <= (1 << 20)) {
            const std::int64_t span = 2 * theta_.denominator();
            table_.resize(static_cast<std::size_t>(span));
            for (std::int64_t t = 0; t < span; ++t) table_[t] = unit_phase(theta_.reduce_numerator(t));
        }
    }

    void set_left(const LatticePoint& r) {
        for (std::size_t j = 0; j < n_; ++j) {
            if (theta_.exact()) {
                std::int64_t w = 0;
                for (std::size_t i = 0; i < n_; ++i)
                    w = checked_add(w, checked_mul(r[i], theta_.scaled_entry(i, j)));
                iw_[j] = w;
            } else {
                double w = 0.0;
                for (std::size_t i = 0; i < n_; ++i) w += static_cast<double>(r[i]) * theta_(i, j);
                fw_[j] = w;
            }
        }
    }

    Complex operator()(const LatticePoint& s) const {
        if (theta_.exact()) {
            std::int64_t t = 0;
            for (std::size_t j = 0; j < n_; ++j) t = checked_add(t, checked_mul(iw_[j], s[j]));
            if (!table_.empty()) return table_[static_cast<std::size_t>(mod_floor(t, 2 * theta_.denominator()))];
            return unit_phase(theta_.reduce_numerator(t));
        }
        double x = 0.0;
        for (std::size_t j = 0; j < n_; ++j) x += fw_[j] * static_cast<double>(s[j]);
        return unit_phase(reduce_mod2(x));
    }

private:
    const SkewMatrix& theta_;
    std::size_t n_;
    std::vector<Complex> table_;
    std::array<std::int64_t, kMaxDim> iw_{};
    std::array<double, kMaxDim> fw_{};
};

struct Bounds {
    LatticePoint lo, hi;
};

inline Bounds support_bounds(const TorusElement::CoeffMap& m, std::size_t n) {
    Bounds b{LatticePoint(n), LatticePoint(n)};
    bool first = true;
    for (const auto& [k, c] : m) {
        for (std::size_t i = 0; i < n; ++i) {
            if (first || k[i] < b.lo[i]) b.lo[i] = k[i];
            if (first || k[i] > b.hi[i]) b.hi[i] = k[i];
        }
        first = false;
    }
    return b;
}

/// Twisted convolution of two coefficient maps:
/// (f * g)(p) = sum_{r+s=p} f(r) g(s) e^{-i pi r.Theta s}.
/// Accumulates into a dense box when the Minkowski-sum bounding box is small
/// relative to the work, otherwise into an ordered map.
inline TorusElement::CoeffMap twisted_convolution(const SkewMatrix& theta, const TorusElement::CoeffMap& f,
                                                  const TorusElement::CoeffMap& g) {
    TorusElement::CoeffMap out;
    if (f.empty() || g.empty()) return out;
    const std::size_t n = theta.dim();
    const Bounds bf = support_bounds(f, n), bg = support_bounds(g, n);
    LatticePoint lo = bf.lo + bg.lo, hi = bf.hi + bg.hi;

    std::array<std::size_t, kMaxDim> stride{};
    double volume = 1.0;
    for (std::size_t i = n; i-- > 0;) {
        stride[i] = static_cast<std::size_t>(volume);
        volume *= static_cast<double>(hi[i] - lo[i] + 1);
    }
    const double work = static_cast<double>(f.size()) * static_cast<double>(g.size());
    TwistKernel twist(theta);

    std::vector<std::pair<std::size_t, Complex>> gs;
    gs.reserve(g.size());

    if (volume <= std::max(64.0, 8.0 * work) && volume <= double(1 << 26)) {
        std::vector<Complex> acc(static_cast<std::size_t>(volume));
        for (const auto& [s, gv] : g) {
            std::size_t idx = 0;
            for (std::size_t i = 0; i < n; ++i) idx += static_cast<std::size_t>(s[i] - bg.lo[i]) * stride[i];
            gs.emplace_back(idx, gv);
        }
        for (const auto& [r, fv] : f) {
            twist.set_left(r);
            std::size_t base = 0;
            for (std::size_t i = 0; i < n; ++i) base += static_cast<std::size_t>(r[i] - bf.lo[i]) * stride[i];
            std::size_t j = 0;
            for (const auto& [s, gv] : g) {
                acc[base + gs[j].first] += fv * gv * twist(s);
                ++j;
            }
        }
        std::size_t idx = 0;
        for (const auto& p : BoxRange(lo, hi)) {
            const Complex v = acc[idx++];
            if (std::abs(v) >= kPruneThreshold) out.emplace_hint(out.end(), p, v);
        }
        return out;
    }

    for (const auto& [r, fv] : f) {
        twist.set_left(r);
        for (const auto& [s, gv] : g) out[r + s] += fv * gv * twist(s);
    }
    std::erase_if(out, [](const auto& kv) { return std::abs(kv.second) < kPruneThreshold; });
    return out;
}

} // namespace detail

/// Exact twisted product a *_Theta b; support(a*b) is inside support(a)+support(b).
inline TorusElement star_product(const TorusElement& a, const TorusElement& b) {
    a.require_same_algebra(b);
    TorusElement out(a.theta());
    for (auto& [k, c] : detail::twisted_convolution(a.theta(), a.coeffs(), b.coeffs())) out.add(k, c);
    return out;
}

inline TorusElement operator*(const TorusElement& a, const TorusElement& b) { return star_product(a, b); }

/// a*(p) = conj(a(-p)).
inline TorusElement involution(const TorusElement& a) {
    TorusElement out(a.theta());
    for (const auto& [k, c] : a.coeffs()) out.add(-k, std::conj(c));
    return out;
}

/// Tracial state tau(a) = coefficient at 0.
inline Complex trace(const TorusElement& a) { return a.coeff(LatticePoint(a.dim())); }

/// GNS inner product tau(a* b) = sum_k conj(a_k) b_k (the twist vanishes on r = -s).
inline Complex gns_inner(const TorusElement& a, const TorusElement& b) {
    a.require_same_algebra(b);
    Complex s{};
    const auto& small = a.size() <= b.size() ? a.coeffs() : b.coeffs();
    for (const auto& [k, c] : small) {
        const Complex ca = a.coeff(k), cb = b.coeff(k);
        s += std::conj(ca) * cb;
    }
    return s;
}

/// sum |c_k|, an upper bound for the C*-norm.
inline double l1_bound(const TorusElement& a) {
    double s = 0.0;
    for (const auto& [k, c] : a.coeffs()) s += std::abs(c);
    return s;
}

/// Vector of l^2(Z^n) in the orthonormal basis xi_k.
class GnsVector {
public:
    using CoeffMap = std::map<LatticePoint, Complex>;

    GnsVector() = default;
    explicit GnsVector(std::size_t n) : n_(n) {}
    GnsVector(std::size_t n, CoeffMap coeffs) : n_(n) {
        for (const auto& [k, c] : coeffs) add(k, c);
    }
    static GnsVector basis(std::size_t n, const LatticePoint& k, Complex c = 1.0) {
        GnsVector v(n);
        v.add(k, c);
        return v;
    }
    /// Image of a under the canonical map into L^2(A, tau).
    static GnsVector from_element(const TorusElement& a) { return {a.dim(), a.coeffs()}; }

    std::size_t dim() const noexcept { return n_; }
    const CoeffMap& coeffs() const noexcept { return coeffs_; }

    void add(const LatticePoint& k, Complex c) {
        if (k.size() != n_) throw DimensionError("GNS index has wrong dimension");
        auto [it, inserted] = coeffs_.try_emplace(k, c);
        if (!inserted) it->second += c;
        if (std::abs(it->second) < kPruneThreshold) coeffs_.erase(it);
    }

    double norm_squared() const {
        double s = 0.0;
        for (const auto& [k, c] : coeffs_) s += std::norm(c);
        return s;
    }

private:
    std::size_t n_ = 0;
    CoeffMap coeffs_;
};

/// (xi, eta) = sum conj(xi_k) eta_k.
inline Complex inner(const GnsVector& xi, const GnsVector& eta) {
    if (xi.dim() != eta.dim()) throw DimensionError("GNS vectors of different dimension");
    Complex s{};
    for (const auto& [k, c] : xi.coeffs()) {
        auto it = eta.coeffs().find(k);
        if (it != eta.coeffs().end()) s += std::conj(c) * it->second;
    }
    return s;
}

/// Left regular action a . xi on L^2(A, tau).
inline GnsVector act_left(const TorusElement& a, const GnsVector& xi) {
    if (xi.dim() != a.dim()) throw DimensionError("GNS vector dimension does not match the algebra");
    return {a.dim(), detail::twisted_convolution(a.theta(), a.coeffs(), xi.coeffs())};
}

/// Result of the operator-norm sandwich.
struct OpNormEstimate {
    double lower = 0.0;    ///< ||a xi_0|| = sqrt(tau(a* a))
    double estimate = 0.0; ///< power iteration on the window-compressed operator
    double upper = 0.0;    ///< l1 bound
    int iterations = 0;
};

/// Estimates the C*-norm of a through its GNS representation compressed to
/// the window: power iteration on T*T with T = P_W L_a P_W.
inline OpNormEstimate opnorm_estimate(const TorusElement& a, const SupportWindow& window, int iters) {
    if (window.n != a.dim()) throw DimensionError("window dimension does not match the algebra");
    if (window.radius < a.support_radius() + 1)
        throw WindowError("window radius " + std::to_string(window.radius) + " must exceed the support radius " +
                          std::to_string(a.support_radius()) + " by at least 1");
    if (iters < 1) throw DomainError("iteration count must be positive");

    OpNormEstimate out;
    out.upper = l1_bound(a);
    out.lower = std::sqrt(std::max(0.0, gns_inner(a, a).real()));
    if (a.empty()) return out;

    const std::size_t dim = window.count();
    std::map<LatticePoint, std::size_t> index;
    {
        std::size_t i = 0;
        for (const auto& p : window_points(window)) index.emplace_hint(index.end(), p, i++);
    }
    using SpMat = Eigen::SparseMatrix<Complex>;
    std::vector<Eigen::Triplet<Complex>> trip;
    trip.reserve(dim * a.size());
    detail::TwistKernel twist(a.theta());
    for (const auto& [r, c] : a.coeffs()) {
        twist.set_left(r);
        for (const auto& [s, col] : index) {
            const LatticePoint p = r + s;
            if (!window.contains(p)) continue;
            trip.emplace_back(static_cast<int>(index.at(p)), static_cast<int>(col), c * twist(s));
        }
    }
    SpMat T(static_cast<int>(dim), static_cast<int>(dim));
    T.setFromTriplets(trip.begin(), trip.end());
    const SpMat Th = T.adjoint();

    Eigen::VectorXcd v(static_cast<int>(dim));
    std::mt19937_64 rng(0x5eedULL);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < v.size(); ++i) v[i] = Complex(u(rng), u(rng));
    v[static_cast<int>(index.at(LatticePoint(a.dim())))] += Complex(static_cast<double>(dim), 0.0);
    v.normalize();

    double sigma = 0.0;
    int it = 0;
    for (; it < iters; ++it) {
        Eigen::VectorXcd w = T * v;
        const double next = w.norm();
        Eigen::VectorXcd z = Th * w;
        const double zn = z.norm();
        if (zn == 0.0) break;
        v = z / zn;
        if (it > 8 && std::abs(next - sigma) <= 1e-15 * next) {
            sigma = next;
            ++it;
            break;
        }
        sigma = next;
    }
    out.estimate = std::max(sigma, out.lower);
    out.iterations = it;
    return out;
}

/// Scalar k' with f_eps(x) = k' x for a rank-one positive x of norm `norm_x`,
/// where f_eps(t) = max(0, t - eps).
inline double f_eps_rank_one(double norm_x, double eps) {
    if (norm_x < 0.0 || eps < 0.0 || std::isnan(norm_x) || std::isnan(eps))
        throw DomainError("f_eps needs nonnegative inputs");
    if (eps == 0.0) throw DomainError("f_eps needs eps > 0");
    if (norm_x == 0.0) return 0.0;
    return std::max(0.0, norm_x - eps) / norm_x;
}

} // namespace nctorus
