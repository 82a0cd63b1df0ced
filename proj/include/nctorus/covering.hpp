#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <variant>
#include <vector>

#include "errors.hpp"
#include "lattice.hpp"
#include "rational.hpp"
#include "torus.hpp"

namespace nctorus {

/// An angle x in units of pi, standing for the unit complex e^{-i pi x}.
/// Exact when built from rational data; reduced mod 2 on demand.
class HalfTurns {
public:
    HalfTurns() = default;
    explicit HalfTurns(Rational r) : v_(r.mod(2)) {}
    explicit HalfTurns(double x) : v_(x) {}

    bool exact() const noexcept { return std::holds_alternative<Rational>(v_); }

    /// Representative in [-1, 1).
    double reduced() const {
        if (const auto* r = std::get_if<Rational>(&v_)) {
            double x = r->to_double();
            return x >= 1.0 ? x - 2.0 : x;
        }
        return reduce_mod2(std::get<double>(v_));
    }

    Complex phase() const { return unit_phase(reduced()); }

    friend HalfTurns operator+(const HalfTurns& a, const HalfTurns& b) {
        if (a.exact() && b.exact()) return HalfTurns(std::get<Rational>(a.v_) + std::get<Rational>(b.v_));
        return HalfTurns(a.reduced() + b.reduced());
    }
    friend HalfTurns operator-(const HalfTurns& a) {
        if (a.exact()) return HalfTurns(-std::get<Rational>(a.v_));
        return HalfTurns(-a.reduced());
    }
    friend HalfTurns operator-(const HalfTurns& a, const HalfTurns& b) { return a + (-b); }

private:
    std::variant<Rational, double> v_{Rational(0)};
};

/// Exponent x with u_1^{p_1} * ... * u_n^{p_n} = e^{-i pi x} U_p, accumulated
/// generator by generator: multiplying U_q by u_j^{+-1} = U_{+-e_j} contributes
/// q.Theta(+-e_j).
inline HalfTurns ordered_exponent(const LatticePoint& p, const SkewMatrix& theta) {
    if (p.size() != theta.dim()) throw DimensionError("ordered_phase: dimension mismatch");
    const std::size_t n = theta.dim();
    LatticePoint q(n);
    if (theta.exact()) {
        std::int64_t t = 0;
        const std::int64_t span = 2 * theta.denominator();
        for (std::size_t j = 0; j < n; ++j) {
            const std::int64_t sign = p[j] >= 0 ? 1 : -1;
            const LatticePoint step = sign * LatticePoint::unit(n, j);
            for (std::int64_t s = 0; s < sign * p[j]; ++s) {
                t = detail::mod_floor(t + detail::mod_floor(theta.form_numerator(q, step), span), span);
                q += step;
            }
        }
        return HalfTurns(Rational(t, theta.denominator()));
    }
    double x = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        const std::int64_t sign = p[j] >= 0 ? 1 : -1;
        const LatticePoint step = sign * LatticePoint::unit(n, j);
        for (std::int64_t s = 0; s < sign * p[j]; ++s) {
            x = reduce_mod2(x + theta.form(q, step));
            q += step;
        }
    }
    return HalfTurns(x);
}

/// The unit phi(p) with u_1^{p_1} * ... * u_n^{p_n} = phi(p) U_p.
inline Complex ordered_phase(const LatticePoint& p, const SkewMatrix& theta) {
    return ordered_exponent(p, theta).phase();
}

/// The ordered monomial u_1^{p_1} * ... * u_n^{p_n} built by repeated star products.
inline TorusElement ordered_monomial(const SkewMatrix& theta, const LatticePoint& p) {
    if (p.size() != theta.dim()) throw DimensionError("ordered_monomial: dimension mismatch");
    TorusElement out = TorusElement::identity(theta);
    for (std::size_t j = 0; j < theta.dim(); ++j) {
        const std::int64_t sign = p[j] >= 0 ? 1 : -1;
        const TorusElement gen = TorusElement::basis(theta, sign * LatticePoint::unit(theta.dim(), j));
        for (std::int64_t s = 0; s < sign * p[j]; ++s) out = star_product(out, gen);
    }
    return out;
}

/// Element (p_1, ..., p_n) of Z_{k_1} x ... x Z_{k_n}.
class CoveringGroupElement {
public:
    CoveringGroupElement() = default;
    CoveringGroupElement(std::vector<std::int64_t> residues, std::vector<std::int64_t> moduli)
        : res_(std::move(residues)), mod_(std::move(moduli)) {
        if (res_.size() != mod_.size()) throw DimensionError("residue/modulus length mismatch");
        for (std::size_t j = 0; j < res_.size(); ++j) {
            if (mod_[j] < 1) throw DomainError("group modulus must be >= 1");
            res_[j] = detail::mod_floor(res_[j], mod_[j]);
        }
    }

    static CoveringGroupElement identity(const std::vector<std::int64_t>& moduli) {
        return {std::vector<std::int64_t>(moduli.size(), 0), moduli};
    }

    std::size_t dim() const noexcept { return res_.size(); }
    const std::vector<std::int64_t>& residues() const noexcept { return res_; }
    const std::vector<std::int64_t>& moduli() const noexcept { return mod_; }

    friend CoveringGroupElement operator+(const CoveringGroupElement& a, const CoveringGroupElement& b) {
        if (a.mod_ != b.mod_) throw DimensionError("group elements of different groups");
        std::vector<std::int64_t> r(a.res_.size());
        for (std::size_t j = 0; j < r.size(); ++j) r[j] = a.res_[j] + b.res_[j];
        return {std::move(r), a.mod_};
    }
    friend bool operator==(const CoveringGroupElement&, const CoveringGroupElement&) = default;

    /// Character value e^{2 pi i sum_j p_j l_j / k_j} as a half-turn angle.
    HalfTurns character_exponent(const LatticePoint& l) const {
        if (l.size() != res_.size()) throw DimensionError("group action: dimension mismatch");
        Rational y(0);
        for (std::size_t j = 0; j < res_.size(); ++j)
            y = y + Rational(detail::mod_floor(detail::checked_mul(res_[j], l[j]), mod_[j]), mod_[j]);
        return HalfTurns(Rational(-2) * y);
    }

private:
    std::vector<std::int64_t> res_;
    std::vector<std::int64_t> mod_;
};

/// All elements of Z_{k_1} x ... x Z_{k_n} in lexicographic order.
inline std::vector<CoveringGroupElement> group_elements(const std::vector<std::int64_t>& moduli) {
    std::vector<CoveringGroupElement> out;
    std::vector<std::int64_t> r(moduli.size(), 0);
    while (true) {
        out.emplace_back(r, moduli);
        std::size_t j = moduli.size();
        while (j-- > 0) {
            if (++r[j] < moduli[j]) break;
            r[j] = 0;
        }
        if (j == static_cast<std::size_t>(-1)) break;
    }
    return out;
}

/// Finite-fold covering C(T_Theta) -> C(T_Theta~) given by u_j -> v_j^{k_j}.
class CoveringMap {
public:
    CoveringMap(SkewMatrix theta_base, SkewMatrix theta_cover, std::vector<std::int64_t> mult)
        : base_(std::move(theta_base)), cover_(std::move(theta_cover)), mult_(std::move(mult)) {
        const std::size_t n = base_.dim();
        if (cover_.dim() != n || mult_.size() != n)
            throw DimensionError("covering map: base, cover and multiplicity dimensions differ");
        for (auto k : mult_)
            if (k < 1) throw ConfigError("covering multiplicities must be >= 1");
        order_ = 1;
        for (auto k : mult_) order_ = detail::checked_mul(order_, k);
        if (!congruent()) throw ConfigError("covering congruence violated: Theta " + base_.str() + " vs Theta~ " +
                                            cover_.str() + " with multiplicities " + mult_str());
    }

    std::size_t dim() const noexcept { return base_.dim(); }
    const SkewMatrix& theta_base() const noexcept { return base_; }
    const SkewMatrix& theta_cover() const noexcept { return cover_; }
    const std::vector<std::int64_t>& mult() const noexcept { return mult_; }
    /// |G| = prod k_j.
    std::int64_t group_order() const noexcept { return order_; }
    std::vector<CoveringGroupElement> group() const { return group_elements(mult_); }

    /// Dp for the diagonal embedding D = diag(k).
    LatticePoint embed(const LatticePoint& p) const { return hadamard(p, mult_); }

    bool on_sublattice(const LatticePoint& l) const {
        for (std::size_t j = 0; j < l.size(); ++j)
            if (detail::mod_floor(l[j], mult_[j]) != 0) return false;
        return true;
    }

    /// Phase carried by U_p -> phi_base(p)^{-1} phi_cover(Dp) V_{Dp}.
    HalfTurns lift_exponent(const LatticePoint& p) const {
        return ordered_exponent(embed(p), cover_) - ordered_exponent(p, base_);
    }

    /// max_{r,s} |e^{-2 pi i theta_rs} - e^{-2 pi i theta~_rs k_r k_s}|.
    double congruence_residual() const {
        double worst = 0.0;
        for (std::size_t r = 0; r < dim(); ++r)
            for (std::size_t s = 0; s < dim(); ++s) {
                const HalfTurns d = difference(r, s);
                worst = std::max(worst, std::abs(d.phase() - Complex(1.0, 0.0)));
            }
        return worst;
    }

    std::string mult_str() const {
        std::string s = "(";
        for (std::size_t j = 0; j < mult_.size(); ++j) s += (j ? "," : "") + std::to_string(mult_[j]);
        return s + ")";
    }

private:
    // 2 (theta_rs - theta~_rs k_r k_s) as half turns; the congruence says it is 0 mod 2.
    HalfTurns difference(std::size_t r, std::size_t s) const {
        const auto& eb = base_.entry(r, s);
        const auto& ec = cover_.entry(r, s);
        const std::int64_t kk = detail::checked_mul(mult_[r], mult_[s]);
        const auto* rb = std::get_if<Rational>(&eb);
        const auto* rc = std::get_if<Rational>(&ec);
        if (rb && rc) return HalfTurns(Rational(2) * (*rb - *rc * Rational(kk)));
        return HalfTurns(2.0 * (entry_value(eb) - entry_value(ec) * static_cast<double>(kk)));
    }

    bool congruent() const {
        for (std::size_t r = 0; r < dim(); ++r)
            for (std::size_t s = 0; s < dim(); ++s) {
                const HalfTurns d = difference(r, s);
                if (d.exact()) {
                    if (d.reduced() != 0.0) return false;
                } else if (std::abs(d.reduced()) > 2e-12) {
                    return false;
                }
            }
        return true;
    }

    SkewMatrix base_, cover_;
    std::vector<std::int64_t> mult_;
    std::int64_t order_ = 1;
};

/// Image of a under the unital *-homomorphism u_j -> v_j^{k_j}.
inline TorusElement lift(const CoveringMap& cov, const TorusElement& a) {
    if (!(a.theta() == cov.theta_base())) throw AlgebraMismatch("lift: element is not over the base algebra");
    TorusElement out(cov.theta_cover());
    for (const auto& [p, c] : a.coeffs()) out.add(cov.embed(p), c * cov.lift_exponent(p).phase());
    return out;
}

/// Covering-group action: coefficient at l times e^{2 pi i sum p_j l_j / k_j}.
inline TorusElement act(const CoveringGroupElement& g, const TorusElement& a) {
    if (g.dim() != a.dim()) throw DimensionError("group element and algebra dimensions differ");
    TorusElement out(a.theta());
    for (const auto& [l, c] : a.coeffs()) out.add(l, c * g.character_exponent(l).phase());
    return out;
}

/// sum_{g in G} g.a, evaluated through the character sums: coefficients on the
/// sublattice D Z^n are multiplied by |G|, all others vanish.
inline TorusElement average(const CoveringMap& cov, const TorusElement& a) {
    if (a.dim() != cov.dim()) throw DimensionError("average: dimension mismatch");
    TorusElement out(a.theta());
    const auto order = static_cast<double>(cov.group_order());
    for (const auto& [l, c] : a.coeffs())
        if (cov.on_sublattice(l)) out.add(l, order * c);
    return out;
}

/// Base-algebra element plus the size of what the group sum left off D Z^n.
struct HilbertInnerResult {
    TorusElement value;
    double off_sublattice = 0.0; ///< max |coefficient| off D Z^n, relative to |G| * max(1, l1(a* b))
};

/// <a, b> = sum_{g in G} g(a* b), pulled back to the base algebra.
inline HilbertInnerResult hilbert_inner_detailed(const CoveringMap& cov, const TorusElement& a, const TorusElement& b) {
    if (!(a.theta() == cov.theta_cover()) || !(b.theta() == cov.theta_cover()))
        throw AlgebraMismatch("hilbert_inner: arguments must lie over the covering algebra");
    const TorusElement x = star_product(involution(a), b);
    TorusElement sum(cov.theta_cover());
    for (const auto& g : cov.group()) sum += act(g, x);

    const double scale = static_cast<double>(cov.group_order()) * std::max(1.0, l1_bound(x));
    HilbertInnerResult out{TorusElement(cov.theta_base()), 0.0};
    for (const auto& [l, c] : sum.coeffs()) {
        if (!cov.on_sublattice(l)) {
            out.off_sublattice = std::max(out.off_sublattice, std::abs(c) / scale);
            continue;
        }
        LatticePoint p(l.size());
        for (std::size_t j = 0; j < l.size(); ++j) p[j] = l[j] / cov.mult()[j];
        out.value.add(p, c * (-cov.lift_exponent(p)).phase());
    }
    if (out.off_sublattice > 1e-12)
        throw InternalError("hilbert_inner: group average left support off the sublattice (relative residual " +
                            std::to_string(out.off_sublattice) + ")");
    return out;
}

inline TorusElement hilbert_inner(const CoveringMap& cov, const TorusElement& a, const TorusElement& b) {
    return hilbert_inner_detailed(cov, a, b).value;
}

/// Components b_r, r in prod Z_{k_j}, with a = sum_r v_1^{r_1} ... v_n^{r_n} lift(b_r).
/// Keys are residue vectors with 0 <= r_j < k_j.
inline std::map<LatticePoint, TorusElement> module_decompose(const CoveringMap& cov, const TorusElement& a) {
    if (!(a.theta() == cov.theta_cover())) throw AlgebraMismatch("module_decompose: element is not over the cover");
    const std::size_t n = cov.dim();
    std::map<LatticePoint, TorusElement> out;
    for (const auto& [l, c] : a.coeffs()) {
        LatticePoint r(n), q(n);
        for (std::size_t j = 0; j < n; ++j) {
            r[j] = detail::mod_floor(l[j], cov.mult()[j]);
            q[j] = (l[j] - r[j]) / cov.mult()[j];
        }
        // v^r lift(U_q) = psi V_l with
        // psi = phi_c(r) phi_b(q)^{-1} phi_c(Dq) e^{-i pi r.Theta~ Dq}
        const LatticePoint dq = cov.embed(q);
        HalfTurns psi = ordered_exponent(r, cov.theta_cover()) + cov.lift_exponent(q);
        if (cov.theta_cover().exact())
            psi = psi + HalfTurns(Rational(cov.theta_cover().form_numerator(r, dq), cov.theta_cover().denominator()));
        else
            psi = psi + HalfTurns(cov.theta_cover().form(r, dq));
        auto it = out.try_emplace(r, TorusElement(cov.theta_base())).first;
        it->second.add(q, c * (-psi).phase());
    }
    std::erase_if(out, [](const auto& kv) { return kv.second.empty(); });
    return out;
}

/// sum_r v^r * lift(b_r), the inverse of module_decompose.
inline TorusElement module_reconstruct(const CoveringMap& cov, const std::map<LatticePoint, TorusElement>& parts) {
    TorusElement out(cov.theta_cover());
    for (const auto& [r, b] : parts) out += star_product(ordered_monomial(cov.theta_cover(), r), lift(cov, b));
    return out;
}

/// (a (x) xi, b (x) eta) = (xi, <a, b> eta) in the induced representation.
inline Complex induced_inner(const TorusElement& a, const GnsVector& xi, const TorusElement& b, const GnsVector& eta,
                             const CoveringMap& cov) {
    if (xi.dim() != cov.dim() || eta.dim() != cov.dim())
        throw AlgebraMismatch("induced_inner: GNS vectors must live over the base algebra");
    const TorusElement ab = hilbert_inner(cov, a, b);
    return inner(xi, act_left(ab, eta));
}

/// Tower C(T_theta) -> C(T_{theta/m_1^2}) -> ... with m_j = p_1 ... p_j, Theta_j = (theta/m_j^2) J.
struct TowerSpec {
    ThetaEntry theta0 = Rational(1);
    std::vector<std::int64_t> factors;
    std::size_t half_dim = 1;

    std::size_t levels() const noexcept { return factors.size(); }

    /// m_j (m_0 = 1).
    std::int64_t m(std::size_t j) const {
        if (j > factors.size()) throw ConfigError("tower level out of range");
        std::int64_t v = 1;
        for (std::size_t i = 0; i < j; ++i) v = detail::checked_mul(v, factors[i]);
        return v;
    }

    SkewMatrix level_theta(std::size_t j) const {
        const std::int64_t mj = m(j);
        return SkewMatrix::symplectic(half_dim, theta0).divided_by(detail::checked_mul(mj, mj));
    }

    /// |G(level `to` | level `from`)| = (m_to / m_from)^{2N}.
    std::int64_t group_order(std::size_t from, std::size_t to) const {
        if (from > to) throw ConfigError("group order needs from <= to");
        const std::int64_t ratio = m(to) / m(from);
        std::int64_t o = 1;
        for (std::size_t i = 0; i < 2 * half_dim; ++i) o = detail::checked_mul(o, ratio);
        return o;
    }

    void validate() const {
        if (half_dim < 1 || 2 * half_dim > kMaxDim) throw ConfigError("tower half-dimension N out of range");
        for (auto p : factors)
            if (p < 2) throw ConfigError("tower factors must be >= 2, got " + std::to_string(p));
    }
};

/// Covering map from level `from` to level `to` (multiplicity m_to / m_from on every generator).
inline CoveringMap tower_map(const TowerSpec& spec, std::size_t from, std::size_t to) {
    spec.validate();
    if (from > to || to > spec.levels()) throw ConfigError("tower_map: invalid level range");
    const std::int64_t k = spec.m(to) / spec.m(from);
    return {spec.level_theta(from), spec.level_theta(to), std::vector<std::int64_t>(2 * spec.half_dim, k)};
}

/// The consecutive maps level j-1 -> level j, j = 1..J.
inline std::vector<CoveringMap> build_tower(const TowerSpec& spec) {
    spec.validate();
    std::vector<CoveringMap> out;
    out.reserve(spec.levels());
    for (std::size_t j = 1; j <= spec.levels(); ++j) out.push_back(tower_map(spec, j - 1, j));
    return out;
}

} // namespace nctorus
