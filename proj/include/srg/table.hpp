#pragma once

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "srg/error.hpp"

namespace srg {

using VarId = std::int32_t;
using FactorId = std::int32_t;
using Index = std::int64_t;

/// Log-domain floor used throughout inference (= log 1e-300, keeps -inf out of
/// the arithmetic).
inline constexpr double kLogFloor = -690.0;
inline constexpr double kValueFloor = 1e-300;

/// Dense table over an ordered variable scope, backed by an Eigen array.
/// The scope must be strictly increasing in variable id; values are stored
/// row-major over the scope (the last scope variable varies fastest).
template <typename Scalar>
class TableT {
public:
    using Array = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

    TableT() = default;

    TableT(std::vector<VarId> scope, std::vector<int> cards, Scalar fill = Scalar(0))
        : scope_(std::move(scope)), cards_(std::move(cards)) {
        if (scope_.size() != cards_.size())
            fail("ShapeMismatch", "scope and cardinality lists differ in length");
        if (!std::is_sorted(scope_.begin(), scope_.end()) ||
            std::adjacent_find(scope_.begin(), scope_.end()) != scope_.end())
            fail("ShapeMismatch", "table scope must be strictly increasing");
        Index n = 1;
        for (int c : cards_) {
            if (c < 1) fail("ShapeMismatch", "cardinality must be >= 1");
            n *= c;
        }
        values_ = Array::Constant(n, fill);
    }

    const std::vector<VarId>& scope() const { return scope_; }
    const std::vector<int>& cards() const { return cards_; }
    Index size() const { return values_.size(); }
    bool empty() const { return values_.size() == 0; }

    Array& values() { return values_; }
    const Array& values() const { return values_; }

    Scalar& operator[](Index i) { return values_[i]; }
    Scalar operator[](Index i) const { return values_[i]; }

    bool contains(VarId v) const {
        return std::binary_search(scope_.begin(), scope_.end(), v);
    }

    int card_of(VarId v) const {
        auto it = std::lower_bound(scope_.begin(), scope_.end(), v);
        if (it == scope_.end() || *it != v) fail("ShapeMismatch", "variable not in scope");
        return cards_[static_cast<std::size_t>(it - scope_.begin())];
    }

    /// Linear index of a joint state (states aligned with the scope order).
    Index index_of(std::span<const int> states) const {
        Index idx = 0;
        for (std::size_t p = 0; p < scope_.size(); ++p) idx = idx * cards_[p] + states[p];
        return idx;
    }

    /// Decode a linear index into per-scope states.
    void state_of(Index idx, std::span<int> out) const {
        for (std::size_t p = scope_.size(); p-- > 0;) {
            out[p] = static_cast<int>(idx % cards_[p]);
            idx /= cards_[p];
        }
    }

private:
    std::vector<VarId> scope_;
    std::vector<int> cards_;
    Array values_;
};

using Table = TableT<double>;

/// For each linear index of the outer table, the linear index of the sub-scope
/// table it projects to. inner_scope must be a subset of outer_scope.
inline std::vector<Index> projection_indices(const std::vector<VarId>& outer_scope,
                                             const std::vector<int>& outer_cards,
                                             const std::vector<VarId>& inner_scope) {
    const std::size_t k = outer_scope.size();
    // strides of the inner table, laid over the outer scope positions
    std::vector<Index> inner_cards;
    inner_cards.reserve(inner_scope.size());
    for (VarId v : inner_scope) {
        auto it = std::lower_bound(outer_scope.begin(), outer_scope.end(), v);
        if (it == outer_scope.end() || *it != v)
            fail("ShapeMismatch", "projection scope is not a subset");
        inner_cards.push_back(outer_cards[static_cast<std::size_t>(it - outer_scope.begin())]);
    }
    std::vector<Index> stride(k, 0);
    Index s = 1;
    for (std::size_t q = inner_scope.size(); q-- > 0;) {
        auto it = std::lower_bound(outer_scope.begin(), outer_scope.end(), inner_scope[q]);
        stride[static_cast<std::size_t>(it - outer_scope.begin())] = s;
        s *= inner_cards[q];
    }
    Index total = 1;
    for (int c : outer_cards) total *= c;

    std::vector<Index> out(static_cast<std::size_t>(total));
    std::vector<int> digit(k, 0);
    Index cur = 0;
    for (Index i = 0; i < total; ++i) {
        out[static_cast<std::size_t>(i)] = cur;
        for (std::size_t p = k; p-- > 0;) {
            ++digit[p];
            cur += stride[p];
            if (digit[p] < outer_cards[p]) break;
            cur -= static_cast<Index>(digit[p]) * stride[p];
            digit[p] = 0;
        }
    }
    return out;
}

/// target(x) += term(x restricted to term scope); log-domain multiply.
template <typename Scalar>
void add_projected(TableT<Scalar>& target, const TableT<Scalar>& term) {
    auto proj = projection_indices(target.scope(), target.cards(), term.scope());
    for (Index i = 0; i < target.size(); ++i)
        target[i] += term[proj[static_cast<std::size_t>(i)]];
}

template <typename Scalar>
void subtract_projected(TableT<Scalar>& target, const TableT<Scalar>& term) {
    auto proj = projection_indices(target.scope(), target.cards(), term.scope());
    for (Index i = 0; i < target.size(); ++i)
        target[i] -= term[proj[static_cast<std::size_t>(i)]];
}

namespace detail {
template <typename Scalar>
std::vector<int> sub_cards(const TableT<Scalar>& t, const std::vector<VarId>& onto) {
    std::vector<int> cards;
    cards.reserve(onto.size());
    for (VarId v : onto) cards.push_back(t.card_of(v));
    return cards;
}
} // namespace detail

/// Linear-domain marginalization: sums out every variable not in `onto`.
template <typename Scalar>
TableT<Scalar> marginalize(const TableT<Scalar>& t, const std::vector<VarId>& onto) {
    TableT<Scalar> out(onto, detail::sub_cards(t, onto), Scalar(0));
    auto proj = projection_indices(t.scope(), t.cards(), onto);
    for (Index i = 0; i < t.size(); ++i) out[proj[static_cast<std::size_t>(i)]] += t[i];
    return out;
}

/// Log-domain marginalization via per-bin logsumexp.
template <typename Scalar>
TableT<Scalar> logsumexp_marginalize(const TableT<Scalar>& t, const std::vector<VarId>& onto) {
    constexpr Scalar neg_inf = -std::numeric_limits<Scalar>::infinity();
    TableT<Scalar> mx(onto, detail::sub_cards(t, onto), neg_inf);
    auto proj = projection_indices(t.scope(), t.cards(), onto);
    for (Index i = 0; i < t.size(); ++i) {
        Index j = proj[static_cast<std::size_t>(i)];
        if (t[i] > mx[j]) mx[j] = t[i];
    }
    TableT<Scalar> acc(onto, mx.cards(), Scalar(0));
    for (Index i = 0; i < t.size(); ++i) {
        Index j = proj[static_cast<std::size_t>(i)];
        if (mx[j] > neg_inf) acc[j] += std::exp(t[i] - mx[j]);
    }
    TableT<Scalar> out(onto, mx.cards(), Scalar(0));
    for (Index j = 0; j < out.size(); ++j)
        out[j] = (mx[j] > neg_inf) ? mx[j] + std::log(acc[j]) : neg_inf;
    return out;
}

template <typename Scalar>
Scalar logsumexp(const TableT<Scalar>& t) {
    Scalar m = t.values().maxCoeff();
    if (!(m > -std::numeric_limits<Scalar>::infinity())) return m;
    return m + std::log((t.values() - m).exp().sum());
}

/// Normalizes a linear-domain table to sum 1; errors when the mass is zero.
template <typename Scalar>
void normalize_in_place(TableT<Scalar>& t) {
    Scalar s = t.values().sum();
    if (!(s > Scalar(0))) fail("ZeroPartition", "table mass is not positive");
    t.values() /= s;
}

/// exp(logt - logsumexp(logt)): normalized linear-domain table.
template <typename Scalar>
TableT<Scalar> exp_normalized(const TableT<Scalar>& logt) {
    TableT<Scalar> out(logt.scope(), logt.cards());
    Scalar z = logsumexp(logt);
    out.values() = (logt.values() - z).exp();
    return out;
}

/// Elementwise log with the inference floor applied.
template <typename Scalar>
TableT<Scalar> log_floored(const TableT<Scalar>& t) {
    TableT<Scalar> out(t.scope(), t.cards());
    for (Index i = 0; i < t.size(); ++i)
        out[i] = std::log(std::max(t[i], Scalar(kValueFloor)));
    return out;
}

/// Sum of p*log(p) with 0*log(0) = 0; expects a normalized table.
template <typename Scalar>
Scalar plogp_sum(const TableT<Scalar>& t) {
    Scalar s = 0;
    for (Index i = 0; i < t.size(); ++i)
        if (t[i] > Scalar(0)) s += t[i] * std::log(t[i]);
    return s;
}

} // namespace srg
