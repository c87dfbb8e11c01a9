#include "fml/sequence.hpp"

#include <algorithm>
#include <cmath>

namespace fml {

SequenceSpec SequenceSpec::constant(double c) {
    SequenceSpec s;
    s.kind = SeqKind::Constant;
    s.c = c;
    return s;
}
SequenceSpec SequenceSpec::power_decay(double s_, double scale) {
    SequenceSpec s;
    s.kind = SeqKind::PowerDecay;
    s.s = s_;
    s.c = scale;
    return s;
}
SequenceSpec SequenceSpec::geometric(double c) {
    SequenceSpec s;
    s.kind = SeqKind::Geometric;
    s.c = c;
    return s;
}
SequenceSpec SequenceSpec::reciprocal_odd_rule() {
    SequenceSpec s;
    s.kind = SeqKind::ReciprocalOdd;
    s.odd_rule = OddRule::TwoNPlusOne;
    return s;
}
SequenceSpec SequenceSpec::reciprocal_odd_constant(long a) {
    SequenceSpec s;
    s.kind = SeqKind::ReciprocalOdd;
    s.odd_rule = OddRule::Constant;
    s.odd_base = a;
    return s;
}
SequenceSpec SequenceSpec::reciprocal_odd_list(std::vector<long> a) {
    SequenceSpec s;
    s.kind = SeqKind::ReciprocalOdd;
    s.odd_rule = OddRule::List;
    s.odd_list = std::move(a);
    s.length_limit = s.odd_list.size();
    return s;
}
SequenceSpec SequenceSpec::explicit_list(std::vector<double> v) {
    SequenceSpec s;
    s.kind = SeqKind::ExplicitList;
    s.values = std::move(v);
    s.length_limit = s.values.size();
    return s;
}
SequenceSpec SequenceSpec::exp_sqrt(double s_) {
    SequenceSpec s;
    s.kind = SeqKind::ExpSqrt;
    s.s = s_;
    return s;
}

AlphaSequence::AlphaSequence(SequenceSpec spec) : spec_(std::move(spec)) {
    switch (spec_.kind) {
        case SeqKind::Constant:
            if (!(spec_.c > 0.0 && spec_.c < 1.0))
                throw std::invalid_argument("constant sequence: parameter-out-of-range, need 0 < c < 1");
            break;
        case SeqKind::Geometric:
            if (!(spec_.c > 0.0 && spec_.c < 1.0))
                throw std::invalid_argument("geometric sequence: parameter-out-of-range, need 0 < c < 1");
            break;
        case SeqKind::PowerDecay: {
            if (!(spec_.s > 0.0) || !(spec_.c > 0.0) || spec_.c > 1.0)
                throw std::invalid_argument("power-decay sequence: parameter-out-of-range");
            // c * n^{-s} == 1 can only happen at n = 1 (c == 1); later terms
            // are strictly decreasing toward 0.
            first_valid_ = (spec_.c == 1.0) ? 2 : 1;
            break;
        }
        case SeqKind::ExpSqrt:
            if (!(spec_.s > 0.0))
                throw std::invalid_argument("exp-sqrt sequence: parameter-out-of-range, need s > 0");
            break;
        case SeqKind::ReciprocalOdd: {
            if (spec_.odd_rule == OddRule::Constant &&
                (spec_.odd_base < 3 || spec_.odd_base % 2 == 0))
                throw std::invalid_argument("reciprocal-odd sequence: base must be odd and >= 3");
            if (spec_.odd_rule == OddRule::List) {
                if (spec_.odd_list.empty())
                    throw std::invalid_argument("reciprocal-odd sequence: empty base list");
                for (long a : spec_.odd_list)
                    if (a < 3 || a % 2 == 0)
                        throw std::invalid_argument("reciprocal-odd sequence: base must be odd and >= 3");
            }
            break;
        }
        case SeqKind::ExplicitList: {
            if (spec_.values.empty())
                throw std::invalid_argument("explicit-list sequence: empty");
            for (double v : spec_.values)
                if (!(v > 0.0 && v < 1.0))
                    throw std::invalid_argument("explicit-list sequence: parameter-out-of-range, need values in (0,1)");
            break;
        }
    }
}

double AlphaSequence::raw(std::uint64_t n) const {
    switch (spec_.kind) {
        case SeqKind::Constant: return spec_.c;
        case SeqKind::PowerDecay: return spec_.c * std::pow(static_cast<double>(n), -spec_.s);
        case SeqKind::Geometric: return std::pow(spec_.c, static_cast<double>(n));
        case SeqKind::ExpSqrt: return std::exp(-spec_.s * std::sqrt(static_cast<double>(n)));
        case SeqKind::ReciprocalOdd: return 1.0 / static_cast<double>(odd_base(n));
        case SeqKind::ExplicitList: return spec_.values.at(n - 1);
    }
    return 0.0;
}

double AlphaSequence::value(std::uint64_t n) const {
    if (n == 0) throw std::out_of_range("alpha sequence indices start at 1");
    if (spec_.length_limit && n > *spec_.length_limit)
        throw std::out_of_range("alpha sequence index beyond length limit");
    const double v = raw(n);
    // decaying analytic families underflow for huge n; their true values are
    // positive, so let the term round to 0 instead of failing the sum
    const bool may_underflow = spec_.kind == SeqKind::Geometric ||
                               spec_.kind == SeqKind::ExpSqrt ||
                               spec_.kind == SeqKind::PowerDecay;
    if (v == 0.0 && may_underflow) return 0.0;
    if (!(v > 0.0) || v > 1.0 || (v == 1.0 && n >= first_valid_))
        throw std::domain_error("alpha sequence: parameter-out-of-range, value left (0,1)");
    return v;
}

long AlphaSequence::odd_base(std::uint64_t n) const {
    if (spec_.kind != SeqKind::ReciprocalOdd)
        throw std::logic_error("odd_base only defined for reciprocal-odd sequences");
    switch (spec_.odd_rule) {
        case OddRule::Constant: return spec_.odd_base;
        case OddRule::TwoNPlusOne: return static_cast<long>(2 * n + 1);
        case OddRule::List: return spec_.odd_list.at(n - 1);
    }
    return 3;
}

std::uint64_t AlphaSequence::length_limit() const {
    if (!spec_.length_limit) throw std::logic_error("sequence has no length limit");
    return *spec_.length_limit;
}

AlphaSequence make_sequence(const SequenceSpec& spec) { return AlphaSequence(spec); }

double partial_lp_sum(const AlphaSequence& seq, double p, std::uint64_t N) {
    if (!(p > 0.0)) throw std::invalid_argument("partial_lp_sum: p must be positive");
    if (N < 1) throw std::invalid_argument("partial_lp_sum: N must be >= 1");
    std::vector<double> terms;
    terms.reserve(N);
    for (std::uint64_t n = 1; n <= N; ++n) terms.push_back(std::pow(seq.value(n), p));
    std::sort(terms.begin(), terms.end());
    double s = 0.0;
    for (double t : terms) s += t;
    return s;
}

const char* to_string(Membership m) {
    switch (m) {
        case Membership::Ell0: return "ell0";
        case Membership::EllInfinityNotEll0: return "ellInfinity-not-ell0";
        case Membership::Neither: return "neither";
        case Membership::UnknownHeuristic: return "unknown-heuristic";
    }
    return "?";
}

const char* to_string(SeqKind k) {
    switch (k) {
        case SeqKind::Constant: return "constant";
        case SeqKind::PowerDecay: return "power-decay";
        case SeqKind::Geometric: return "geometric";
        case SeqKind::ReciprocalOdd: return "reciprocal-odd";
        case SeqKind::ExpSqrt: return "exp-sqrt";
        case SeqKind::ExplicitList: return "explicit-list";
    }
    return "?";
}

ClassReport classify_family(const SequenceSpec& spec) {
    AlphaSequence seq(spec);
    ClassReport r;
    r.family = spec;

    switch (spec.kind) {
        case SeqKind::Geometric:
        case SeqKind::ExpSqrt:
            // sum c^{np} (resp. exp(-p s sqrt(n))) converges for every p > 0.
            r.membership = Membership::Ell0;
            r.witness_p = 1.0;
            r.prediction = "fat";
            break;
        case SeqKind::PowerDecay:
            // sum n^{-sp} converges iff sp > 1; no single family member lies
            // in every ell^p.
            r.membership = Membership::EllInfinityNotEll0;
            r.witness_p = 2.0 / spec.s;
            r.prediction = "positive-for-some-doubling-measure";
            break;
        case SeqKind::Constant:
            r.membership = Membership::Neither;
            r.prediction = "thin";
            break;
        case SeqKind::ReciprocalOdd:
            switch (spec.odd_rule) {
                case OddRule::Constant:
                    r.membership = Membership::Neither;
                    r.prediction = "thin";
                    break;
                case OddRule::TwoNPlusOne:
                    // 1/(2n+1) ~ n^{-1}: p-series with p = 2.
                    r.membership = Membership::EllInfinityNotEll0;
                    r.witness_p = 2.0;
                    r.prediction = "positive-for-some-doubling-measure";
                    break;
                case OddRule::List:
                    r.membership = Membership::UnknownHeuristic;
                    r.prediction = "unknown";
                    break;
            }
            break;
        case SeqKind::ExplicitList:
            r.membership = Membership::UnknownHeuristic;
            r.prediction = "unknown";
            break;
    }

    std::uint64_t cap = 512;
    if (spec.length_limit) cap = std::min(cap, *spec.length_limit);
    for (double p : {0.5, 1.0, 2.0})
        for (std::uint64_t N : {cap / 8, cap / 4, cap / 2, cap})
            if (N >= 1) r.truncated_sums.push_back({p, N, partial_lp_sum(seq, p, N)});
    return r;
}

}  // namespace fml
