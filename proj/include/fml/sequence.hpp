#ifndef FML_SEQUENCE_HPP
#define FML_SEQUENCE_HPP

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace fml {

enum class SeqKind {
    Constant,       // alpha_n = c
    PowerDecay,     // alpha_n = c * n^{-s}
    Geometric,      // alpha_n = c^n
    ReciprocalOdd,  // alpha_n = 1 / a_n, a_n odd
    ExpSqrt,        // alpha_n = exp(-s * sqrt(n))
    ExplicitList,
};

enum class OddRule { Constant, TwoNPlusOne, List };

struct SequenceSpec {
    SeqKind kind = SeqKind::Constant;
    double c = 0.5;                // Constant / Geometric value, PowerDecay scale
    double s = 1.0;                // PowerDecay / ExpSqrt exponent
    OddRule odd_rule = OddRule::TwoNPlusOne;
    long odd_base = 3;             // OddRule::Constant
    std::vector<long> odd_list;    // OddRule::List
    std::vector<double> values;    // ExplicitList
    std::optional<std::uint64_t> length_limit;

    static SequenceSpec constant(double c);
    static SequenceSpec power_decay(double s, double scale = 1.0);
    static SequenceSpec geometric(double c);
    static SequenceSpec reciprocal_odd_rule();             // a_n = 2n + 1
    static SequenceSpec reciprocal_odd_constant(long a);
    static SequenceSpec reciprocal_odd_list(std::vector<long> a);
    static SequenceSpec explicit_list(std::vector<double> v);
    static SequenceSpec exp_sqrt(double s);
};

// Deterministic generator for a defining sequence (alpha_n), indices n >= 1.
// Generation enforces alpha_n in (0, 1), except that an analytic family may
// open with finitely many alpha_n == 1 terms (e.g. n^{-s} at n = 1); those are
// tolerated for sequence analysis and reported through first_valid_index().
// Cube builders require first_valid_index() == 1.
class AlphaSequence {
  public:
    explicit AlphaSequence(SequenceSpec spec);

    double value(std::uint64_t n) const;  // n >= 1
    const SequenceSpec& spec() const { return spec_; }
    SeqKind kind() const { return spec_.kind; }

    // Smallest N with alpha_n strictly inside (0,1) for all n >= N.
    std::uint64_t first_valid_index() const { return first_valid_; }

    // Odd subdivision base a_n for reciprocal-odd families.
    long odd_base(std::uint64_t n) const;

    bool has_length_limit() const { return spec_.length_limit.has_value(); }
    std::uint64_t length_limit() const;

  private:
    SequenceSpec spec_;
    std::uint64_t first_valid_ = 1;

    double raw(std::uint64_t n) const;
};

AlphaSequence make_sequence(const SequenceSpec& spec);

// Truncated sum of alpha_n^p for n = 1..N, accumulated smallest-magnitude
// first for stability.
double partial_lp_sum(const AlphaSequence& seq, double p, std::uint64_t N);

enum class Membership { Ell0, EllInfinityNotEll0, Neither, UnknownHeuristic };

struct TruncatedSum {
    double p;
    std::uint64_t N;
    double sum;
};

struct ClassReport {
    SequenceSpec family;
    Membership membership = Membership::UnknownHeuristic;
    std::optional<double> witness_p;  // p with sum alpha_n^p < infinity
    std::vector<TruncatedSum> truncated_sums;
    std::string prediction;  // per the fat/thin dichotomy: "fat", "thin",
                             // "positive-for-some-doubling-measure", "unknown"
};

// Membership is decided analytically per family; truncated sums are advisory
// evidence only. Explicit lists always classify unknown-heuristic.
ClassReport classify_family(const SequenceSpec& spec);

const char* to_string(Membership m);
const char* to_string(SeqKind k);

}  // namespace fml

#endif
