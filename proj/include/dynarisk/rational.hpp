#pragma once

#include <gmpxx.h>

#include <iosfwd>
#include <string>

#include "dynarisk/errors.hpp"

namespace dynarisk {

using Rational = mpq_class;

// Parses "p/q", "p", or a decimal like "-1.25". Canonicalized, q > 0.
Rational parse_rational(const std::string& text);

// Canonical form: "p" when q == 1, else "p/q" with q > 0 and gcd(p,q) == 1.
std::string rational_str(const Rational& r);

double to_double(const Rational& r);

// Exact: every finite double is a dyadic rational.
Rational rational_from_double(double x);

// Extended real line over Rational. NegInf and PosInf absorb addition;
// adding NegInf to PosInf is a logic error and throws.
class ExtReal {
public:
    enum class Kind { NegInf, Finite, PosInf };

    ExtReal() : m_kind(Kind::Finite), m_value(0) {}
    ExtReal(const Rational& v) : m_kind(Kind::Finite), m_value(v) {}
    ExtReal(long v) : m_kind(Kind::Finite), m_value(v) {}
    ExtReal(int v) : m_kind(Kind::Finite), m_value(v) {}

    static ExtReal neg_inf() { return ExtReal(Kind::NegInf); }
    static ExtReal pos_inf() { return ExtReal(Kind::PosInf); }

    Kind kind() const { return m_kind; }
    bool is_finite() const { return m_kind == Kind::Finite; }
    bool is_neg_inf() const { return m_kind == Kind::NegInf; }
    bool is_pos_inf() const { return m_kind == Kind::PosInf; }

    // Only valid when finite.
    const Rational& value() const;

    ExtReal operator+(const ExtReal& o) const;
    ExtReal operator-() const;
    ExtReal operator-(const ExtReal& o) const { return *this + (-o); }

    // Scaling by a nonnegative rational; 0 * anything == 0.
    ExtReal scaled(const Rational& c) const;

    bool operator==(const ExtReal& o) const;
    bool operator!=(const ExtReal& o) const { return !(*this == o); }
    bool operator<(const ExtReal& o) const;
    bool operator<=(const ExtReal& o) const { return *this < o || *this == o; }
    bool operator>(const ExtReal& o) const { return o < *this; }
    bool operator>=(const ExtReal& o) const { return o <= *this; }

    // |a - b| <= tol with infinities equal only to themselves.
    bool approx_equal(const ExtReal& o, const Rational& tol) const;

    std::string str() const;
    double as_double() const;

private:
    explicit ExtReal(Kind k) : m_kind(k), m_value(0) {}

    Kind m_kind;
    Rational m_value;
};

ExtReal min(const ExtReal& a, const ExtReal& b);
ExtReal max(const ExtReal& a, const ExtReal& b);

std::ostream& operator<<(std::ostream& os, const ExtReal& v);

// Deterministic RNG helpers. Raw engine output is reduced by modulo so the
// draw sequence does not depend on the platform's distribution internals.
class Rng {
public:
    explicit Rng(unsigned long long seed) : m_state(seed ? seed : 0x9e3779b97f4a7c15ULL) {}

    unsigned long long next();
    // Uniform in [lo, hi], inclusive.
    long uniform(long lo, long hi);
    // Numerator in [-8, 8], denominator in {1, 2, 4}.
    Rational small_rational();
    // Strictly positive small rational (numerator in [1, 8]).
    Rational positive_rational();
    bool coin() { return uniform(0, 1) == 1; }

private:
    unsigned long long m_state;
};

} // namespace dynarisk
