#include "dynarisk/rational.hpp"

#include <cmath>
#include <ostream>

namespace dynarisk {

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::NonTreeShape: return "NonTreeShape";
        case ErrorCode::ProbNotNormalized: return "ProbNotNormalized";
        case ErrorCode::ZeroProbabilityNode: return "ZeroProbabilityNode";
        case ErrorCode::HorizonMismatch: return "HorizonMismatch";
        case ErrorCode::TreeMismatch: return "TreeMismatch";
        case ErrorCode::AnchorMismatch: return "AnchorMismatch";
        case ErrorCode::WindowOrderViolation: return "WindowOrderViolation";
        case ErrorCode::WindowViolation: return "WindowViolation";
        case ErrorCode::NotAntichain: return "NotAntichain";
        case ErrorCode::NotAntichainSubset: return "NotAntichainSubset";
        case ErrorCode::NotADensity: return "NotADensity";
        case ErrorCode::NonPositiveDensity: return "NonPositiveDensity";
        case ErrorCode::BadWeights: return "BadWeights";
        case ErrorCode::EmptyScenarioSet: return "EmptyScenarioSet";
        case ErrorCode::NormalizationViolation: return "NormalizationViolation";
        case ErrorCode::EnumerationCapExceeded: return "EnumerationCapExceeded";
        case ErrorCode::SubsetEnumerationCapExceeded: return "SubsetEnumerationCapExceeded";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::LPFailure: return "LPFailure";
        case ErrorCode::NotAccepted: return "NotAccepted";
        case ErrorCode::InputNotConsistent: return "InputNotConsistent";
        case ErrorCode::FixtureParseError: return "FixtureParseError";
        case ErrorCode::UsageError: return "UsageError";
    }
    return "UnknownError";
}

Rational parse_rational(const std::string& text) {
    std::string s = text;
    if (s.empty()) fail(ErrorCode::FixtureParseError, "empty rational literal");
    auto dot = s.find('.');
    if (dot != std::string::npos) {
        std::string digits = s.substr(0, dot) + s.substr(dot + 1);
        size_t frac_len = s.size() - dot - 1;
        try {
            mpz_class num(digits);
            mpz_class den(1);
            for (size_t i = 0; i < frac_len; ++i) den *= 10;
            Rational r(num, den);
            r.canonicalize();
            return r;
        } catch (const std::invalid_argument&) {
            fail(ErrorCode::FixtureParseError, "bad rational literal '" + text + "'");
        }
    }
    try {
        Rational r(s);
        if (r.get_den() == 0) fail(ErrorCode::FixtureParseError, "zero denominator in '" + text + "'");
        r.canonicalize();
        return r;
    } catch (const std::invalid_argument&) {
        fail(ErrorCode::FixtureParseError, "bad rational literal '" + text + "'");
    }
}

std::string rational_str(const Rational& r) {
    return r.get_str();
}

double to_double(const Rational& r) {
    return r.get_d();
}

Rational rational_from_double(double x) {
    if (!std::isfinite(x)) fail(ErrorCode::DimensionMismatch, "non-finite double");
    Rational r;
    mpq_set_d(r.get_mpq_t(), x);
    return r;
}

const Rational& ExtReal::value() const {
    if (m_kind != Kind::Finite) throw std::logic_error("ExtReal: value() on infinite");
    return m_value;
}

ExtReal ExtReal::operator+(const ExtReal& o) const {
    if (is_finite() && o.is_finite()) return ExtReal(m_value + o.m_value);
    if (is_neg_inf() && o.is_pos_inf()) throw std::logic_error("ExtReal: -inf + inf");
    if (is_pos_inf() && o.is_neg_inf()) throw std::logic_error("ExtReal: inf + -inf");
    if (is_neg_inf() || o.is_neg_inf()) return neg_inf();
    return pos_inf();
}

ExtReal ExtReal::operator-() const {
    switch (m_kind) {
        case Kind::NegInf: return pos_inf();
        case Kind::PosInf: return neg_inf();
        default: return ExtReal(Rational(-m_value));
    }
}

ExtReal ExtReal::scaled(const Rational& c) const {
    if (c < 0) throw std::logic_error("ExtReal: negative scale");
    if (c == 0) return ExtReal(Rational(0));
    if (is_finite()) return ExtReal(Rational(m_value * c));
    return *this;
}

bool ExtReal::operator==(const ExtReal& o) const {
    if (m_kind != o.m_kind) return false;
    if (m_kind != Kind::Finite) return true;
    return m_value == o.m_value;
}

bool ExtReal::operator<(const ExtReal& o) const {
    if (m_kind == o.m_kind) {
        if (m_kind != Kind::Finite) return false;
        return m_value < o.m_value;
    }
    if (is_neg_inf()) return true;
    if (is_pos_inf()) return false;
    return o.is_pos_inf();
}

bool ExtReal::approx_equal(const ExtReal& o, const Rational& tol) const {
    if (!is_finite() || !o.is_finite()) return m_kind == o.m_kind;
    Rational d = m_value - o.m_value;
    if (d < 0) d = -d;
    return d <= tol;
}

std::string ExtReal::str() const {
    switch (m_kind) {
        case Kind::NegInf: return "-inf";
        case Kind::PosInf: return "inf";
        default: return rational_str(m_value);
    }
}

double ExtReal::as_double() const {
    switch (m_kind) {
        case Kind::NegInf: return -std::numeric_limits<double>::infinity();
        case Kind::PosInf: return std::numeric_limits<double>::infinity();
        default: return to_double(m_value);
    }
}

ExtReal min(const ExtReal& a, const ExtReal& b) { return a < b ? a : b; }
ExtReal max(const ExtReal& a, const ExtReal& b) { return a < b ? b : a; }

std::ostream& operator<<(std::ostream& os, const ExtReal& v) {
    return os << v.str();
}

unsigned long long Rng::next() {
    // splitmix64: small, seed-stable, identical everywhere.
    m_state += 0x9e3779b97f4a7c15ULL;
    unsigned long long z = m_state;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

long Rng::uniform(long lo, long hi) {
    unsigned long long span = static_cast<unsigned long long>(hi - lo) + 1;
    return lo + static_cast<long>(next() % span);
}

Rational Rng::small_rational() {
    long num = uniform(-8, 8);
    static const long dens[3] = {1, 2, 4};
    long den = dens[uniform(0, 2)];
    Rational r(num, den);
    r.canonicalize();
    return r;
}

Rational Rng::positive_rational() {
    long num = uniform(1, 8);
    static const long dens[3] = {1, 2, 4};
    long den = dens[uniform(0, 2)];
    Rational r(num, den);
    r.canonicalize();
    return r;
}

} // namespace dynarisk
