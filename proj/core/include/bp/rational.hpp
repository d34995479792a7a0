#pragma once

#include <gmpxx.h>

#include <optional>
#include <string>
#include <string_view>

namespace bp {

/// Arbitrary-precision rational. Every probability, weight and fluent value
/// in the toolkit is one of these; no binary floating point reaches a
/// semantic computation.
using Rational = mpq_class;

/// Parses "3", "-3", "1/20", "0.05", "-1.25". Decimal literals are read as
/// exact base-10 fractions. Returns nullopt on malformed input or a zero
/// denominator.
std::optional<Rational> parse_rational(std::string_view text);

/// Reduced "p/q" form, or "p" when the denominator is 1.
std::string to_string(const Rational& r);

/// Lossy conversion, only for reports and Monte Carlo summaries.
double to_double(const Rational& r);

inline Rational make_rational(long num, long den = 1) {
    Rational r(num, den);
    r.canonicalize();
    return r;
}

}  // namespace bp
