#include "shapestab/rational.hpp"

#include <cctype>
#include <cmath>
#include <limits>
#include <ostream>
#include <stdexcept>

namespace shapestab {

Rational::Rational(long long num, long long den) {
  if (den == 0) throw std::domain_error("rational with zero denominator");
  value_ = mpq_class(mpz_class(static_cast<long>(num)), mpz_class(static_cast<long>(den)));
  value_.canonicalize();
}

Rational Rational::from_double(double value) {
  if (!std::isfinite(value)) throw std::domain_error("non-finite double has no rational value");
  return Rational(mpq_class(value));
}

namespace {

bool parse_integer(std::string_view text, mpz_class& out, bool allow_sign) {
  if (text.empty()) return false;
  std::size_t start = 0;
  if (allow_sign && (text[0] == '-' || text[0] == '+')) start = 1;
  if (start == text.size()) return false;
  for (std::size_t i = start; i < text.size(); ++i) {
    if (!std::isdigit(static_cast<unsigned char>(text[i]))) return false;
  }
  std::string digits(text.substr(text[0] == '+' ? 1 : 0));
  return out.set_str(digits, 10) == 0;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace

Rational Rational::parse(std::string_view text) {
  const std::string_view t = trim(text);
  const auto slash = t.find('/');
  mpz_class num;
  mpz_class den(1);
  if (slash == std::string_view::npos) {
    if (!parse_integer(t, num, true)) {
      throw std::invalid_argument("not an exact rational \"" + std::string(text) +
                                  "\" (expected \"p/q\" or an integer)");
    }
  } else {
    if (!parse_integer(trim(t.substr(0, slash)), num, true) ||
        !parse_integer(trim(t.substr(slash + 1)), den, false)) {
      throw std::invalid_argument("not an exact rational \"" + std::string(text) +
                                  "\" (expected \"p/q\")");
    }
    if (den == 0) throw std::invalid_argument("zero denominator in \"" + std::string(text) + "\"");
  }
  return Rational(mpq_class(num, den));
}

std::string Rational::to_string() const {
  return value_.get_num().get_str() + "/" + value_.get_den().get_str();
}

Rational& Rational::operator/=(const Rational& o) {
  if (o.is_zero()) throw std::domain_error("rational division by zero");
  value_ /= o.value_;
  return *this;
}

std::ostream& operator<<(std::ostream& os, const Rational& r) { return os << r.to_string(); }

Rational abs(const Rational& r) { return r.sign() < 0 ? -r : r; }
Rational min(const Rational& a, const Rational& b) { return b < a ? b : a; }
Rational max(const Rational& a, const Rational& b) { return a < b ? b : a; }

mpz_class lcm(const mpz_class& a, const mpz_class& b) {
  mpz_class r;
  mpz_lcm(r.get_mpz_t(), a.get_mpz_t(), b.get_mpz_t());
  return r;
}

std::int64_t to_int64(const mpz_class& value) {
  if (!value.fits_slong_p()) throw std::overflow_error("integer does not fit in 64 bits: " + value.get_str());
  static_assert(sizeof(long) == 8);
  return value.get_si();
}

__int128 to_int128(const mpz_class& value) {
  if (mpz_sizeinbase(value.get_mpz_t(), 2) > 125) {
    throw std::overflow_error("integer does not fit in 126 bits: " + value.get_str());
  }
  mpz_class mag = abs(value);
  const mpz_class low = mag & mpz_class(std::numeric_limits<unsigned long>::max());
  const mpz_class high = mag >> 64;
  __int128 r = static_cast<__int128>(high.get_ui()) << 64;
  r |= static_cast<__int128>(low.get_ui());
  return value < 0 ? -r : r;
}

}  // namespace shapestab
