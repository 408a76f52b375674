#ifndef INTERAREC_MONEY_HPP
#define INTERAREC_MONEY_HPP

#include <cctype>
#include <cmath>
#include <compare>
#include <cstdint>
#include <cstdio>
#include <optional>
#include <string>
#include <string_view>

#include "interarec/error.hpp"

namespace interarec {

/// Exact decimal amount in major currency units, stored as integer cents.
class Money {
 public:
  constexpr Money() = default;

  static constexpr Money from_cents(std::int64_t cents) { return Money(cents); }

  /// Rounds to the nearest cent; throws InvalidPrice for non-finite input.
  static Money from_double(double amount) {
    if (!std::isfinite(amount) || std::fabs(amount) > 9.0e15) {
      throw Error(Errc::InvalidPrice, "price is not a finite amount");
    }
    return Money(static_cast<std::int64_t>(std::llround(amount * 100.0)));
  }

  constexpr std::int64_t cents() const { return cents_; }
  constexpr double value() const { return static_cast<double>(cents_) / 100.0; }

  /// Two-decimal rendering without currency symbol, e.g. "18.00".
  std::string to_string() const {
    const std::int64_t mag = cents_ < 0 ? -cents_ : cents_;
    char buf[48];
    std::snprintf(buf, sizeof buf, "%s%lld.%02lld", cents_ < 0 ? "-" : "",
                  static_cast<long long>(mag / 100), static_cast<long long>(mag % 100));
    return buf;
  }

  friend constexpr auto operator<=>(Money, Money) = default;

 private:
  constexpr explicit Money(std::int64_t cents) : cents_(cents) {}
  std::int64_t cents_ = 0;
};

namespace detail {

inline std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

inline std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r\n\f\v";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

/// Reads a number starting at `pos` (which must be a digit). Commas count as
/// thousands separators only when followed by exactly three digits.
inline std::optional<Money> read_amount(std::string_view s, std::size_t pos) {
  std::int64_t whole = 0;
  std::size_t i = pos;
  auto digits_at = [&](std::size_t at, std::size_t n) {
    for (std::size_t j = 0; j < n; ++j) {
      if (at + j >= s.size() || !is_digit(s[at + j])) return false;
    }
    return at + n >= s.size() || !is_digit(s[at + n]);
  };
  while (i < s.size()) {
    if (is_digit(s[i])) {
      whole = whole * 10 + (s[i] - '0');
      if (whole > 90'000'000'000'000LL) return std::nullopt;
      ++i;
    } else if (s[i] == ',' && digits_at(i + 1, 3)) {
      ++i;
    } else {
      break;
    }
  }
  std::int64_t cents = whole * 100;
  if (i + 1 < s.size() && s[i] == '.' && is_digit(s[i + 1])) {
    ++i;
    std::int64_t frac = 0;
    int n = 0;
    int round_digit = 0;
    while (i < s.size() && is_digit(s[i])) {
      if (n < 2) {
        frac = frac * 10 + (s[i] - '0');
      } else if (n == 2) {
        round_digit = s[i] - '0';
      }
      ++n;
      ++i;
    }
    if (n == 1) frac *= 10;
    cents += frac + (round_digit >= 5 ? 1 : 0);
  }
  return Money::from_cents(cents);
}

inline bool is_currency_lead(std::string_view s, std::size_t i) {
  if (s[i] == '$') return true;
  // UTF-8 pound (C2 A3), yen (C2 A5), euro (E2 82 AC)
  if (i + 1 < s.size() && static_cast<unsigned char>(s[i]) == 0xC2 &&
      (static_cast<unsigned char>(s[i + 1]) == 0xA3 || static_cast<unsigned char>(s[i + 1]) == 0xA5)) {
    return true;
  }
  return i + 2 < s.size() && static_cast<unsigned char>(s[i]) == 0xE2 &&
         static_cast<unsigned char>(s[i + 1]) == 0x82 && static_cast<unsigned char>(s[i + 2]) == 0xAC;
}

}  // namespace detail

/// True when the text is a "not available" marker (case-insensitive, ignoring
/// surrounding whitespace, quotes and trailing punctuation).
inline bool is_not_available(std::string_view text) {
  auto t = detail::trim(text);
  while (!t.empty() && (t.front() == '"' || t.front() == '\'' || t.front() == '*')) t.remove_prefix(1);
  while (!t.empty() && (t.back() == '"' || t.back() == '\'' || t.back() == '*' || t.back() == '.')) {
    t.remove_suffix(1);
  }
  const auto low = detail::lower_ascii(detail::trim(t));
  return low == "not available" || low == "n/a" || low == "not applicable";
}

/// Extracts the first monetary amount in free text. A number next to a
/// currency symbol wins over a bare number appearing earlier.
inline std::optional<Money> parse_price(std::string_view text) {
  if (is_not_available(text)) return std::nullopt;
  std::optional<std::size_t> first_bare;
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (detail::is_currency_lead(text, i)) {
      std::size_t j = i + 1;
      while (j < text.size() && (static_cast<unsigned char>(text[j]) & 0xC0) == 0x80) ++j;
      while (j < text.size() && text[j] == ' ') ++j;
      if (j < text.size() && detail::is_digit(text[j])) return detail::read_amount(text, j);
    }
    if (!first_bare && detail::is_digit(text[i]) && (i == 0 || !detail::is_digit(text[i - 1]))) {
      first_bare = i;
    }
  }
  if (first_bare) return detail::read_amount(text, *first_bare);
  return std::nullopt;
}

}  // namespace interarec

#endif  // INTERAREC_MONEY_HPP
