#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <system_error>

namespace lwfsmc::numfmt {

/// Shortest decimal that parses back to the same double.
inline std::string
shortest(double v)
{
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

/// 17 significant digits, printf "%.17g" style.
inline std::string
sig17(double v)
{
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, end);
}

inline std::optional<double>
parse_double(std::string_view text)
{
  double v{};
  if (text.empty())
    return std::nullopt;
  // from_chars rejects a leading '+', which hand-written CSVs sometimes carry.
  if (text.front() == '+')
    text.remove_prefix(1);
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t>
parse_uint(std::string_view text)
{
  std::uint64_t v{};
  if (text.empty())
    return std::nullopt;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    return std::nullopt;
  return v;
}

} // namespace lwfsmc::numfmt
