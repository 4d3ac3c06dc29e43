#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lwfsmc {

/// Failure categories shared by every stage of the pipeline.
enum class Errc
{
  invalid_argument,
  parse_error,
  insufficient_data,
  degenerate_fit,
  degenerate_cell,
  no_convergence,
  quadrature_failure,
  io_error,
};

inline const char*
to_string(Errc code) noexcept
{
  switch (code)
  {
    case Errc::invalid_argument: return "invalid argument";
    case Errc::parse_error: return "parse error";
    case Errc::insufficient_data: return "insufficient data";
    case Errc::degenerate_fit: return "degenerate fit";
    case Errc::degenerate_cell: return "degenerate cell";
    case Errc::no_convergence: return "no convergence";
    case Errc::quadrature_failure: return "quadrature failure";
    case Errc::io_error: return "i/o error";
  }
  return "unknown error";
}

class Error : public std::runtime_error
{
public:
  Error(Errc code, const std::string& what)
    : std::runtime_error{what}
    , m_code{code}
  {}

  Errc
  code() const noexcept
  {
    return m_code;
  }

private:
  Errc m_code;
};

/// Malformed input; line numbers are 1-based and count the header line.
class ParseError : public Error
{
public:
  ParseError(std::size_t line, const std::string& what)
    : Error{Errc::parse_error, "line " + std::to_string(line) + ": " + what}
    , m_line{line}
  {}

  std::size_t
  line() const noexcept
  {
    return m_line;
  }

private:
  std::size_t m_line;
};

} // namespace lwfsmc
