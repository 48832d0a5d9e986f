#ifndef SUBNORM_TENSOR_IO_HPP
#define SUBNORM_TENSOR_IO_HPP

// Plain-text tensor files (.ten):
//   line 1: K n_1 ... n_K
//   then prod(n_k) whitespace-separated reals, colexicographic order.

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "subnorm/errors.hpp"
#include "subnorm/tensor.hpp"

namespace subnorm {

// 17 significant digits; round-trips every finite double.
inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

namespace detail {

// Whitespace tokenizer that remembers the line and 1-based column of each token.
class TokenReader {
 public:
  explicit TokenReader(std::istream& in, long first_line = 1)
      : in_(in), line_(first_line), token_line_(first_line) {}

  bool next(std::string& token) {
    token.clear();
    int c;
    while ((c = in_.get()) != EOF) {
      ++column_;
      if (c == '\n') {
        ++line_;
        column_ = 0;
        continue;
      }
      if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    token_line_ = line_;
    token_column_ = column_;
    token.push_back(static_cast<char>(c));
    while ((c = in_.peek()) != EOF && !std::isspace(c)) {
      token.push_back(static_cast<char>(in_.get()));
      ++column_;
    }
    return true;
  }

  std::string where() const {
    return "line " + std::to_string(token_line_) + ", offset " + std::to_string(token_column_);
  }

 private:
  std::istream& in_;
  long line_;
  long column_ = 0;
  long token_line_;
  long token_column_ = 0;
};

}  // namespace detail

inline Tensor read_tensor(std::istream& in) {
  std::string header;
  if (!std::getline(in, header)) throw ParseError("tensor file: missing header (line 1)");

  std::istringstream hs(header);
  detail::TokenReader hr(hs);
  std::string tok;
  auto parse_int = [&](const std::string& what) -> Index {
    if (!hr.next(tok)) throw ParseError("tensor file: header truncated, expected " + what + " (line 1)");
    Index value = 0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), value);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParseError("tensor file: bad " + what + " '" + tok + "' at " + hr.where());
    }
    return value;
  };
  const Index order = parse_int("order");
  if (order < 1 || order > 8) {
    throw ParseError("tensor file: order must be in [1, 8], got " + std::to_string(order) + " (line 1)");
  }
  Shape shape;
  for (Index k = 0; k < order; ++k) {
    const Index n = parse_int("dimension");
    if (n < 1) throw ParseError("tensor file: non-positive dimension at " + hr.where());
    shape.push_back(n);
  }
  if (hr.next(tok)) throw ParseError("tensor file: unexpected header token '" + tok + "' at " + hr.where());

  const Index expected = shape_size(shape);
  std::vector<double> data;
  data.reserve(static_cast<std::size_t>(expected));
  detail::TokenReader body(in, 2);
  while (body.next(tok)) {
    if (static_cast<Index>(data.size()) == expected) {
      throw ParseError("tensor file: length mismatch, expected " + std::to_string(expected) +
                       " values but found extra token '" + tok + "' at " + body.where());
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
    if (ec != std::errc{} || ptr != tok.data() + tok.size()) {
      throw ParseError("tensor file: bad value '" + tok + "' at " + body.where());
    }
    if (!std::isfinite(v)) throw ParseError("tensor file: non-finite value '" + tok + "' at " + body.where());
    data.push_back(v);
  }
  if (static_cast<Index>(data.size()) != expected) {
    throw ParseError("tensor file: length mismatch, expected " + std::to_string(expected) +
                     " values, found " + std::to_string(data.size()));
  }
  return Tensor(std::move(shape), std::move(data));
}

inline Tensor read_tensor(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open tensor file " + path.string());
  try {
    return read_tensor(in);
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_tensor(const Tensor& X, std::ostream& out) {
  out << X.order();
  for (Index n : X.shape()) out << ' ' << n;
  out << '\n';
  for (double v : X.data()) {
    if (!std::isfinite(v)) throw ParseError("write_tensor: non-finite entry");
    out << format_double(v) << '\n';
  }
}

inline void write_tensor(const Tensor& X, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot open " + path.string() + " for writing");
  write_tensor(X, out);
}

}  // namespace subnorm

#endif  // SUBNORM_TENSOR_IO_HPP
