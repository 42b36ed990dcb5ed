#pragma once

#include "dys/cs.hpp"
#include "dys/matcomp.hpp"

#include <iosfwd>
#include <stdexcept>
#include <string>

namespace dys {

/// Malformed instance or ratings text; `line` is 1-based (0 when unknown).
class ParseError : public std::runtime_error {
public:
  ParseError(std::size_t line, const std::string &what);
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

// Text formats. Every number is written with 17 significant digits so a
// round trip reproduces the instance bit for bit.
//
//   dys-sensing 1
//   <m> <n> <has_truth>
//   <lambda> <rho>
//   m lines of A (n values each), then b (m values), then x_true if present
//
//   dys-completion 1
//   <rows> <cols> <count> <rank> <has_truth>
//   <lambda>
//   count lines "<row> <col> <value>" (0-based), then truth (rows lines) if present

void write_instance(std::ostream &os, const SensingInstance &inst);
void write_instance(std::ostream &os, const CompletionInstance &inst);

SensingInstance read_sensing_instance(std::istream &is);
CompletionInstance read_completion_instance(std::istream &is);

void save_instance(const std::string &path, const SensingInstance &inst);
void save_instance(const std::string &path, const CompletionInstance &inst);
SensingInstance load_sensing_instance(const std::string &path);
CompletionInstance load_completion_instance(const std::string &path);

} // namespace dys
