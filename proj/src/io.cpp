#include "dys/io.hpp"

#include <cctype>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

namespace dys {

ParseError::ParseError(std::size_t line, const std::string &what)
    : std::runtime_error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}

namespace {

constexpr const char *sensing_tag = "dys-sensing";
constexpr const char *completion_tag = "dys-completion";
constexpr int format_version = 1;

// Reads whitespace-separated tokens while tracking the current line number.
class TokenReader {
public:
  explicit TokenReader(std::istream &is) : is_(is) {}

  template <class T> T next(const char *what) {
    std::string tok = token(what);
    std::istringstream ss(tok);
    T value;
    ss >> value;
    if (ss.fail() || !ss.eof())
      throw ParseError(line_, std::string("bad ") + what + " '" + tok + "'");
    return value;
  }

  void expect_end() {
    skip_space();
    if (is_.peek() != std::char_traits<char>::eof())
      throw ParseError(line_, "trailing data");
  }

private:
  void skip_space() {
    for (int c = is_.peek(); c != std::char_traits<char>::eof(); c = is_.peek()) {
      if (c == '\n')
        ++line_;
      else if (!std::isspace(c))
        break;
      is_.get();
    }
  }

  std::string token(const char *what) {
    skip_space();
    std::string tok;
    for (int c = is_.peek(); c != std::char_traits<char>::eof() && !std::isspace(c); c = is_.peek())
      tok.push_back(static_cast<char>(is_.get()));
    if (tok.empty())
      throw ParseError(line_, std::string("unexpected end of input, expected ") + what);
    return tok;
  }

  std::istream &is_;
  std::size_t line_ = 1;
};

void header(TokenReader &in, const char *tag) {
  const auto got = in.next<std::string>("format tag");
  if (got != tag)
    throw ParseError(1, "expected '" + std::string(tag) + "', found '" + got + "'");
  if (in.next<int>("format version") != format_version)
    throw ParseError(1, "unsupported format version");
}

template <class F> auto checked(F &&build) {
  try {
    return build();
  } catch (const InvalidArgument &e) {
    throw ParseError(0, e.what());
  }
}

Index dimension(TokenReader &in, const char *what) {
  const auto v = in.next<long long>(what);
  if (v < 0)
    throw ParseError(0, std::string(what) + " must be nonnegative");
  return static_cast<Index>(v);
}

void write_row(std::ostream &os, const Matrix &m, Index i) {
  for (Index j = 0; j < m.cols(); ++j)
    os << (j ? " " : "") << m(i, j);
  os << '\n';
}

void write_vector(std::ostream &os, const Vector &v) {
  for (Index i = 0; i < v.size(); ++i)
    os << (i ? " " : "") << v(i);
  os << '\n';
}

Vector read_vector(TokenReader &in, Index n, const char *what) {
  Vector v(n);
  for (Index i = 0; i < n; ++i)
    v(i) = in.next<double>(what);
  return v;
}

Matrix read_matrix(TokenReader &in, Index rows, Index cols, const char *what) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j)
      m(i, j) = in.next<double>(what);
  return m;
}

std::ofstream open_out(const std::string &path) {
  std::ofstream os(path);
  if (!os)
    throw std::runtime_error("cannot open '" + path + "' for writing");
  return os;
}

std::ifstream open_in(const std::string &path) {
  std::ifstream is(path);
  if (!is)
    throw std::runtime_error("cannot open '" + path + "'");
  return is;
}

} // namespace

void write_instance(std::ostream &os, const SensingInstance &inst) {
  inst.validate();
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << sensing_tag << ' ' << format_version << '\n';
  os << inst.A.rows() << ' ' << inst.A.cols() << ' ' << (inst.x_true ? 1 : 0) << '\n';
  os << inst.lambda << ' ' << inst.rho << '\n';
  for (Index i = 0; i < inst.A.rows(); ++i)
    write_row(os, inst.A, i);
  write_vector(os, inst.b);
  if (inst.x_true)
    write_vector(os, *inst.x_true);
  os.precision(old);
}

void write_instance(std::ostream &os, const CompletionInstance &inst) {
  inst.validate();
  const auto old = os.precision(std::numeric_limits<double>::max_digits10);
  os << completion_tag << ' ' << format_version << '\n';
  os << inst.rows() << ' ' << inst.cols() << ' ' << inst.obs.size() << ' ' << inst.rank << ' '
     << (inst.truth ? 1 : 0) << '\n';
  os << inst.lambda << '\n';
  for (const auto &e : inst.obs.entries())
    os << e.row << ' ' << e.col << ' ' << e.value << '\n';
  if (inst.truth)
    for (Index i = 0; i < inst.truth->rows(); ++i)
      write_row(os, *inst.truth, i);
  os.precision(old);
}

SensingInstance read_sensing_instance(std::istream &is) {
  TokenReader in(is);
  header(in, sensing_tag);
  const Index m = dimension(in, "m");
  const Index n = dimension(in, "n");
  const int has_truth = in.next<int>("truth flag");
  SensingInstance inst;
  inst.lambda = in.next<double>("lambda");
  inst.rho = in.next<double>("rho");
  inst.A = read_matrix(in, m, n, "A entry");
  inst.b = read_vector(in, m, "b entry");
  if (has_truth)
    inst.x_true = read_vector(in, n, "x_true entry");
  in.expect_end();
  checked([&] { inst.validate(); return 0; });
  return inst;
}

CompletionInstance read_completion_instance(std::istream &is) {
  TokenReader in(is);
  header(in, completion_tag);
  const Index rows = dimension(in, "rows");
  const Index cols = dimension(in, "cols");
  const Index count = dimension(in, "entry count");
  const Index rank = dimension(in, "rank");
  const int has_truth = in.next<int>("truth flag");
  const double lambda = in.next<double>("lambda");
  std::vector<Entry> entries;
  entries.reserve(static_cast<std::size_t>(count));
  for (Index k = 0; k < count; ++k) {
    const Index r = dimension(in, "row index");
    const Index c = dimension(in, "column index");
    entries.push_back({r, c, in.next<double>("value")});
  }
  auto obs = checked([&] { return ObservationSet(rows, cols, std::move(entries)); });
  CompletionInstance inst{std::move(obs), rank, lambda, std::nullopt};
  if (has_truth)
    inst.truth = read_matrix(in, rows, cols, "truth entry");
  in.expect_end();
  checked([&] { inst.validate(); return 0; });
  return inst;
}

void save_instance(const std::string &path, const SensingInstance &inst) {
  auto os = open_out(path);
  write_instance(os, inst);
}

void save_instance(const std::string &path, const CompletionInstance &inst) {
  auto os = open_out(path);
  write_instance(os, inst);
}

SensingInstance load_sensing_instance(const std::string &path) {
  auto is = open_in(path);
  return read_sensing_instance(is);
}

CompletionInstance load_completion_instance(const std::string &path) {
  auto is = open_in(path);
  return read_completion_instance(is);
}

} // namespace dys
