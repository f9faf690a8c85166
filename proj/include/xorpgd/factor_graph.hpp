#pragma once

// Binary Markov random fields: representation, UAI MARKOV I/O and exact
// inference by exhaustive enumeration.
//
// Assignment-index convention: an assignment of n binary variables is
// packed into an integer whose bit i holds theta_i.
//
// Potential-table convention (matches UAI): the table of a factor with
// scope (v_0, ..., v_{s-1}) is indexed lexicographically with the LAST
// scope variable varying fastest, i.e. entry index
//   sum_j theta_{v_j} * 2^{s-1-j}.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace xorpgd {

using assignment = std::vector<std::uint8_t>;

/// Default cap on the number of variables for exhaustive enumeration.
inline constexpr std::size_t default_enumeration_cap = 24;

class model_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class parse_error : public std::runtime_error {
 public:
  parse_error(std::size_t line, const std::string &what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct factor {
  std::vector<std::size_t> scope;
  std::vector<double> table;

  /// Table entry selected by the joint assignment of the scope.
  std::size_t entry_index(const assignment &a) const {
    std::size_t idx = 0;
    for (std::size_t v : scope) idx = (idx << 1) | (a[v] & 1u);
    return idx;
  }
  std::size_t entry_index(std::uint64_t packed) const {
    std::size_t idx = 0;
    for (std::size_t v : scope) idx = (idx << 1) | ((packed >> v) & 1u);
    return idx;
  }
};

class factor_graph {
 public:
  factor_graph() = default;
  factor_graph(std::size_t num_vars, std::vector<factor> factors)
      : num_vars_(num_vars), factors_(std::move(factors)) {
    validate();
    log_tables_.reserve(factors_.size());
    for (const auto &f : factors_) {
      std::vector<double> lt(f.table.size());
      std::transform(f.table.begin(), f.table.end(), lt.begin(),
                     [](double v) { return std::log(v); });
      log_tables_.push_back(std::move(lt));
    }
    adjacency_.assign(num_vars_, {});
    for (std::size_t k = 0; k < factors_.size(); ++k)
      for (std::size_t v : factors_[k].scope) adjacency_[v].push_back(k);
  }

  std::size_t num_vars() const { return num_vars_; }
  const std::vector<factor> &factors() const { return factors_; }
  const std::vector<double> &log_table(std::size_t k) const {
    return log_tables_[k];
  }
  /// Indices of the factors whose scope contains variable v.
  const std::vector<std::size_t> &factors_of(std::size_t v) const {
    return adjacency_[v];
  }

  double log_weight(const assignment &a) const {
    check_assignment(a);
    double lw = 0.0;
    for (std::size_t k = 0; k < factors_.size(); ++k)
      lw += log_tables_[k][factors_[k].entry_index(a)];
    return lw;
  }
  double log_weight(std::uint64_t packed) const {
    double lw = 0.0;
    for (std::size_t k = 0; k < factors_.size(); ++k)
      lw += log_tables_[k][factors_[k].entry_index(packed)];
    return lw;
  }

  void check_assignment(const assignment &a) const {
    if (a.size() != num_vars_)
      throw model_error("assignment length " + std::to_string(a.size()) +
                        " does not match " + std::to_string(num_vars_) +
                        " variables");
  }

 private:
  void validate() const {
    for (std::size_t k = 0; k < factors_.size(); ++k) {
      const auto &f = factors_[k];
      const std::string tag = "factor " + std::to_string(k) + ": ";
      if (f.scope.empty()) throw model_error(tag + "empty scope");
      if (f.scope.size() >= 63) throw model_error(tag + "scope too large");
      std::vector<std::size_t> sorted = f.scope;
      std::sort(sorted.begin(), sorted.end());
      if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw model_error(tag + "duplicate variable in scope");
      if (sorted.back() >= num_vars_)
        throw model_error(tag + "variable index out of range");
      if (f.table.size() != (std::size_t{1} << f.scope.size()))
        throw model_error(tag + "table length " +
                          std::to_string(f.table.size()) + " != 2^" +
                          std::to_string(f.scope.size()));
      for (double v : f.table)
        if (!(v > 0.0) || !std::isfinite(v))
          throw model_error(tag + "table entries must be positive and finite");
    }
  }

  std::size_t num_vars_ = 0;
  std::vector<factor> factors_;
  std::vector<std::vector<double>> log_tables_;
  std::vector<std::vector<std::size_t>> adjacency_;
};

inline double weight(const factor_graph &fg, const assignment &a) {
  return std::exp(fg.log_weight(a));
}

inline assignment unpack(std::uint64_t packed, std::size_t n) {
  assignment a(n);
  for (std::size_t i = 0; i < n; ++i) a[i] = (packed >> i) & 1u;
  return a;
}

inline std::uint64_t pack(const assignment &a) {
  std::uint64_t p = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    p |= static_cast<std::uint64_t>(a[i] & 1u) << i;
  return p;
}

inline void check_enumerable(const factor_graph &fg, std::size_t cap) {
  if (fg.num_vars() > cap || fg.num_vars() >= 63)
    throw model_error("enumeration cap exceeded: " +
                      std::to_string(fg.num_vars()) + " variables > cap " +
                      std::to_string(cap));
}

/// Log-weights of every assignment, indexed by packed assignment.
inline std::vector<double> log_weight_table(
    const factor_graph &fg, std::size_t cap = default_enumeration_cap) {
  check_enumerable(fg, cap);
  const std::uint64_t count = std::uint64_t{1} << fg.num_vars();
  std::vector<double> lw(count);
  for (std::uint64_t s = 0; s < count; ++s) lw[s] = fg.log_weight(s);
  return lw;
}

inline double log_sum_exp(const std::vector<double> &v) {
  if (v.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(v.begin(), v.end());
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

/// The normalized distribution p(theta) over all 2^n assignments.
class enumerated_distribution {
 public:
  explicit enumerated_distribution(const factor_graph &fg,
                                   std::size_t cap = default_enumeration_cap)
      : num_vars_(fg.num_vars()) {
    std::vector<double> lw = log_weight_table(fg, cap);
    log_partition_ = log_sum_exp(lw);
    prob_.resize(lw.size());
    for (std::size_t s = 0; s < lw.size(); ++s)
      prob_[s] = std::exp(lw[s] - log_partition_);
  }

  std::size_t num_vars() const { return num_vars_; }
  std::size_t size() const { return prob_.size(); }
  double log_partition() const { return log_partition_; }
  double probability(std::uint64_t packed) const { return prob_[packed]; }
  const std::vector<double> &probabilities() const { return prob_; }

  /// Sum_theta p(theta) h(theta); h receives the packed assignment.
  template <typename F>
  double expectation_packed(F &&h) const {
    double acc = 0.0;
    for (std::uint64_t s = 0; s < prob_.size(); ++s) {
      if (prob_[s] == 0.0) continue;
      const double v = h(s);
      if (!std::isfinite(v))
        throw model_error("non-finite expectation argument at assignment " +
                          std::to_string(s));
      acc += prob_[s] * v;
    }
    return acc;
  }

  double expectation(const std::function<double(const assignment &)> &h) const {
    assignment a(num_vars_);
    return expectation_packed([&](std::uint64_t s) {
      for (std::size_t i = 0; i < num_vars_; ++i) a[i] = (s >> i) & 1u;
      return h(a);
    });
  }

 private:
  std::size_t num_vars_;
  double log_partition_ = 0.0;
  std::vector<double> prob_;
};

struct exact_inference {
  double partition;
  double log_partition;
  std::vector<double> marginals;
};

inline double log_partition_function(const factor_graph &fg,
                                     std::size_t cap = default_enumeration_cap) {
  return log_sum_exp(log_weight_table(fg, cap));
}

inline double partition_function(const factor_graph &fg,
                                 std::size_t cap = default_enumeration_cap) {
  return std::exp(log_partition_function(fg, cap));
}

inline exact_inference exact_marginals(const factor_graph &fg,
                                       std::size_t cap = default_enumeration_cap) {
  enumerated_distribution dist(fg, cap);
  std::vector<double> marg(fg.num_vars(), 0.0);
  for (std::uint64_t s = 0; s < dist.size(); ++s) {
    const double p = dist.probability(s);
    for (std::size_t i = 0; i < fg.num_vars(); ++i)
      if ((s >> i) & 1u) marg[i] += p;
  }
  for (double &m : marg) m = std::clamp(m, 0.0, 1.0);
  return {std::exp(dist.log_partition()), dist.log_partition(), std::move(marg)};
}

inline double exact_expectation(const factor_graph &fg,
                                const std::function<double(const assignment &)> &h,
                                std::size_t cap = default_enumeration_cap) {
  return enumerated_distribution(fg, cap).expectation(h);
}

// ---------------------------------------------------------------------------
// UAI MARKOV format

namespace detail {

struct token_reader {
  std::istream &in;
  std::size_t line = 1;

  bool next(std::string &tok) {
    tok.clear();
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '\n') ++line;
      if (!std::isspace(c)) break;
    }
    if (c == EOF) return false;
    tok.push_back(static_cast<char>(c));
    while ((c = in.peek()) != EOF && !std::isspace(c)) {
      tok.push_back(static_cast<char>(c));
      in.get();
    }
    return true;
  }

  std::string expect(const char *what) {
    std::string tok;
    if (!next(tok)) throw parse_error(line, std::string("unexpected end of input, expected ") + what);
    return tok;
  }

  long long integer(const char *what) {
    const std::string tok = expect(what);
    std::size_t used = 0;
    long long v = 0;
    try {
      v = std::stoll(tok, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != tok.size())
      throw parse_error(line, std::string("expected ") + what + ", got '" + tok + "'");
    return v;
  }

  double real(const char *what) {
    const std::string tok = expect(what);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(tok, &used);
    } catch (const std::exception &) {
      used = 0;
    }
    if (used != tok.size())
      throw parse_error(line, std::string("expected ") + what + ", got '" + tok + "'");
    return v;
  }
};

}  // namespace detail

/// Parses a UAI MARKOV model restricted to binary variables.
inline factor_graph load_uai(std::istream &in) {
  detail::token_reader rd{in};
  const std::string preamble = rd.expect("preamble");
  if (preamble != "MARKOV")
    throw parse_error(rd.line, "expected preamble MARKOV, got '" + preamble + "'");
  const long long n = rd.integer("variable count");
  if (n < 0) throw parse_error(rd.line, "negative variable count");
  for (long long i = 0; i < n; ++i) {
    const long long card = rd.integer("cardinality");
    if (card != 2)
      throw parse_error(rd.line, "non-binary variable " + std::to_string(i) +
                                     " (cardinality " + std::to_string(card) + ")");
  }
  const long long nf = rd.integer("clique count");
  if (nf < 0) throw parse_error(rd.line, "negative clique count");
  std::vector<factor> factors(static_cast<std::size_t>(nf));
  for (auto &f : factors) {
    const long long size = rd.integer("clique size");
    if (size <= 0 || size >= 63) throw parse_error(rd.line, "invalid clique size");
    for (long long j = 0; j < size; ++j) {
      const long long v = rd.integer("variable index");
      if (v < 0 || v >= n) throw parse_error(rd.line, "variable index out of range");
      f.scope.push_back(static_cast<std::size_t>(v));
    }
  }
  for (std::size_t k = 0; k < factors.size(); ++k) {
    auto &f = factors[k];
    const long long entries = rd.integer("table size");
    if (entries != (1ll << f.scope.size()))
      throw parse_error(rd.line, "table " + std::to_string(k) + " has " +
                                     std::to_string(entries) + " entries, expected " +
                                     std::to_string(1ll << f.scope.size()));
    f.table.reserve(static_cast<std::size_t>(entries));
    for (long long j = 0; j < entries; ++j) {
      const double v = rd.real("table entry");
      if (!(v > 0.0) || !std::isfinite(v))
        throw parse_error(rd.line, "non-positive table entry in table " + std::to_string(k));
      f.table.push_back(v);
    }
  }
  try {
    return factor_graph(static_cast<std::size_t>(n), std::move(factors));
  } catch (const model_error &e) {
    throw parse_error(rd.line, e.what());
  }
}

inline factor_graph load_uai_string(const std::string &text) {
  std::istringstream in(text);
  return load_uai(in);
}

inline void write_uai(std::ostream &out, const factor_graph &fg) {
  out << "MARKOV\n" << fg.num_vars() << '\n';
  for (std::size_t i = 0; i < fg.num_vars(); ++i) out << (i ? " " : "") << 2;
  out << '\n' << fg.factors().size() << '\n';
  for (const auto &f : fg.factors()) {
    out << f.scope.size();
    for (std::size_t v : f.scope) out << ' ' << v;
    out << '\n';
  }
  const auto old = out.precision(17);
  for (const auto &f : fg.factors()) {
    out << '\n' << f.table.size() << '\n';
    for (std::size_t j = 0; j < f.table.size(); ++j)
      out << (j ? " " : "") << f.table[j];
    out << '\n';
  }
  out.precision(old);
}

/// Disjoint union: variables of `b` are shifted past those of `a`.
inline factor_graph concatenate(const factor_graph &a, const factor_graph &b) {
  std::vector<factor> fs = a.factors();
  for (factor f : b.factors()) {
    for (auto &v : f.scope) v += a.num_vars();
    fs.push_back(std::move(f));
  }
  return factor_graph(a.num_vars() + b.num_vars(), std::move(fs));
}

}  // namespace xorpgd
