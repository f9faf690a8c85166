#pragma once

// Hashing-based weighted sampling with a constant-factor guarantee.
//
// Pipeline: weights are discretized into geometric buckets of ratio
// r = 2^b/(2^b-1); each configuration theta is then expanded into k(theta)
// "slices" (theta, delta) with delta an integer over Q auxiliary bits and
// delta < k(theta). Sampling uniformly from that unweighted set and dropping
// delta yields theta with probability proportional to k(theta). Uniform
// sampling is done by conjoining random parity (XOR) constraints, enumerating
// the survivors with an oracle, and accepting one of them with probability
// (survivors / pivot).

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "factor_graph.hpp"

namespace xorpgd {

using rng_type = std::mt19937_64;

class sampler_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline double uniform01(rng_type &rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// ---------------------------------------------------------------------------
// Discretization

struct discretization_config {
  unsigned b = 7;
  double epsilon = 0.01;

  void validate() const {
    if (b < 1 || b > 52) throw sampler_error("discretization: b must be in [1, 52]");
    if (!(epsilon > 0.0 && epsilon < 1.0))
      throw sampler_error("discretization: epsilon must lie in (0, 1)");
  }
  double ratio() const {
    const double p = std::ldexp(1.0, static_cast<int>(b));
    return p / (p - 1.0);
  }
  double log_ratio() const {
    // log(2^b / (2^b - 1)) = -log1p(-2^-b), accurate for large b.
    return -std::log1p(-std::ldexp(1.0, -static_cast<int>(b)));
  }
  /// Bucket count l = ceil(log_r(2^n / epsilon)).
  std::size_t levels(std::size_t n) const {
    const double v = (static_cast<double>(n) * std::log(2.0) - std::log(epsilon)) /
                     log_ratio();
    const double rounded = std::round(v);
    const double c = std::abs(v - rounded) < 1e-9 * std::max(1.0, v) ? rounded
                                                                     : std::ceil(v);
    return std::max<std::size_t>(1, static_cast<std::size_t>(c));
  }
  /// rho = r^2 / (1 - epsilon).
  double rho() const {
    const double r = ratio();
    return r * r / (1.0 - epsilon);
  }
};

struct discretized_weights {
  std::size_t num_vars = 0;
  discretization_config config;
  std::size_t levels = 0;  // l; bucket index l is the zero-weight tail
  double log_max = 0.0;
  double log_min = 0.0;
  std::vector<std::uint32_t> bucket_of;  // indexed by packed assignment
  bool tail_empty = false;

  bool in_tail(std::uint64_t packed) const { return bucket_of[packed] == levels; }
  /// log w'(theta) for bucket i < l.
  double log_bucket_weight(std::size_t i) const {
    return log_max - static_cast<double>(i + 1) * config.log_ratio();
  }
  double log_weight_prime(std::uint64_t packed) const {
    const auto i = bucket_of[packed];
    return i == levels ? -std::numeric_limits<double>::infinity()
                       : log_bucket_weight(i);
  }
  double rho() const { return config.rho(); }
};

/// Buckets B_i = {theta : w in (M/r^{i+1}, M/r^i]} for i < l; everything at or
/// below M/r^l lands in the tail bucket l with discretized weight 0.
inline discretized_weights discretize(const factor_graph &fg,
                                      const discretization_config &cfg,
                                      std::size_t cap = default_enumeration_cap) {
  cfg.validate();
  const std::vector<double> lw = log_weight_table(fg, cap);
  discretized_weights dw;
  dw.num_vars = fg.num_vars();
  dw.config = cfg;
  dw.levels = cfg.levels(fg.num_vars());
  dw.log_max = *std::max_element(lw.begin(), lw.end());
  dw.log_min = *std::min_element(lw.begin(), lw.end());
  dw.bucket_of.resize(lw.size());
  const double lr = cfg.log_ratio();
  auto bucket = [&](double logw) -> std::size_t {
    double t = (dw.log_max - logw) / lr;
    const double nearest = std::round(t);
    // Upper interval ends are inclusive: snap values that sit on a boundary.
    if (std::abs(t - nearest) <= 1e-10 * std::max(1.0, nearest)) t = nearest;
    const double fl = std::floor(t);
    return fl >= static_cast<double>(dw.levels) ? dw.levels
                                                : static_cast<std::size_t>(fl);
  };
  for (std::size_t s = 0; s < lw.size(); ++s)
    dw.bucket_of[s] = static_cast<std::uint32_t>(bucket(lw[s]));
  // M / r^l < m  <=>  the minimum weight escapes the tail bucket.
  dw.tail_empty = bucket(dw.log_min) < dw.levels;
  return dw;
}

/// Normalized discretized distribution p' over all assignments.
inline std::vector<double> discretized_distribution(const discretized_weights &dw) {
  std::vector<double> lw(dw.bucket_of.size());
  for (std::size_t s = 0; s < lw.size(); ++s) lw[s] = dw.log_weight_prime(s);
  const double lz = log_sum_exp(lw);
  for (double &v : lw) v = std::exp(v - lz);
  return lw;
}

/// Halves epsilon until the tail bucket is empty.
inline discretization_config tighten_for_empty_tail(
    const factor_graph &fg, discretization_config cfg,
    std::size_t cap = default_enumeration_cap) {
  for (int iter = 0; iter < 1100; ++iter) {
    if (discretize(fg, cfg, cap).tail_empty) return cfg;
    cfg.epsilon *= 0.5;
    if (!(cfg.epsilon > 0.0)) break;
  }
  throw sampler_error("could not empty the tail bucket by shrinking epsilon");
}

// ---------------------------------------------------------------------------
// Horizontal-slice embedding

inline constexpr std::size_t default_aux_bit_cap = 62;

struct slice_set {
  std::size_t num_vars = 0;
  std::size_t aux_bits = 0;                 // Q
  std::vector<std::uint64_t> slice_count;   // k(theta), indexed by packed theta
  unsigned quantization = 0;                // q; 0 when the embedding is exact
  double distortion = 1.0;                  // multiplicative bound on k vs w'

  std::size_t total_bits() const { return num_vars + aux_bits; }
  bool admissible(std::uint64_t theta, std::uint64_t delta) const {
    return delta < slice_count[theta];
  }
  /// |Delta_w| as a floating value (can exceed 64 bits in principle).
  long double size() const {
    long double t = 0;
    for (auto k : slice_count) t += static_cast<long double>(k);
    return t;
  }
};

/// Expands discretized weights into slice counts k(theta).
///
/// b = 1: k(theta) = w'(theta)/m', a power of two, so delta < k(theta) is
/// exactly "delta_i = 0 whenever w'(theta) <= 2^i m'".
/// b > 1: k(theta) = round(w'(theta)/u) with u = m'/2^q; the rounding
/// distortion is at most (1 + 2^-q)/(1 - 2^-q).
/// In both cases k is divided by the gcd of its values.
inline slice_set embed_slices(const discretized_weights &dw, unsigned q = 8,
                              std::size_t aux_cap = default_aux_bit_cap) {
  if (q < 1) throw sampler_error("quantization too coarse: q must be >= 1");
  slice_set ss;
  ss.num_vars = dw.num_vars;
  ss.slice_count.assign(dw.bucket_of.size(), 0);

  std::size_t deepest = 0;  // bucket of m'
  bool any = false;
  for (auto i : dw.bucket_of)
    if (i < dw.levels) {
      deepest = std::max<std::size_t>(deepest, i);
      any = true;
    }
  if (!any) throw sampler_error("every configuration falls in the tail bucket");

  const bool exact = dw.config.b == 1;
  std::vector<std::uint64_t> per_bucket(deepest + 1, 0);
  for (std::size_t i = 0; i <= deepest; ++i) {
    const std::size_t steps = deepest - i;
    if (exact) {
      if (steps >= aux_cap)
        throw sampler_error("auxiliary bit cap exceeded (" + std::to_string(steps) +
                            " > " + std::to_string(aux_cap) + ")");
      per_bucket[i] = std::uint64_t{1} << steps;
    } else {
      const double log2k = static_cast<double>(steps) * dw.config.log_ratio() / std::log(2.0) +
                           static_cast<double>(q);
      if (log2k >= static_cast<double>(aux_cap))
        throw sampler_error("auxiliary bit cap exceeded (needs " +
                            std::to_string(static_cast<int>(std::ceil(log2k))) +
                            " bits, cap " + std::to_string(aux_cap) + ")");
      per_bucket[i] = static_cast<std::uint64_t>(std::llround(std::exp2(log2k)));
    }
  }
  std::uint64_t g = 0;
  for (std::size_t s = 0; s < dw.bucket_of.size(); ++s) {
    const auto i = dw.bucket_of[s];
    if (i < dw.levels) {
      ss.slice_count[s] = per_bucket[i];
      g = std::gcd(g, per_bucket[i]);
    }
  }
  std::uint64_t kmax = 0;
  for (auto &k : ss.slice_count) {
    k /= g;
    kmax = std::max(kmax, k);
  }
  ss.aux_bits = static_cast<std::size_t>(std::bit_width(kmax - 1));
  if (ss.aux_bits > aux_cap) throw sampler_error("auxiliary bit cap exceeded");
  if (!exact) {
    ss.quantization = q;
    const double e = std::ldexp(1.0, -static_cast<int>(q));
    ss.distortion = (1.0 + e) / (1.0 - e);
  }
  return ss;
}

// ---------------------------------------------------------------------------
// Parity constraints

/// Bit row over at most 128 variables.
struct bit_row {
  std::array<std::uint64_t, 2> w{0, 0};

  bool test(std::size_t i) const { return (w[i >> 6] >> (i & 63)) & 1u; }
  void set(std::size_t i) { w[i >> 6] |= std::uint64_t{1} << (i & 63); }
  void flip(std::size_t i) { w[i >> 6] ^= std::uint64_t{1} << (i & 63); }
  void reset(std::size_t i) { w[i >> 6] &= ~(std::uint64_t{1} << (i & 63)); }
  bit_row &operator^=(const bit_row &o) {
    w[0] ^= o.w[0];
    w[1] ^= o.w[1];
    return *this;
  }
  bool none() const { return (w[0] | w[1]) == 0; }
  std::size_t count() const {
    return static_cast<std::size_t>(std::popcount(w[0]) + std::popcount(w[1]));
  }
  bool parity_with(const bit_row &o) const {
    return (std::popcount(w[0] & o.w[0]) + std::popcount(w[1] & o.w[1])) & 1;
  }
  /// Highest set index, or -1.
  int highest() const {
    if (w[1]) return 127 - std::countl_zero(w[1]);
    if (w[0]) return 63 - std::countl_zero(w[0]);
    return -1;
  }
  bool operator==(const bit_row &) const = default;
};

/// XOR of the selected bits must equal `parity`. Bits 0..n-1 are the model
/// variables theta_0..theta_{n-1}; bits n..n+Q-1 are delta_0..delta_{Q-1}.
struct parity_constraint {
  bit_row vars;
  bool parity = false;

  bool satisfied(std::uint64_t theta, std::uint64_t delta, std::size_t n) const {
    bit_row x;
    for (std::size_t i = 0; i < n; ++i)
      if ((theta >> i) & 1u) x.set(i);
    for (std::size_t j = 0; n + j < 128 && j < 64; ++j)
      if ((delta >> j) & 1u) x.set(n + j);
    return vars.parity_with(x) == parity;
  }
};

/// Each constraint includes every bit independently with probability 1/2 and
/// carries a uniform parity bit.
inline std::vector<parity_constraint> draw_parity_constraints(std::size_t bits,
                                                              std::size_t count,
                                                              rng_type &rng) {
  if (bits > 128) throw sampler_error("parity constraints support at most 128 bits");
  std::vector<parity_constraint> out(count);
  for (auto &c : out) {
    for (std::size_t word = 0; word * 64 < bits; ++word) {
      const std::size_t left = bits - word * 64;
      const std::uint64_t mask = left >= 64 ? ~std::uint64_t{0}
                                            : (std::uint64_t{1} << left) - 1;
      c.vars.w[word] = rng() & mask;
    }
    c.parity = rng() & 1u;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Oracle backends

struct oracle_solution {
  std::uint64_t theta = 0;
  std::uint64_t delta = 0;
  bool operator==(const oracle_solution &) const = default;
  auto operator<=>(const oracle_solution &) const = default;
};

struct oracle_result {
  std::vector<oracle_solution> solutions;  // ascending (theta, delta)
  bool truncated = false;                  // true iff more than `limit` exist
  std::uint64_t nodes = 0;                 // search effort
};

/// Enumerates solutions of {delta < k(theta)} and all parity constraints, in
/// ascending (theta, delta) order, stopping after limit + 1 of them.
class oracle_backend {
 public:
  virtual ~oracle_backend() = default;
  virtual oracle_result solve(const slice_set &ss,
                              std::span<const parity_constraint> parities,
                              std::size_t limit) const = 0;
  virtual const char *name() const = 0;
};

class exhaustive_oracle final : public oracle_backend {
 public:
  explicit exhaustive_oracle(std::size_t bit_budget = 26) : bit_budget_(bit_budget) {}

  oracle_result solve(const slice_set &ss, std::span<const parity_constraint> parities,
                      std::size_t limit) const override {
    if (limit < 1) throw sampler_error("oracle limit must be >= 1");
    if (ss.total_bits() > bit_budget_)
      throw sampler_error("exhaustive oracle: " + std::to_string(ss.total_bits()) +
                          " bits exceed budget " + std::to_string(bit_budget_));
    const std::size_t n = ss.num_vars;
    oracle_result res;
    const std::uint64_t thetas = std::uint64_t{1} << n;
    const std::uint64_t deltas = std::uint64_t{1} << ss.aux_bits;
    for (std::uint64_t t = 0; t < thetas; ++t) {
      for (std::uint64_t d = 0; d < deltas; ++d) {
        ++res.nodes;
        if (!ss.admissible(t, d)) continue;
        bit_row x;
        x.w[0] = t;
        if (n < 64) x.w[0] |= d << n;
        if (n > 0 && n < 64 && ss.aux_bits + n > 64) x.w[1] = d >> (64 - n);
        bool ok = true;
        for (const auto &c : parities)
          if (c.vars.parity_with(x) != c.parity) {
            ok = false;
            break;
          }
        if (!ok) continue;
        res.solutions.push_back({t, d});
        if (res.solutions.size() > limit) {
          res.truncated = true;
          return res;
        }
      }
    }
    return res;
  }
  const char *name() const override { return "exhaustive"; }

 private:
  std::size_t bit_budget_;
};

/// Depth-first branch and bound. Variables are visited in the order
/// theta_{n-1}..theta_0, delta_{Q-1}..delta_0 so solutions come out sorted.
/// The parity system is brought to reduced echelon form with each row's pivot
/// at its last variable in visiting order; a pivot is therefore forced as soon
/// as it is reached and parity constraints never cause backtracking. The
/// slice bound delta < k(theta) is enforced bit by bit from the most
/// significant end, and theta prefixes whose completions are all in the
/// tail bucket are cut.
class elimination_oracle final : public oracle_backend {
 public:
  oracle_result solve(const slice_set &ss, std::span<const parity_constraint> parities,
                      std::size_t limit) const override {
    if (limit < 1) throw sampler_error("oracle limit must be >= 1");
    const std::size_t n = ss.num_vars;
    const std::size_t q = ss.aux_bits;
    const std::size_t total = n + q;
    if (total > 128) throw sampler_error("elimination oracle supports at most 128 bits");

    search s{ss, limit, n, q, total, {}, {}, {}, {}, {}, {}};
    s.build_prefix_max();
    if (!s.eliminate(parities)) return {};  // inconsistent system
    s.run();
    return std::move(s.res);
  }
  const char *name() const override { return "elimination"; }

 private:
  struct search {
    const slice_set &ss;
    std::size_t limit;
    std::size_t n, q, total;
    std::vector<bit_row> rows;        // position space
    std::vector<bool> row_parity;
    std::vector<int> pivot_row;       // per position, -1 if free
    std::vector<std::vector<std::uint64_t>> prefix_max;  // [depth][prefix]
    bit_row assigned;
    oracle_result res;

    std::size_t theta_pos(std::size_t j) const { return n - 1 - j; }
    std::size_t delta_pos(std::size_t j) const { return n + q - 1 - j; }

    void build_prefix_max() {
      // prefix_max[d][p]: max k over theta whose top d bits equal p.
      prefix_max.resize(n + 1);
      prefix_max[n] = ss.slice_count;
      for (std::size_t d = n; d-- > 0;) {
        auto &cur = prefix_max[d];
        const auto &next = prefix_max[d + 1];
        cur.resize(next.size() / 2);
        for (std::size_t p = 0; p < cur.size(); ++p) {
          // The child at depth d+1 appends bit theta_{n-1-d} as its lowest bit
          // of the prefix; children of p are 2p and 2p+1.
          cur[p] = std::max(next[2 * p], next[2 * p + 1]);
        }
      }
    }

    bool eliminate(std::span<const parity_constraint> parities) {
      rows.clear();
      row_parity.clear();
      for (const auto &c : parities) {
        bit_row r;
        for (std::size_t j = 0; j < n; ++j)
          if (c.vars.test(j)) r.set(theta_pos(j));
        for (std::size_t j = 0; j < q; ++j)
          if (c.vars.test(n + j)) r.set(delta_pos(j));
        rows.push_back(r);
        row_parity.push_back(c.parity);
      }
      pivot_row.assign(total, -1);
      std::vector<bool> used(rows.size(), false);
      for (std::size_t p = total; p-- > 0;) {
        int pick = -1;
        for (std::size_t r = 0; r < rows.size(); ++r)
          if (!used[r] && rows[r].test(p)) {
            pick = static_cast<int>(r);
            break;
          }
        if (pick < 0) continue;
        used[pick] = true;
        pivot_row[p] = pick;
        for (std::size_t r = 0; r < rows.size(); ++r)
          if (static_cast<int>(r) != pick && rows[r].test(p)) {
            rows[r] ^= rows[pick];
            row_parity[r] = row_parity[r] != row_parity[pick];
          }
      }
      for (std::size_t r = 0; r < rows.size(); ++r)
        if (!used[r] && rows[r].none() && row_parity[r]) return false;
      return true;
    }

    bool forced_value(std::size_t p) const {
      const int r = pivot_row[p];
      bit_row others = rows[r];
      others.reset(p);
      return row_parity[r] != others.parity_with(assigned);
    }

    bool done() const { return res.truncated; }

    void run() { theta_step(0, 0); }

    // depth = number of theta bits fixed so far (from the top).
    void theta_step(std::size_t depth, std::uint64_t prefix) {
      ++res.nodes;
      if (prefix_max[depth][prefix] == 0) return;
      if (depth == n) {
        const std::uint64_t k = ss.slice_count[prefix];
        // k == 2^Q admits every delta; otherwise compare bit by bit.
        const bool tight = q >= 64 || k < (std::uint64_t{1} << q);
        delta_step(0, prefix, k, tight, 0);
        return;
      }
      const std::size_t p = depth;  // position of theta_{n-1-depth}
      auto branch = [&](bool v) {
        if (v) assigned.set(p);
        theta_step(depth + 1, (prefix << 1) | (v ? 1u : 0u));
        assigned.reset(p);
      };
      if (pivot_row[p] >= 0) {
        branch(forced_value(p));
      } else {
        branch(false);
        if (!done()) branch(true);
      }
    }

    void delta_step(std::size_t depth, std::uint64_t theta, std::uint64_t k, bool tight,
                    std::uint64_t delta) {
      ++res.nodes;
      if (depth == q) {
        if (tight) return;  // delta == k is not admissible
        res.solutions.push_back({theta, delta});
        if (res.solutions.size() > limit) res.truncated = true;
        return;
      }
      const std::size_t bit = q - 1 - depth;
      const std::size_t p = n + depth;
      const bool kbit = (k >> bit) & 1u;
      auto branch = [&](bool v) {
        if (tight && v && !kbit) return;
        if (v) assigned.set(p);
        delta_step(depth + 1, theta, k, tight && (v == kbit),
                   delta | (static_cast<std::uint64_t>(v) << bit));
        assigned.reset(p);
      };
      if (pivot_row[p] >= 0) {
        branch(forced_value(p));
      } else {
        branch(false);
        if (!done()) branch(true);
      }
    }
  };
};

/// Offline-debugging dump: slice counts as comments and one "x" line per
/// parity constraint (CryptoMiniSat convention: variables are 1-based and a
/// leading negated literal encodes an even parity target).
inline void write_oracle_query(std::ostream &out, const slice_set &ss,
                               std::span<const parity_constraint> parities) {
  out << "c xor-slice query: " << ss.num_vars << " model bits, " << ss.aux_bits
      << " auxiliary bits\n";
  for (std::size_t t = 0; t < ss.slice_count.size(); ++t)
    out << "c k " << t << ' ' << ss.slice_count[t] << '\n';
  out << "p xor " << ss.total_bits() << ' ' << parities.size() << '\n';
  for (const auto &c : parities) {
    out << 'x';
    bool first = true;
    for (std::size_t i = 0; i < ss.total_bits(); ++i) {
      if (!c.vars.test(i)) continue;
      out << (first && !c.parity ? " -" : " ") << (i + 1);
      first = false;
    }
    if (first && c.parity) out << " F";  // empty constraint with odd target
    out << " 0\n";
  }
}

// ---------------------------------------------------------------------------
// Sampler

struct xor_sampler_config {
  discretization_config discretization;
  unsigned quantization = 8;
  std::size_t pivot = 100;                // P
  std::optional<double> kappa;            // default: sqrt(2)/rho
  double alpha = 0.0;                     // opaque confidence parameter
  std::size_t max_attempts = 10000;       // per successful draw
  unsigned workers = 1;
  std::size_t enumeration_cap = default_enumeration_cap;
  std::size_t aux_bit_cap = default_aux_bit_cap;

  double rho() const { return discretization.rho(); }
  double effective_kappa() const { return kappa.value_or(std::sqrt(2.0) / rho()); }
  double rho_kappa() const { return rho() * effective_kappa(); }

  void validate() const {
    discretization.validate();
    if (pivot < 1) throw sampler_error("pivot must be >= 1");
    if (max_attempts < 1) throw sampler_error("max_attempts must be >= 1");
    if (workers < 1) throw sampler_error("workers must be >= 1");
    const double rk = rho_kappa();
    if (!(effective_kappa() >= 1.0 - 1e-12) || rk < 1.0 - 1e-12 || rk > std::sqrt(2.0) + 1e-12)
      throw sampler_error("rho*kappa = " + std::to_string(rk) +
                          " outside [1, sqrt(2)] (rho = " + std::to_string(rho()) + ")");
  }
};

struct sample_result {
  std::optional<assignment> value;  // empty on Failure
  std::size_t attempts = 1;
  std::size_t oracle_calls = 0;
  std::size_t survivors = 0;

  bool success() const { return value.has_value(); }
};

struct batch_result {
  std::vector<assignment> samples;
  std::size_t attempts = 0;
  std::size_t oracle_calls = 0;
};

class xor_sampler {
 public:
  xor_sampler(const factor_graph &fg, xor_sampler_config cfg,
              std::shared_ptr<const oracle_backend> oracle =
                  std::make_shared<elimination_oracle>())
      : fg_(&fg), cfg_(std::move(cfg)), oracle_(std::move(oracle)) {
    cfg_.validate();
  }
  // keeps a pointer to the model
  xor_sampler(factor_graph &&, xor_sampler_config,
              std::shared_ptr<const oracle_backend> = nullptr) = delete;

  const xor_sampler_config &config() const { return cfg_; }

  /// Discretization and slice embedding, computed on first use.
  void prepare() {
    if (slices_) return;
    dw_ = discretize(*fg_, cfg_.discretization, cfg_.enumeration_cap);
    slices_ = embed_slices(*dw_, cfg_.quantization, cfg_.aux_bit_cap);
  }
  const discretized_weights &discretized() {
    prepare();
    return *dw_;
  }
  const slice_set &slices() {
    prepare();
    return *slices_;
  }

  /// Clears the cached parity-constraint count; the next draw re-estimates it.
  void reset_constraint_count() { constraints_.reset(); }
  std::optional<std::size_t> constraint_count() const { return constraints_; }

  /// Smallest i whose survivor count is <= P, by binary search on i. Each
  /// probe takes the median of three independent parity draws.
  std::size_t estimate_constraint_count(rng_type &rng) {
    prepare();
    std::size_t lo = 0, hi = slices_->total_bits() + 1;
    std::size_t calls = 0;
    while (lo < hi) {
      const std::size_t mid = lo + (hi - lo) / 2;
      std::array<std::size_t, 3> counts{};
      for (auto &c : counts) {
        auto cons = draw_parity_constraints(slices_->total_bits(), mid, rng);
        c = oracle_->solve(*slices_, cons, cfg_.pivot).solutions.size();
        ++calls;
      }
      std::sort(counts.begin(), counts.end());
      if (counts[1] <= cfg_.pivot)
        hi = mid;
      else
        lo = mid + 1;
    }
    estimate_calls_ += calls;
    constraints_ = lo;
    return lo;
  }

  /// One attempt: Success carries the model bits of an accepted survivor.
  sample_result draw(rng_type &rng) {
    if (!constraints_) estimate_constraint_count(rng);
    return draw_prepared(rng);
  }

  batch_result sample_batch(std::size_t count, rng_type &rng) {
    if (count < 1) throw sampler_error("batch size must be >= 1");
    if (!constraints_) estimate_constraint_count(rng);
    if (cfg_.workers <= 1) return draw_many(count, rng);

    const std::size_t workers = std::min<std::size_t>(cfg_.workers, count);
    std::vector<std::uint64_t> seeds(workers);
    for (auto &s : seeds) s = rng();
    std::vector<batch_result> parts(workers);
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      const std::size_t share = count / workers + (w < count % workers ? 1 : 0);
      pool.emplace_back([&, w, share] {
        try {
          rng_type local(seeds[w]);
          parts[w] = draw_many(share, local);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto &t : pool) t.join();
    for (auto &e : errors)
      if (e) std::rethrow_exception(e);
    batch_result out;
    for (auto &p : parts) {
      out.attempts += p.attempts;
      out.oracle_calls += p.oracle_calls;
      for (auto &s : p.samples) out.samples.push_back(std::move(s));
    }
    return out;
  }

  std::size_t estimate_oracle_calls() const { return estimate_calls_; }

 private:
  sample_result draw_prepared(rng_type &rng) const {
    const slice_set &ss = *slices_;
    auto cons = draw_parity_constraints(ss.total_bits(), *constraints_, rng);
    const oracle_result res = oracle_->solve(ss, cons, cfg_.pivot);
    sample_result out;
    out.oracle_calls = 1;
    out.survivors = res.solutions.size();
    const std::size_t c = res.solutions.size();
    if (res.truncated || c == 0) return out;
    const std::size_t pick = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(c));
    const double accept = static_cast<double>(c) / static_cast<double>(cfg_.pivot);
    if (uniform01(rng) >= accept) return out;
    out.value = unpack(res.solutions[std::min(pick, c - 1)].theta, ss.num_vars);
    return out;
  }

  batch_result draw_many(std::size_t count, rng_type &rng) const {
    batch_result out;
    out.samples.reserve(count);
    while (out.samples.size() < count) {
      std::size_t tries = 0;
      for (;;) {
        sample_result r = draw_prepared(rng);
        ++tries;
        ++out.attempts;
        out.oracle_calls += r.oracle_calls;
        if (r.value) {
          out.samples.push_back(std::move(*r.value));
          break;
        }
        if (tries >= cfg_.max_attempts)
          throw sampler_error("xor sampler: " + std::to_string(tries) +
                              " consecutive failed attempts (check pivot and constraint count)");
      }
    }
    return out;
  }

  const factor_graph *fg_;
  xor_sampler_config cfg_;
  std::shared_ptr<const oracle_backend> oracle_;
  std::optional<discretized_weights> dw_;
  std::optional<slice_set> slices_;
  std::optional<std::size_t> constraints_;
  std::size_t estimate_calls_ = 0;
};

}  // namespace xorpgd
