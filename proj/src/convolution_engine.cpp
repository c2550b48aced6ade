#include "srtlab/convolution_engine.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "srtlab/errors.hpp"
#include "srtlab/fft_convolution.hpp"
#include "srtlab/summation.hpp"

namespace srt {
namespace {

constexpr char kCacheMagic[8] = {'S', 'R', 'T', 'R', 'E', 'N', 'E', 'W'};

void require_renewal_law(const LatticeLaw& law, std::int64_t xmax) {
  if (!law.nonnegative()) {
    throw PreconditionError("renewal sequences need a nonnegative law");
  }
  if (law.p(0) > 0.0) {
    throw PreconditionError("renewal sequences need p(0) = 0");
  }
  if (xmax < 0) throw RangeError("renewal horizon must be >= 0");
  if (xmax > law.xmax() && law.truncated_upper() > 0.0) {
    throw RangeError("renewal horizon " + std::to_string(xmax) +
                     " exceeds the law's support window " +
                     std::to_string(law.xmax()));
  }
}

// pmf as a dense array on 0..xmax (nonnegative laws).
std::vector<double> dense_pmf(const LatticeLaw& law, std::int64_t xmax) {
  std::vector<double> p(static_cast<std::size_t>(xmax + 1), 0.0);
  for (std::int64_t x = std::max<std::int64_t>(law.xmin(), 0);
       x <= std::min(xmax, law.xmax()); ++x) {
    p[static_cast<std::size_t>(x)] = law.p(x);
  }
  return p;
}

class RowAlgebra {
 public:
  RowAlgebra(const LatticeLaw& law, std::int64_t cap)
      : nonneg_(law.nonnegative()), cap_(cap) {
    base_.offset = law.xmin();
    auto pmf = law.pmf();
    std::size_t len = pmf.size();
    if (nonneg_) {
      len = cap_ < law.xmin()
                ? 0
                : std::min<std::size_t>(len, static_cast<std::size_t>(cap_ - law.xmin() + 1));
    }
    base_.values.assign(pmf.begin(), pmf.begin() + static_cast<std::ptrdiff_t>(len));
  }

  [[nodiscard]] const Row& base() const { return base_; }

  [[nodiscard]] std::size_t row_length(int n) const {
    const std::size_t w = base_.values.size();
    if (w == 0) return 0;
    const std::size_t full = static_cast<std::size_t>(n) * (w - 1) + 1;
    if (!nonneg_) return full;
    const std::int64_t off = static_cast<std::int64_t>(n) * base_.offset;
    if (off > cap_) return 0;
    return std::min<std::size_t>(full, static_cast<std::size_t>(cap_ - off + 1));
  }

  [[nodiscard]] Row multiply(const Row& a, const Row& b) const {
    Row r;
    r.offset = a.offset + b.offset;
    if (a.values.empty() || b.values.empty()) return r;
    std::size_t n_out = a.values.size() + b.values.size() - 1;
    if (nonneg_) {
      if (r.offset > cap_) return r;
      n_out = std::min<std::size_t>(n_out, static_cast<std::size_t>(cap_ - r.offset + 1));
    }
    r.values = (&a == &b) ? fft::square(a.values, n_out)
                          : fft::convolve(a.values, b.values, n_out);
    fft::clamp_roundoff(r.values);
    return r;
  }

  [[nodiscard]] Row power(int k) const {
    if (k < 1) throw DomainError("power exponent must be >= 1");
    Row result;
    bool have = false;
    Row b = base_;
    while (k > 0) {
      if (k & 1) {
        result = have ? multiply(result, b) : b;
        have = true;
      }
      k >>= 1;
      if (k > 0) b = multiply(b, b);
    }
    return result;
  }

 private:
  bool nonneg_;
  std::int64_t cap_;
  Row base_;
};

void check_budget(std::size_t bytes, std::size_t budget, const char* what) {
  if (bytes > budget) {
    throw ResourceError(std::string(what) + " needs " + std::to_string(bytes >> 20) +
                        " MiB, budget is " + std::to_string(budget >> 20) +
                        " MiB; request fewer rows or a smaller x window");
  }
}

void put_bytes(std::ostream& os, std::uint64_t v, int width) {
  for (int i = 0; i < width; ++i) {
    os.put(static_cast<char>((v >> (8 * i)) & 0xff));
  }
}

std::uint64_t get_bytes(std::istream& is, int width) {
  std::uint64_t v = 0;
  for (int i = 0; i < width; ++i) {
    const int c = is.get();
    if (c == EOF) throw Error("renewal cache: truncated file");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

ConvTable::ConvTable(std::uint64_t law_hash, std::int64_t xmax,
                     std::map<int, Row> rows)
    : law_hash_(law_hash), xmax_(xmax), rows_(std::move(rows)) {}

int ConvTable::nmax() const { return rows_.empty() ? 0 : rows_.rbegin()->first; }

bool ConvTable::covers(int n) const {
  for (int k = 1; k <= n; ++k) {
    if (!rows_.contains(k)) return false;
  }
  return true;
}

std::vector<int> ConvTable::row_indices() const {
  std::vector<int> out;
  for (const auto& [n, r] : rows_) out.push_back(n);
  return out;
}

const Row& ConvTable::row(int n) const {
  auto it = rows_.find(n);
  if (it == rows_.end()) {
    throw RangeError("convolution table has no row n = " + std::to_string(n));
  }
  return it->second;
}

double ConvTable::at(int n, std::int64_t x) const {
  if (x > xmax_ || x < -xmax_) {
    throw RangeError("x = " + std::to_string(x) + " beyond table window " +
                     std::to_string(xmax_));
  }
  return row(n).at(x);
}

ConvTable conv_table(const LatticeLaw& law, int nmax, std::int64_t xmax,
                     std::size_t memory_budget) {
  if (nmax < 1) throw DomainError("conv_table: nmax must be >= 1");
  RowAlgebra alg(law, xmax);
  std::size_t bytes = 0;
  for (int n = 1; n <= nmax; ++n) bytes += alg.row_length(n) * sizeof(double);
  check_budget(bytes, memory_budget, "conv_table");

  std::map<int, Row> rows;
  rows.emplace(1, alg.base());
  for (int n = 2; n <= nmax; ++n) {
    rows.emplace(n, alg.multiply(rows.at(n - 1), alg.base()));
  }
  return ConvTable(law.hash(), xmax, std::move(rows));
}

void for_each_power(const LatticeLaw& law, std::span<const int> ns,
                    std::int64_t xmax,
                    const std::function<void(int, const Row&)>& visit,
                    std::size_t memory_budget) {
  std::vector<int> targets(ns.begin(), ns.end());
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  if (targets.empty()) return;
  if (targets.front() < 1) throw DomainError("power exponents must be >= 1");

  RowAlgebra alg(law, xmax);
  const std::size_t widest = alg.row_length(targets.back()) * sizeof(double);
  check_budget(3 * widest, memory_budget, "power ladder");

  // Exponents needed later as increments.
  std::multiset<int> pending;
  for (std::size_t i = 1; i < targets.size(); ++i) {
    pending.insert(targets[i] - targets[i - 1]);
  }
  std::map<int, Row> cache;
  auto keep_if_needed = [&](int k, const Row& r) {
    if (k != 1 && pending.contains(k) && !cache.contains(k)) cache.emplace(k, r);
  };

  Row cur = alg.power(targets.front());
  visit(targets.front(), cur);
  keep_if_needed(targets.front(), cur);
  for (std::size_t i = 1; i < targets.size(); ++i) {
    const int d = targets[i] - targets[i - 1];
    pending.erase(pending.find(d));
    if (d == 1) {
      cur = alg.multiply(cur, alg.base());
    } else {
      auto it = cache.find(d);
      if (it == cache.end()) {
        Row step = alg.power(d);
        cur = alg.multiply(cur, step);
        keep_if_needed(d, step);
      } else {
        cur = alg.multiply(cur, it->second);
      }
    }
    for (auto it = cache.begin(); it != cache.end();) {
      it = pending.contains(it->first) ? std::next(it) : cache.erase(it);
    }
    visit(targets[i], cur);
    keep_if_needed(targets[i], cur);
  }
}

ConvTable conv_powers(const LatticeLaw& law, std::span<const int> ns,
                      std::int64_t xmax, std::size_t memory_budget) {
  RowAlgebra alg(law, xmax);
  std::size_t bytes = 0;
  for (int n : ns) bytes += alg.row_length(n) * sizeof(double);
  check_budget(bytes, memory_budget, "conv_powers");
  std::map<int, Row> rows;
  for_each_power(
      law, ns, xmax, [&](int n, const Row& r) { rows.emplace(n, r); },
      memory_budget);
  return ConvTable(law.hash(), xmax, std::move(rows));
}

std::vector<double> pmf_power(const LatticeLaw& law, int n, std::int64_t xmax) {
  if (!law.nonnegative()) throw PreconditionError("pmf_power needs a nonnegative law");
  RowAlgebra alg(law, xmax);
  const Row r = alg.power(n);
  std::vector<double> out(static_cast<std::size_t>(xmax + 1), 0.0);
  for (std::size_t i = 0; i < r.values.size(); ++i) {
    const std::int64_t x = r.offset + static_cast<std::int64_t>(i);
    if (x >= 0 && x <= xmax) out[static_cast<std::size_t>(x)] = r.values[i];
  }
  return out;
}

std::string to_string(RenewalMethod m) {
  switch (m) {
    case RenewalMethod::naive_recursion: return "naive-recursion";
    case RenewalMethod::series_reciprocal: return "series-reciprocal";
    case RenewalMethod::blocked_recursion: return "blocked-recursion";
  }
  return "unknown";
}

double RenewalSequence::at(std::int64_t x) const {
  if (x < 0 || x > xmax()) {
    throw RangeError("x = " + std::to_string(x) + " beyond renewal horizon " +
                     std::to_string(xmax()));
  }
  return g[static_cast<std::size_t>(x)];
}

double renewal_residual(const LatticeLaw& law, std::span<const double> g) {
  if (g.empty()) return 0.0;
  const auto n = g.size();
  const auto p = dense_pmf(law, static_cast<std::int64_t>(n) - 1);
  const auto conv = fft::convolve(p, g, n);
  double worst = 0.0;
  for (std::size_t x = 0; x < n; ++x) {
    const double expect = conv[x] + (x == 0 ? 1.0 : 0.0);
    worst = std::max(worst, std::fabs(g[x] - expect));
  }
  return worst;
}

RenewalSequence renewal_naive(const LatticeLaw& law, std::int64_t xmax) {
  require_renewal_law(law, xmax);
  const auto p = dense_pmf(law, xmax);
  const auto n = static_cast<std::size_t>(xmax + 1);
  RenewalSequence out;
  out.method = RenewalMethod::naive_recursion;
  out.law_hash = law.hash();
  out.g.assign(n, 0.0);
  out.g[0] = 1.0;
  for (std::size_t x = 1; x < n; ++x) {
    CompensatedSum acc;
    for (std::size_t w = 1; w <= x; ++w) {
      if (p[w] != 0.0) acc.add(p[w] * out.g[x - w]);
    }
    out.g[x] = acc.value();
  }
  out.residual = renewal_residual(law, out.g);
  return out;
}

RenewalSequence renewal_blocked(const LatticeLaw& law, std::int64_t xmax) {
  require_renewal_law(law, xmax);
  const auto p = dense_pmf(law, xmax);
  const auto n = static_cast<std::size_t>(xmax + 1);
  std::vector<double> g(n, 0.0);
  g[0] = 1.0;
  constexpr std::size_t kLeaf = 128;
  // g[x] accumulates Σ_{j<x} g[j] p[x-j]; entering solve(l, r), every j < l
  // has already been added for x in [l, r).
  std::function<void(std::size_t, std::size_t)> solve = [&](std::size_t l,
                                                            std::size_t r) {
    if (r - l <= kLeaf) {
      for (std::size_t x = l; x < r; ++x) {
        double acc = 0.0;
        for (std::size_t j = l; j < x; ++j) acc += g[j] * p[x - j];
        g[x] += acc;
      }
      return;
    }
    const std::size_t m = l + (r - l) / 2;
    solve(l, m);
    const std::span<const double> left(g.data() + l, m - l);
    const std::span<const double> steps(p.data(), r - l);
    const auto c = fft::convolve(left, steps, r - l);
    for (std::size_t x = m; x < r; ++x) g[x] += c[x - l];
    solve(m, r);
  };
  solve(0, n);
  RenewalSequence out;
  out.method = RenewalMethod::blocked_recursion;
  out.law_hash = law.hash();
  const double worst_negative = fft::clamp_roundoff(g);
  out.g = std::move(g);
  out.residual = std::max(renewal_residual(law, out.g), -worst_negative);
  return out;
}

RenewalSequence renewal_fast(const LatticeLaw& law, std::int64_t xmax) {
  require_renewal_law(law, xmax);
  const auto n = static_cast<std::size_t>(xmax + 1);
  // f = 1 - P(s).
  std::vector<double> f = dense_pmf(law, xmax);
  for (double& v : f) v = -v;
  f[0] = 1.0;

  std::vector<double> h{1.0};
  std::size_t m = 1;
  while (m < n) {
    const std::size_t m2 = std::min(2 * m, n);
    // e = 1 - f·h, h <- h + h·e (mod s^{m2}).
    auto e = fft::convolve(std::span<const double>(f.data(), m2), h, m2);
    for (double& v : e) v = -v;
    e[0] += 1.0;
    // The first m coefficients of e vanish up to round-off.
    std::fill(e.begin(), e.begin() + static_cast<std::ptrdiff_t>(m), 0.0);
    const auto corr = fft::convolve(h, e, m2);
    h.resize(m2, 0.0);
    for (std::size_t k = m; k < m2; ++k) h[k] += corr[k];
    m = m2;
  }
  RenewalSequence out;
  out.method = RenewalMethod::series_reciprocal;
  out.law_hash = law.hash();
  const double worst_negative = fft::clamp_roundoff(h);
  out.g = std::move(h);
  out.residual = std::max(renewal_residual(law, out.g), -worst_negative);
  if (out.residual > 1e-8) {
    RenewalSequence fb = renewal_blocked(law, xmax);
    fb.fell_back = true;
    return fb;
  }
  return out;
}

double occupation_prefix(const LatticeLaw& law, const RenewalSequence& renewal,
                         int n_terms, std::int64_t x) {
  if (n_terms < 0) throw DomainError("occupation_prefix: N must be >= 0");
  if (x < 0) return 0.0;
  if (x > renewal.xmax()) {
    throw RangeError("occupation_prefix: x beyond renewal horizon");
  }
  if (n_terms == 0) return 0.0;
  const auto q = pmf_power(law, n_terms + 1, x);
  CompensatedSum acc;
  for (std::int64_t k = 0; k <= x; ++k) {
    const double d = law.p(k) - q[static_cast<std::size_t>(k)];
    if (d != 0.0) acc.add(d * renewal.g[static_cast<std::size_t>(x - k)]);
  }
  return acc.value();
}

double nfold_at(std::span<const double> q, std::int64_t offset, int n,
                std::int64_t x) {
  if (n < 1) throw DomainError("nfold_at: n must be >= 1");
  std::size_t first = 0;
  std::size_t end = q.size();
  while (first < end && q[first] == 0.0) ++first;
  while (end > first && q[end - 1] == 0.0) --end;
  if (first >= end) return 0.0;
  const std::int64_t lo = offset + static_cast<std::int64_t>(first);
  const std::int64_t hi = offset + static_cast<std::int64_t>(end) - 1;
  const double* qv = q.data() + first;  // qv[z - lo]

  auto window = [&](std::int64_t k) {
    return std::pair<std::int64_t, std::int64_t>{
        std::max(k * lo, x - (n - k) * hi), std::min(k * hi, x - (n - k) * lo)};
  };
  auto [pa, pb] = window(1);
  if (pa > pb) return 0.0;
  std::vector<double> prev(static_cast<std::size_t>(pb - pa + 1));
  for (std::int64_t s = pa; s <= pb; ++s) {
    prev[static_cast<std::size_t>(s - pa)] = qv[s - lo];
  }
  std::vector<double> cur;
  for (int k = 2; k <= n; ++k) {
    const auto [a, b] = window(k);
    if (a > b) return 0.0;
    cur.assign(static_cast<std::size_t>(b - a + 1), 0.0);
    for (std::int64_t s = a; s <= b; ++s) {
      const std::int64_t zlo = std::max(lo, s - pb);
      const std::int64_t zhi = std::min(hi, s - pa);
      double acc = 0.0;
      for (std::int64_t z = zlo; z <= zhi; ++z) {
        acc += qv[z - lo] * prev[static_cast<std::size_t>(s - z - pa)];
      }
      cur[static_cast<std::size_t>(s - a)] = acc;
    }
    prev.swap(cur);
    pa = a;
    pb = b;
  }
  return (pa <= x && x <= pb) ? prev[static_cast<std::size_t>(x - pa)] : 0.0;
}

double truncated_event_prob(const LatticeLaw& law, int n, std::int64_t x,
                            double gamma) {
  if (n < 1) throw DomainError("truncated_event_prob: n must be >= 1");
  if (!(gamma > 0.0)) throw DomainError("truncated_event_prob: gamma must be > 0");
  const auto bound = static_cast<std::int64_t>(
      std::floor(gamma * static_cast<double>(std::llabs(x))));
  std::int64_t lo = std::max(law.xmin(), -bound);
  std::int64_t hi = std::min(law.xmax(), bound);
  if (law.nonnegative()) hi = std::min(hi, x - (n - 1) * law.xmin());
  const std::int64_t need_hi =
      law.nonnegative() ? std::min(bound, x - (n - 1) * law.xmin()) : bound;
  if (need_hi > law.xmax() && law.truncated_upper() > 0.0) {
    throw RangeError("truncated_event_prob: truncation level beyond the law's window");
  }
  if (-bound < law.xmin() && law.truncated_lower() > 0.0) {
    throw RangeError("truncated_event_prob: truncation level beyond the law's window");
  }
  if (lo > hi) return 0.0;
  std::vector<double> q(static_cast<std::size_t>(hi - lo + 1));
  for (std::int64_t z = lo; z <= hi; ++z) q[static_cast<std::size_t>(z - lo)] = law.p(z);

  const double width = static_cast<double>(hi - lo + 1);
  const double span = std::min(static_cast<double>(n) * (width - 1) + 1,
                               std::fabs(static_cast<double>(x - n * lo)) + 1);
  const double cost = static_cast<double>(n) * span * width;
  if (cost <= 4e8 || !law.nonnegative()) return nfold_at(q, lo, n, x);

  // Large nonnegative case: binary powering with FFT products on [0, x].
  std::vector<double> dense(static_cast<std::size_t>(x + 1), 0.0);
  for (std::int64_t z = lo; z <= hi; ++z) dense[static_cast<std::size_t>(z)] = law.p(z);
  std::vector<double> result;
  std::vector<double> b = dense;
  const auto len = static_cast<std::size_t>(x + 1);
  int k = n;
  bool have = false;
  while (k > 0) {
    if (k & 1) {
      result = have ? fft::convolve(result, b, len) : b;
      have = true;
    }
    k >>= 1;
    if (k > 0) b = fft::square(b, len);
  }
  fft::clamp_roundoff(result);
  return result[static_cast<std::size_t>(x)];
}

std::string sequence_csv(std::span<const double> values, std::int64_t offset,
                         const std::string& name) {
  std::string out = "x," + name + "\n";
  out.reserve(values.size() * 28);
  char buf[64];
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%lld,%.17g\n",
                  static_cast<long long>(offset + static_cast<std::int64_t>(i)),
                  values[i]);
    out += buf;
  }
  return out;
}

void write_renewal_cache(const std::filesystem::path& path,
                         const RenewalSequence& seq) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os.write(kCacheMagic, sizeof kCacheMagic);
  put_bytes(os, seq.law_hash, 8);
  put_bytes(os, static_cast<std::uint64_t>(seq.xmax()), 8);
  put_bytes(os, static_cast<std::uint64_t>(seq.method), 4);
  put_bytes(os, seq.fell_back ? 1 : 0, 4);
  put_bytes(os, std::bit_cast<std::uint64_t>(seq.residual), 8);
  put_bytes(os, seq.g.size(), 8);
  for (double v : seq.g) put_bytes(os, std::bit_cast<std::uint64_t>(v), 8);
  if (!os) throw Error("write failed for " + path.string());
}

RenewalSequence read_renewal_cache(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  char magic[8];
  is.read(magic, sizeof magic);
  if (!is || std::memcmp(magic, kCacheMagic, sizeof magic) != 0) {
    throw Error(path.string() + ": not a renewal cache file");
  }
  RenewalSequence seq;
  seq.law_hash = get_bytes(is, 8);
  const auto xmax = static_cast<std::int64_t>(get_bytes(is, 8));
  const auto method = get_bytes(is, 4);
  if (method > 2) throw Error("renewal cache: unknown method tag");
  seq.method = static_cast<RenewalMethod>(method);
  seq.fell_back = get_bytes(is, 4) != 0;
  seq.residual = std::bit_cast<double>(get_bytes(is, 8));
  const auto count = get_bytes(is, 8);
  if (count != static_cast<std::uint64_t>(xmax + 1)) {
    throw Error("renewal cache: inconsistent length");
  }
  seq.g.resize(count);
  for (auto& v : seq.g) v = std::bit_cast<double>(get_bytes(is, 8));
  return seq;
}

}  // namespace srt
