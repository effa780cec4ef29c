#include "attackscope/inference.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <thread>

#include <json.hpp>

#include "attackscope/error.hpp"
#include "attackscope/format.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "inference";
const double kNaN = std::numeric_limits<double>::quiet_NaN();

// Runs body(i) for i in [0, n) on up to `jobs` threads, interleaved by row
// so the triangular workloads balance.
template <class F>
void parallel_rows(std::size_t n, unsigned jobs, F&& body) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < jobs; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += jobs) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

std::optional<double> pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const std::size_t n = x.size();
  if (n < 2) return std::nullopt;
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx <= 1e-300 || syy <= 1e-300) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

}  // namespace

std::optional<double> PairMatrix::at(std::size_t i, std::size_t j) const {
  const double v = raw(i, j);
  if (std::isnan(v)) return std::nullopt;
  return v;
}

CorrelationMatrix correlation_matrix(const AttackMatrix& matrix, IpRange region, unsigned jobs) {
  if (region.empty()) region = matrix.all_ips();
  if (region.first < 1 || region.last > matrix.n_ips()) {
    throw ValidationError(kModule, "region " + to_string(region) + " is outside the matrix");
  }
  const std::size_t T = matrix.n_bins();
  if (T < 2) throw ValidationError(kModule, "correlation needs at least two time bins");
  const std::size_t n = region.size();

  // Rows scaled to zero mean and unit norm, so rho is a dot product.
  std::vector<double> z(n * T);
  std::vector<bool> constant(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = matrix.row(region.first + static_cast<IpIndex>(i));
    double mean = 0;
    for (Count c : row) mean += c;
    mean /= static_cast<double>(T);
    double ss = 0;
    for (Count c : row) ss += (c - mean) * (c - mean);
    if (ss <= 0) {
      constant[i] = true;
      continue;
    }
    const double inv = 1.0 / std::sqrt(ss);
    for (std::size_t b = 0; b < T; ++b) z[i * T + b] = (row[b] - mean) * inv;
  }

  std::vector<double> v(n * n, kNaN);
  parallel_rows(n, jobs, [&](std::size_t i) {
    if (constant[i]) return;
    v[i * n + i] = 1.0;
    const double* zi = &z[i * T];
    for (std::size_t j = i + 1; j < n; ++j) {
      if (constant[j]) continue;
      const double* zj = &z[j * T];
      double dot = 0;
      for (std::size_t b = 0; b < T; ++b) dot += zi[b] * zj[b];
      dot = std::clamp(dot, -1.0, 1.0);
      v[i * n + j] = dot;
      v[j * n + i] = dot;
    }
  });
  return {region, std::move(v)};
}

std::vector<std::size_t> threshold_cluster(const CorrelationMatrix& corr, double rho_c) {
  const std::size_t n = corr.size();
  std::vector<std::size_t> out(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double v = corr.raw(i, j);
      if (!std::isnan(v) && v >= rho_c) ++out[i];
    }
  }
  return out;
}

std::vector<IpSummary> summary_stats(std::span<const FlowRecord> records,
                                     const AttackMatrix& matrix,
                                     std::span<const std::size_t> cluster_sizes) {
  const std::size_t n = matrix.n_ips();
  std::vector<IpSummary> out(n);
  std::vector<double> first(n, 0), last(n, 0);
  for (std::size_t k = 0; k < n; ++k) out[k].ip = static_cast<IpIndex>(k + 1);
  for (const auto& r : records) {
    if (r.ip < 1 || r.ip > n) {
      throw ValidationError(kModule, "record ip " + std::to_string(r.ip) + " exceeds the matrix");
    }
    auto& s = out[r.ip - 1];
    if (s.total_attacks == 0) {
      first[r.ip - 1] = last[r.ip - 1] = r.t;
    } else {
      first[r.ip - 1] = std::min(first[r.ip - 1], r.t);
      last[r.ip - 1] = std::max(last[r.ip - 1], r.t);
    }
    ++s.total_attacks;
  }
  for (std::size_t k = 0; k < n; ++k) {
    // Mean of successive differences telescopes to (last - first) / (M - 1).
    if (out[k].total_attacks >= 2) {
      out[k].mean_interval = (last[k] - first[k]) / static_cast<double>(out[k].total_attacks - 1);
    }
    if (cluster_sizes.size() == n) out[k].cluster_size = cluster_sizes[k];
  }
  return out;
}

double Mstpm::prob(int from, int to) const {
  auto a = std::lower_bound(states.begin(), states.end(), from);
  auto b = std::lower_bound(states.begin(), states.end(), to);
  if (a == states.end() || *a != from || b == states.end() || *b != to) return 0.0;
  const auto i = static_cast<std::size_t>(a - states.begin());
  const auto j = static_cast<std::size_t>(b - states.begin());
  return row_defined[i] ? probs[i * size() + j] : 0.0;
}

Mstpm build_mstpm(std::span<const int> seq, IpIndex ip) {
  if (seq.size() < 2) {
    throw ValidationError(kModule, "MSTPM needs a sequence of length >= 2");
  }
  Mstpm m;
  m.ip = ip;
  m.states.assign(seq.begin(), seq.end());
  std::sort(m.states.begin(), m.states.end());
  m.states.erase(std::unique(m.states.begin(), m.states.end()), m.states.end());
  const std::size_t k = m.size();
  auto index = [&](int s) {
    return static_cast<std::size_t>(std::lower_bound(m.states.begin(), m.states.end(), s) -
                                    m.states.begin());
  };
  m.counts.assign(k * k, 0);
  std::size_t prev = index(seq[0]);
  for (std::size_t t = 1; t < seq.size(); ++t) {
    const std::size_t cur = index(seq[t]);
    ++m.counts[prev * k + cur];
    prev = cur;
  }
  m.probs.assign(k * k, 0.0);
  m.row_defined.assign(k, false);
  for (std::size_t i = 0; i < k; ++i) {
    std::uint64_t row = 0;
    for (std::size_t j = 0; j < k; ++j) row += m.counts[i * k + j];
    if (row == 0) continue;
    m.row_defined[i] = true;
    for (std::size_t j = 0; j < k; ++j) {
      m.probs[i * k + j] = static_cast<double>(m.counts[i * k + j]) / static_cast<double>(row);
    }
  }
  return m;
}

Mstpm build_mstpm(const StateSequence& sequence) {
  return build_mstpm(sequence.states, sequence.ip);
}

std::optional<double> mstpm_similarity(const Mstpm& a, const Mstpm& b) {
  std::vector<int> all;
  std::set_union(a.states.begin(), a.states.end(), b.states.begin(), b.states.end(),
                 std::back_inserter(all));
  auto row_state = [](const Mstpm& m, int s) {
    // 0: missing from m, 1: present and defined, 2: present but never left
    auto it = std::lower_bound(m.states.begin(), m.states.end(), s);
    if (it == m.states.end() || *it != s) return 0;
    return m.row_defined[static_cast<std::size_t>(it - m.states.begin())] ? 1 : 2;
  };
  std::vector<double> x, y;
  for (int from : all) {
    if (row_state(a, from) == 2 || row_state(b, from) == 2) continue;
    for (int to : all) {
      x.push_back(a.prob(from, to));
      y.push_back(b.prob(from, to));
    }
  }
  return pearson(x, y);
}

SimilarityMatrix similarity_matrix(std::span<const Mstpm> mstpms, IpRange ips, unsigned jobs) {
  const std::size_t n = mstpms.size();
  if (ips.size() != n) {
    throw ValidationError(kModule, "similarity matrix needs one MSTPM per IP of the range");
  }
  std::vector<double> v(n * n, kNaN);
  parallel_rows(n, jobs, [&](std::size_t i) {
    for (std::size_t j = i; j < n; ++j) {
      if (auto s = mstpm_similarity(mstpms[i], mstpms[j])) {
        v[i * n + j] = *s;
        v[j * n + i] = *s;
      }
    }
  });
  return {ips, std::move(v)};
}

Discrimination within_cross_discrimination(const SimilarityMatrix& sim, std::span<const int> group) {
  const std::size_t n = sim.size();
  if (group.size() != n) throw ValidationError(kModule, "one group label per IP is required");
  std::vector<double> within, cross;
  Discrimination d;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = sim.raw(i, j);
      if (std::isnan(v)) {
        ++d.undefined_pairs;
        continue;
      }
      (group[i] == group[j] ? within : cross).push_back(v);
    }
  }
  d.within_pairs = within.size();
  d.cross_pairs = cross.size();
  if (within.empty() || cross.empty()) return d;
  std::sort(cross.begin(), cross.end());
  double wins = 0;
  for (double w : within) {
    const auto lo = std::lower_bound(cross.begin(), cross.end(), w);
    const auto hi = std::upper_bound(lo, cross.end(), w);
    wins += static_cast<double>(lo - cross.begin()) + 0.5 * static_cast<double>(hi - lo);
  }
  d.auc = wins / (static_cast<double>(within.size()) * static_cast<double>(cross.size()));
  return d;
}

void write_pair_matrix_tsv(std::ostream& out, const PairMatrix& m) {
  out << "ip";
  for (IpIndex ip = m.ips().first; ip <= m.ips().last && !m.ips().empty(); ++ip) out << '\t' << ip;
  out << '\n';
  for (std::size_t i = 0; i < m.size(); ++i) {
    out << m.ips().first + i;
    for (std::size_t j = 0; j < m.size(); ++j) out << '\t' << format_number(m.raw(i, j));
    out << '\n';
  }
}

void write_mstpm_json(std::ostream& out, std::span<const Mstpm> mstpms) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& m : mstpms) {
    nlohmann::json probs = nlohmann::json::array();
    for (std::size_t i = 0; i < m.size(); ++i) {
      if (!m.row_defined[i]) {
        probs.push_back(nullptr);
        continue;
      }
      nlohmann::json row = nlohmann::json::array();
      for (std::size_t j = 0; j < m.size(); ++j) row.push_back(round9(m.probs[i * m.size() + j]));
      probs.push_back(row);
    }
    doc.push_back({{"ip", m.ip}, {"states", m.states}, {"probs", probs}});
  }
  out << doc.dump() << '\n';
}

}  // namespace attackscope
