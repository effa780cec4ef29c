#include "attackscope/predictability.hpp"

#include <algorithm>
#include <cmath>
#include <thread>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "predictability";

// Suffix automaton over a growing prefix; transitions kept as small
// unsorted lists since the alphabets here have a handful of symbols.
class SuffixAutomaton {
 public:
  struct State {
    std::size_t len = 0;
    long link = -1;
    std::vector<std::pair<int, std::size_t>> next;
  };

  SuffixAutomaton() { states_.push_back({}); }

  long go(std::size_t v, int c) const {
    for (const auto& [sym, to] : states_[v].next) {
      if (sym == c) return static_cast<long>(to);
    }
    return -1;
  }

  const State& operator[](std::size_t v) const { return states_[v]; }

  // Appends c. Returns {split state, clone} when a clone was made, else {-1, -1}.
  std::pair<long, long> extend(int c) {
    const std::size_t cur = states_.size();
    states_.push_back({states_[last_].len + 1, -1, {}});
    long p = static_cast<long>(last_);
    while (p != -1 && go(static_cast<std::size_t>(p), c) == -1) {
      states_[static_cast<std::size_t>(p)].next.emplace_back(c, cur);
      p = states_[static_cast<std::size_t>(p)].link;
    }
    std::pair<long, long> split{-1, -1};
    if (p == -1) {
      states_[cur].link = 0;
    } else {
      const auto q = static_cast<std::size_t>(go(static_cast<std::size_t>(p), c));
      if (states_[static_cast<std::size_t>(p)].len + 1 == states_[q].len) {
        states_[cur].link = static_cast<long>(q);
      } else {
        const std::size_t clone = states_.size();
        State copy = states_[q];
        copy.len = states_[static_cast<std::size_t>(p)].len + 1;
        states_.push_back(std::move(copy));
        while (p != -1 && go(static_cast<std::size_t>(p), c) == static_cast<long>(q)) {
          for (auto& [sym, to] : states_[static_cast<std::size_t>(p)].next) {
            if (sym == c) to = clone;
          }
          p = states_[static_cast<std::size_t>(p)].link;
        }
        states_[q].link = static_cast<long>(clone);
        states_[cur].link = static_cast<long>(clone);
        split = {static_cast<long>(q), static_cast<long>(clone)};
      }
    }
    last_ = cur;
    return split;
  }

 private:
  std::vector<State> states_;
  std::size_t last_ = 0;
};

double binary_entropy(double p) {
  double h = 0;
  if (p > 0) h -= p * std::log2(p);
  if (p < 1) h -= (1 - p) * std::log2(1 - p);
  return h;
}

}  // namespace

EntropyEstimate estimate_entropy(std::span<const int> s) {
  EntropyEstimate est;
  est.length = s.size();
  std::vector<int> distinct(s.begin(), s.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  est.n_states = distinct.size();
  est.reliable = s.size() >= 16;
  if (est.n_states <= 1 || s.size() < 2) {
    est.value = 0.0;
    return est;
  }

  // Matching statistics of s[i..] against the automaton of s[0, i).
  SuffixAutomaton sam;
  const std::size_t n = s.size();
  std::size_t v = 0, l = 0;
  double lambda_sum = 0;
  for (std::size_t i = 0; i < n; ++i) {
    while (i + l < n) {
      const long to = sam.go(v, s[i + l]);
      if (to < 0) break;
      v = static_cast<std::size_t>(to);
      ++l;
    }
    lambda_sum += static_cast<double>(l + 1);
    const auto [split, clone] = sam.extend(s[i]);
    if (split >= 0 && v == static_cast<std::size_t>(split) &&
        l <= sam[static_cast<std::size_t>(clone)].len) {
      v = static_cast<std::size_t>(clone);
    }
    if (l > 0) {
      --l;
      while (v != 0 && l <= sam[static_cast<std::size_t>(sam[v].link)].len) {
        v = static_cast<std::size_t>(sam[v].link);
      }
    }
  }
  est.value = std::log2(static_cast<double>(n)) / (lambda_sum / static_cast<double>(n));
  return est;
}

double fano_entropy(double pi, std::size_t n_states) {
  const double tail = n_states > 1 ? (1 - pi) * std::log2(static_cast<double>(n_states - 1)) : 0.0;
  return binary_entropy(pi) + tail;
}

FanoSolution solve_fano(double entropy, std::size_t n_states, double slack) {
  if (n_states < 1) throw ValidationError(kModule, "Fano bound needs N_S >= 1");
  if (!std::isfinite(entropy) || entropy < -slack) {
    throw ValidationError(kModule, "entropy must be >= 0 (got " + std::to_string(entropy) + ")");
  }
  FanoSolution out;
  if (n_states == 1) {
    out.clipped = entropy != 0.0;
    return out;
  }
  const double n = static_cast<double>(n_states);
  const double e_max = std::log2(n);
  double e = entropy;
  if (e < 0) {
    e = 0;
    out.clipped = true;
  } else if (e > e_max) {
    e = e_max;
    out.clipped = true;
  }
  if (e == 0) return out;
  if (e == e_max) {
    out.pi_max = 1.0 / n;
    return out;
  }
  // fano_entropy decreases from log2 N at P = 1/N to 0 at P = 1.
  double lo = 1.0 / n, hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (fano_entropy(mid, n_states) > e) lo = mid; else hi = mid;
  }
  out.pi_max = 0.5 * (lo + hi);
  return out;
}

std::vector<IpGroup> groups_from_segmentation(const BlockSegmentation& seg, std::size_t ip_count) {
  std::vector<IpGroup> g(ip_count, IpGroup::Unassigned);
  for (const auto& b : seg.blocks) {
    const IpGroup v = b.pattern_class == PatternClass::Deterministic ? IpGroup::Deterministic
                      : b.pattern_class == PatternClass::Stochastic  ? IpGroup::Stochastic
                                                                      : IpGroup::Unassigned;
    for (IpIndex ip = b.ip_range.first; ip <= b.ip_range.last && ip <= ip_count; ++ip) {
      g[ip - 1] = v;
    }
  }
  return g;
}

PredictabilityReport predictability_profile(const AttackMatrix& matrix, double h,
                                            std::span<const IpGroup> groups,
                                            const PredictabilityParams& params, unsigned jobs) {
  if (!(h > 0)) throw ValidationError(kModule, "section length h must be positive");
  if (!groups.empty() && groups.size() != matrix.n_ips()) {
    throw ValidationError(kModule, "one group label per IP is required");
  }
  PredictabilityReport rep;
  rep.h = h;
  rep.delta_t = matrix.delta_t();
  rep.fine_resolution = matrix.delta_t() < 100.0;
  rep.per_ip.resize(matrix.n_ips());

  auto work = [&](std::size_t k) {
    IpPredictability& out = rep.per_ip[k];
    out.ip = static_cast<IpIndex>(k + 1);
    out.group = groups.empty() ? IpGroup::Unassigned : groups[k];
    const StateSequence seq = coarse_grain_row(matrix, out.ip);
    SectionSet set;
    try {
      set = section_split(seq, h);
    } catch (const ValidationError& e) {
      out.excluded_reason = e.what();
      return;
    }
    if (set.states_per_section < params.min_section_states) {
      out.excluded_reason = "sections hold " + std::to_string(set.states_per_section) +
                            " states, fewer than " + std::to_string(params.min_section_states);
      return;
    }
    if (set.sections.empty()) {
      out.excluded_reason = "series shorter than one section";
      return;
    }
    std::size_t global_states = 0;
    if (params.global_alphabet) {
      std::vector<int> d(seq.states);
      std::sort(d.begin(), d.end());
      global_states = static_cast<std::size_t>(std::unique(d.begin(), d.end()) - d.begin());
    }
    double sum = 0, ground = 0;
    for (std::size_t i = 0; i < set.sections.size(); ++i) {
      const auto& st = set.sections[i].states;
      SectionPredictability sp;
      sp.index = i;
      const auto est = estimate_entropy(st);
      sp.entropy = est.value;
      sp.n_states = params.global_alphabet ? global_states : est.n_states;
      sp.ground_fraction = static_cast<double>(std::count(st.begin(), st.end(), -1)) /
                           static_cast<double>(st.size());
      try {
        const auto f = solve_fano(est.value, sp.n_states, params.slack);
        sp.pi_max = f.pi_max;
        sp.clipped = f.clipped;
      } catch (const ValidationError&) {
        ++out.skipped_sections;
        continue;
      }
      sum += sp.pi_max;
      ground += sp.ground_fraction;
      out.sections.push_back(sp);
    }
    if (out.sections.empty()) {
      out.excluded_reason = "no section produced a defined bound";
      return;
    }
    const double ns = static_cast<double>(out.sections.size());
    out.mean_pi_max = sum / ns;
    out.ground_fraction = ground / ns;
    out.ground_flag = out.ground_fraction > params.ground_flag_threshold;
  };

  jobs = std::max(1u, jobs);
  if (jobs == 1) {
    for (std::size_t k = 0; k < rep.per_ip.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < jobs; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < rep.per_ip.size(); k += jobs) work(k);
      });
    }
    for (auto& t : pool) t.join();
  }

  if (matrix.n_ips() > 0) {
    try {
      const auto set = section_split(coarse_grain_row(matrix, 1), h);
      rep.states_per_section = set.states_per_section;
      rep.section_count = set.sections.size();
    } catch (const ValidationError&) {
    }
  }

  auto summarize = [&](auto pred) {
    GroupSummary g;
    double pi = 0, ground = 0;
    for (const auto& ip : rep.per_ip) {
      if (!pred(ip) || !ip.mean_pi_max) continue;
      pi += *ip.mean_pi_max;
      ground += ip.ground_fraction;
      ++g.ip_count;
    }
    if (g.ip_count) {
      g.mean_pi_max = pi / static_cast<double>(g.ip_count);
      g.mean_ground_fraction = ground / static_cast<double>(g.ip_count);
      g.ground_flag = g.mean_ground_fraction > params.ground_flag_threshold;
    }
    return g;
  };
  rep.deterministic = summarize([](const IpPredictability& p) { return p.group == IpGroup::Deterministic; });
  rep.stochastic = summarize([](const IpPredictability& p) { return p.group == IpGroup::Stochastic; });
  rep.overall = summarize([](const IpPredictability&) { return true; });
  return rep;
}

PredictabilityReport predictability_profile(const AttackMatrix& matrix, double h,
                                            const BlockSegmentation& classification,
                                            const PredictabilityParams& params, unsigned jobs) {
  const auto groups = groups_from_segmentation(classification, matrix.n_ips());
  return predictability_profile(matrix, h, groups, params, jobs);
}

}  // namespace attackscope
