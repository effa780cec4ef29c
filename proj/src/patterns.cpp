#include "attackscope/patterns.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "pattern_detection";
constexpr std::size_t kNone = std::numeric_limits<std::size_t>::max();

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const std::size_t mid = v.size() / 2;
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid), v.end());
  const double hi = v[mid];
  if (v.size() % 2) return hi;
  const double lo = *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(mid));
  return 0.5 * (lo + hi);
}

struct LineFit {
  double intercept = 0, slope = 0, rms = 0;
};

LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double r = y[i] - (f.intercept + f.slope * x[i]);
    ss += r * r;
  }
  f.rms = std::sqrt(ss / n);
  return f;
}

// Turns one candidate chain into a wall, or returns false.
bool evaluate_wall(std::span<const FlowRecord> records, std::vector<std::size_t> chain,
                   std::size_t ip_count, const WallParams& params, WallEvent& out) {
  std::sort(chain.begin(), chain.end());
  std::map<IpIndex, std::vector<std::size_t>> all_ips;
  for (std::size_t i : chain) all_ips[records[i].ip].push_back(i);

  // Widest IP window the chain covers densely; chains may pick up a
  // sparse lead-in from neighbouring traffic.
  std::vector<IpIndex> hit;
  for (const auto& kv : all_ips) hit.push_back(kv.first);
  std::size_t wa = 0, wb = 0, wn = 0;
  for (std::size_t a = 0; a < hit.size(); ++a) {
    for (std::size_t b = hit.size(); b-- > a;) {
      const std::size_t n = b - a + 1;
      if (n <= wn) break;
      if (static_cast<double>(n) >= params.min_coverage * static_cast<double>(hit[b] - hit[a] + 1)) {
        wa = a;
        wb = b;
        wn = n;
        break;
      }
    }
  }
  const std::size_t span = wn ? hit[wb] - hit[wa] + 1 : 0;
  if (static_cast<double>(span) < params.min_span * static_cast<double>(ip_count) - 1e-9) {
    return false;
  }
  std::map<IpIndex, std::vector<std::size_t>> by_ip(all_ips.find(hit[wa]),
                                                    std::next(all_ips.find(hit[wb])));

  std::map<std::size_t, std::size_t> freq;
  for (const auto& [ip, hits] : by_ip) ++freq[hits.size()];
  std::size_t m = 1, best = 0;
  for (auto [count, n] : freq) {
    if (n > best) {
      best = n;
      m = count;
    }
  }

  // Reference first-hit times from IPs that already carry exactly m hits.
  std::vector<IpIndex> ref_ip;
  std::vector<double> ref_t;
  for (const auto& [ip, hits] : by_ip) {
    if (hits.size() == m) {
      ref_ip.push_back(ip);
      ref_t.push_back(records[hits.front()].t);
    }
  }
  auto expected = [&](IpIndex ip) {
    auto it = std::lower_bound(ref_ip.begin(), ref_ip.end(), ip);
    if (it == ref_ip.begin()) return ref_t.front();
    if (it == ref_ip.end()) return ref_t.back();
    const auto hi = static_cast<std::size_t>(it - ref_ip.begin());
    const double f = static_cast<double>(ip - ref_ip[hi - 1]) /
                     static_cast<double>(ref_ip[hi] - ref_ip[hi - 1]);
    return ref_t[hi - 1] + f * (ref_t[hi] - ref_t[hi - 1]);
  };

  std::size_t exact = 0;
  std::vector<IpIndex> ips;
  std::vector<double> first;
  out.members.clear();
  for (auto& [ip, hits] : by_ip) {
    if (hits.size() > m) {
      const double want = expected(ip);
      std::size_t best_start = 0;
      double best_err = std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s + m <= hits.size(); ++s) {
        const double err = std::abs(records[hits[s]].t - want);
        if (err < best_err) {
          best_err = err;
          best_start = s;
        }
      }
      hits = std::vector<std::size_t>(hits.begin() + static_cast<std::ptrdiff_t>(best_start),
                                      hits.begin() + static_cast<std::ptrdiff_t>(best_start + m));
    }
    if (hits.size() == m) ++exact;
    ips.push_back(ip);
    first.push_back(records[hits.front()].t);
    out.members.insert(out.members.end(), hits.begin(), hits.end());
  }
  out.coverage = static_cast<double>(exact) / static_cast<double>(span);
  if (out.coverage < params.min_coverage) return false;

  std::sort(out.members.begin(), out.members.end());
  out.multiplicity = m;
  out.ip_range = {ips.front(), ips.back()};
  out.start_time = records[out.members.front()].t;
  out.end_time = records[out.members.back()].t;
  out.ordered = true;
  std::vector<double> delays;
  for (std::size_t k = 1; k < ips.size(); ++k) {
    if (first[k] <= first[k - 1]) out.ordered = false;
    if (ips[k] == ips[k - 1] + 1) delays.push_back(first[k] - first[k - 1]);
  }
  out.per_ip_delay = std::max(0.0, median_of(delays));
  return true;
}

}  // namespace

std::vector<WallEvent> detect_walls(std::span<const FlowRecord> records, std::size_t ip_count,
                                    const WallParams& params) {
  if (!(params.max_delay > 0) || !(params.min_coverage > 0 && params.min_coverage <= 1) ||
      !(params.min_span > 0 && params.min_span <= 1)) {
    throw ValidationError(kModule,
                          "wall params need max_delay > 0 and min_coverage, min_span in (0, 1]");
  }
  std::vector<WallEvent> walls;
  if (records.empty() || ip_count == 0) return walls;

  // Longest non-decreasing-IP chain ending at each record. Only the latest
  // record per IP can be the best predecessor of later records.
  struct Tip {
    std::size_t record = kNone;
    std::uint32_t length = 0;
  };
  std::vector<Tip> tip(ip_count + 1);
  std::vector<std::uint32_t> length(records.size());
  std::vector<std::size_t> pred(records.size(), kNone);

  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.ip < 1 || r.ip > ip_count) {
      throw ValidationError(kModule, "record ip " + std::to_string(r.ip) + " exceeds ip_count");
    }
    const IpIndex lo = r.ip > params.max_skip + 1 ? r.ip - params.max_skip - 1 : 1;
    std::uint32_t best_len = 0;
    std::size_t best = kNone;
    for (IpIndex q = lo; q <= r.ip; ++q) {
      const Tip& tq = tip[q];
      if (tq.record == kNone || r.t - records[tq.record].t > params.max_delay) continue;
      if (tq.length > best_len ||
          (tq.length == best_len && records[tq.record].t >= records[best].t)) {
        best_len = tq.length;
        best = tq.record;
      }
    }
    length[i] = best_len + 1;
    pred[i] = best;
    tip[r.ip] = {i, length[i]};
  }

  const auto need = static_cast<std::uint32_t>(std::ceil(
      params.min_coverage * params.min_span * static_cast<double>(ip_count) - 1e-9));
  std::vector<std::size_t> ends;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (length[i] >= need) ends.push_back(i);
  }
  std::stable_sort(ends.begin(), ends.end(), [&](std::size_t a, std::size_t b) {
    return length[a] != length[b] ? length[a] > length[b] : a > b;
  });
  std::vector<bool> claimed(records.size(), false);
  for (std::size_t i : ends) {
    if (claimed[i]) continue;
    std::vector<std::size_t> chain;
    for (std::size_t k = i; k != kNone && !claimed[k]; k = pred[k]) {
      chain.push_back(k);
      claimed[k] = true;
    }
    if (chain.size() < need) continue;
    WallEvent w;
    if (evaluate_wall(records, std::move(chain), ip_count, params, w)) {
      walls.push_back(std::move(w));
    }
  }
  std::sort(walls.begin(), walls.end(),
            [](const WallEvent& a, const WallEvent& b) { return a.start_time < b.start_time; });
  return walls;
}

StrippedRecords strip_walls(std::span<const FlowRecord> records,
                            std::span<const WallEvent> walls) {
  std::vector<bool> drop(records.size(), false);
  for (const auto& w : walls) {
    for (std::size_t i : w.members) {
      if (i < drop.size()) drop[i] = true;
    }
  }
  StrippedRecords out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (drop[i]) continue;
    out.records.push_back(records[i]);
    out.original_index.push_back(i);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sweeps

namespace {

struct Dwell {
  IpIndex ip;
  double start;
  std::size_t count;
  std::vector<std::size_t> members;
};

struct Track {
  std::vector<std::size_t> dwells;
  double rate = 0, rms = 0;
  int direction = 1;
};

}  // namespace

std::vector<SweepPattern> detect_sweeps(std::span<const FlowRecord> records, IpRange range,
                                        const SweepParams& p) {
  if (range.empty()) throw ValidationError(kModule, "sweep detection needs a non-empty range");
  if (!(p.dwell_gap > 0) || !(p.min_rate > 0) || !(p.max_rate > p.min_rate) ||
      !(p.max_residual > 0) || !(p.endpoint_residual >= 0) || !(p.dwell_merge >= 0) || !(p.group_tolerance >= 0)) {
    throw ValidationError(kModule, "invalid sweep parameters");
  }
  const std::size_t n_ips = range.size();

  std::vector<std::vector<std::size_t>> hits(n_ips);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (range.contains(records[i].ip)) hits[records[i].ip - range.first].push_back(i);
  }

  std::vector<Dwell> dwells;
  std::vector<std::vector<std::size_t>> dwells_of(n_ips);
  std::vector<std::vector<double>> starts_of(n_ips);
  for (std::size_t k = 0; k < n_ips; ++k) {
    auto& h = hits[k];
    std::stable_sort(h.begin(), h.end(),
                     [&](std::size_t a, std::size_t b) { return records[a].t < records[b].t; });
    // Runs split at gaps above dwell_gap, then neighbouring runs are joined
    // while the gap is small next to their combined span.
    std::vector<std::pair<std::size_t, std::size_t>> runs;
    for (std::size_t j = 0; j < h.size(); ++j) {
      if (j == 0 || records[h[j]].t - records[h[j - 1]].t > p.dwell_gap) runs.push_back({j, j});
      runs.back().second = j;
    }
    std::vector<std::pair<std::size_t, std::size_t>> merged;
    for (const auto& run : runs) {
      if (!merged.empty()) {
        auto& prev = merged.back();
        const double gap = records[h[run.first]].t - records[h[prev.second]].t;
        const double span = records[h[prev.second]].t - records[h[prev.first]].t +
                            records[h[run.second]].t - records[h[run.first]].t;
        if (gap <= p.dwell_merge * span) {
          prev.second = run.second;
          continue;
        }
      }
      merged.push_back(run);
    }
    for (const auto& [a, b] : merged) {
      dwells_of[k].push_back(dwells.size());
      starts_of[k].push_back(records[h[a]].t);
      dwells.push_back({records[h[a]].ip, records[h[a]].t, b - a + 1,
                        std::vector<std::size_t>(h.begin() + static_cast<std::ptrdiff_t>(a),
                                                 h.begin() + static_cast<std::ptrdiff_t>(b + 1))});
    }
  }

  std::vector<std::size_t> order(dwells.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return dwells[a].start < dwells[b].start;
  });

  std::size_t min_ips = p.min_track_ips > 0
                            ? p.min_track_ips
                            : static_cast<std::size_t>(
                                  std::ceil(p.min_fraction * static_cast<double>(n_ips) - 1e-9));
  min_ips = std::max<std::size_t>(min_ips, 3);

  std::vector<bool> used(dwells.size(), false);
  std::vector<Track> tracks;
  std::vector<int> directions{+1};
  if (p.both_directions) directions.push_back(-1);

  for (int dir : directions) {
    for (std::size_t d0 : order) {
      if (used[d0]) continue;
      std::vector<std::size_t> track{d0};
      double r = 0;
      for (;;) {
        const Dwell& cur = dwells[track.back()];
        const long long next = static_cast<long long>(cur.ip) + dir;
        if (next < range.first || next > range.last) break;
        const auto k = static_cast<std::size_t>(next - range.first);
        const auto& starts = starts_of[k];
        double lo, hi;
        if (track.size() == 1) {
          lo = cur.start + p.min_rate;
          hi = cur.start + p.max_rate;
        } else {
          lo = cur.start + std::max(0.5 * r, p.min_rate);
          hi = cur.start + 2.0 * r;
        }
        auto it = std::upper_bound(starts.begin(), starts.end(), lo);
        std::size_t pick = kNone;
        double pick_err = std::numeric_limits<double>::infinity();
        std::size_t seen = 0;
        for (; it != starts.end() && *it <= hi; ++it) {
          const std::size_t cand = dwells_of[k][static_cast<std::size_t>(it - starts.begin())];
          if (used[cand]) continue;
          ++seen;
          const double err = track.size() == 1 ? *it - cur.start : std::abs(*it - cur.start - r);
          if (err < pick_err) {
            pick_err = err;
            pick = cand;
          }
          if (track.size() == 1) break;
        }
        if (pick == kNone || seen > 1) break;
        track.push_back(pick);
        r = (dwells[pick].start - dwells[track.front()].start) /
            static_cast<double>(track.size() - 1);
      }
      if (track.size() < min_ips) continue;

      // Least-squares time-vs-IP line, trimming outlying endpoints.
      std::size_t a = 0, b = track.size();
      LineFit fit;
      for (;;) {
        std::vector<double> x, y;
        for (std::size_t j = a; j < b; ++j) {
          x.push_back(static_cast<double>(dwells[track[j]].ip));
          y.push_back(dwells[track[j]].start);
        }
        fit = fit_line(x, y);
        // Endpoints are judged against the line through the interior points.
        LineFit inner = fit;
        double tol = p.max_residual * std::abs(fit.slope);
        if (x.size() >= 4) {
          inner = fit_line(std::vector<double>(x.begin() + 1, x.end() - 1),
                           std::vector<double>(y.begin() + 1, y.end() - 1));
          tol = std::min(p.max_residual * std::abs(inner.slope),
                         std::max(5.0 * inner.rms, p.endpoint_residual * std::abs(inner.slope)));
        }
        const double ra = std::abs(y.front() - (inner.intercept + inner.slope * x.front()));
        const double rb = std::abs(y.back() - (inner.intercept + inner.slope * x.back()));
        if (std::max(ra, rb) <= tol) break;
        if (b - a <= min_ips) {
          b = a;
          break;
        }
        if (ra >= rb) ++a; else --b;
      }
      const double rate = std::abs(fit.slope);
      if (b - a < min_ips || rate < p.min_rate || rate > p.max_rate ||
          fit.rms > p.max_residual * rate) {
        continue;
      }
      Track t;
      t.dwells.assign(track.begin() + static_cast<std::ptrdiff_t>(a),
                      track.begin() + static_cast<std::ptrdiff_t>(b));
      for (std::size_t d : t.dwells) used[d] = true;
      t.rate = rate;
      t.rms = fit.rms;
      t.direction = dir;
      tracks.push_back(std::move(t));
    }
  }

  struct Group {
    std::vector<std::size_t> tracks;
    double rate_sum = 0;
    IpIndex lo, hi;
    int direction;
  };
  std::vector<Group> groups;
  for (std::size_t ti = 0; ti < tracks.size(); ++ti) {
    const Track& t = tracks[ti];
    IpIndex lo = dwells[t.dwells.front()].ip, hi = dwells[t.dwells.back()].ip;
    if (lo > hi) std::swap(lo, hi);
    Group* home = nullptr;
    for (auto& g : groups) {
      const double mean = g.rate_sum / static_cast<double>(g.tracks.size());
      if (g.direction == t.direction && std::abs(t.rate - mean) <= p.group_tolerance * mean &&
          lo <= g.hi && hi >= g.lo) {
        home = &g;
        break;
      }
    }
    if (!home) {
      groups.push_back({{}, 0, lo, hi, t.direction});
      home = &groups.back();
    }
    home->tracks.push_back(ti);
    home->rate_sum += t.rate;
    home->lo = std::min(home->lo, lo);
    home->hi = std::max(home->hi, hi);
  }

  std::vector<SweepPattern> out;
  for (const auto& g : groups) {
    SweepPattern sp;
    // IPs visited by at least a tenth of the group's tracks.
    std::vector<std::size_t> cover(g.hi - g.lo + 1, 0);
    for (std::size_t ti : g.tracks) {
      for (std::size_t d : tracks[ti].dwells) ++cover[dwells[d].ip - g.lo];
    }
    const double need = std::max(1.0, 0.1 * static_cast<double>(g.tracks.size()));
    IpIndex lo = g.hi, hi = g.lo;
    for (std::size_t k = 0; k < cover.size(); ++k) {
      if (static_cast<double>(cover[k]) < need) continue;
      lo = std::min<IpIndex>(lo, g.lo + static_cast<IpIndex>(k));
      hi = std::max<IpIndex>(hi, g.lo + static_cast<IpIndex>(k));
    }
    sp.ip_range = {lo, hi};
    sp.direction = g.direction;
    sp.track_count = g.tracks.size();
    sp.sweep_rate = g.rate_sum / static_cast<double>(g.tracks.size());
    sp.start_time = std::numeric_limits<double>::infinity();
    double attacks = 0, dwell_time = 0;
    for (std::size_t ti : g.tracks) {
      const Track& t = tracks[ti];
      sp.rms_residual = std::max(sp.rms_residual, t.rms);
      for (std::size_t d : t.dwells) {
        sp.start_time = std::min(sp.start_time, dwells[d].start);
        attacks += static_cast<double>(dwells[d].count);
        sp.members.insert(sp.members.end(), dwells[d].members.begin(), dwells[d].members.end());
      }
      dwell_time += static_cast<double>(t.dwells.size()) * t.rate;
    }
    sp.per_ip_attack_rate = dwell_time > 0 ? attacks / dwell_time : 0.0;
    std::sort(sp.members.begin(), sp.members.end());
    out.push_back(std::move(sp));
  }
  std::sort(out.begin(), out.end(), [](const SweepPattern& x, const SweepPattern& y) {
    return x.ip_range.first != y.ip_range.first ? x.ip_range.first < y.ip_range.first
                                                : x.sweep_rate < y.sweep_rate;
  });
  return out;
}

std::vector<double> deterministic_fraction(std::span<const FlowRecord> records,
                                           std::size_t ip_count,
                                           std::span<const std::size_t> claimed) {
  std::vector<double> total(ip_count + 1, 0.0), det(ip_count + 1, 0.0);
  for (const auto& r : records) {
    if (r.ip >= 1 && r.ip <= ip_count) total[r.ip] += 1;
  }
  std::vector<bool> seen(records.size(), false);
  for (std::size_t i : claimed) {
    if (i >= records.size() || seen[i]) continue;
    seen[i] = true;
    const IpIndex ip = records[i].ip;
    if (ip >= 1 && ip <= ip_count) det[ip] += 1;
  }
  std::vector<double> out(ip_count, 0.0);
  for (std::size_t ip = 1; ip <= ip_count; ++ip) {
    out[ip - 1] = total[ip] > 0 ? det[ip] / total[ip] : 0.0;
  }
  return out;
}

std::vector<int> dominant_pattern(std::span<const FlowRecord> records, std::size_t ip_count,
                                  std::span<const SweepPattern> sweeps) {
  std::vector<std::vector<std::size_t>> votes(ip_count, std::vector<std::size_t>(sweeps.size(), 0));
  for (std::size_t s = 0; s < sweeps.size(); ++s) {
    for (std::size_t i : sweeps[s].members) {
      const IpIndex ip = records[i].ip;
      if (ip >= 1 && ip <= ip_count) ++votes[ip - 1][s];
    }
  }
  std::vector<int> out(ip_count, -1);
  for (std::size_t k = 0; k < ip_count; ++k) {
    std::size_t best = 0;
    for (std::size_t s = 0; s < sweeps.size(); ++s) {
      if (votes[k][s] > best) {
        best = votes[k][s];
        out[k] = static_cast<int>(s);
      }
    }
  }
  return out;
}

std::string to_string(PatternClass c) {
  switch (c) {
    case PatternClass::Deterministic: return "deterministic";
    case PatternClass::Stochastic: return "stochastic";
    case PatternClass::Mixed: return "mixed";
  }
  return "stochastic";
}

std::vector<double> median_log_amplitude(const AttackMatrix& matrix) {
  std::vector<double> out(matrix.n_ips(), std::log10(0.1));
  if (matrix.n_bins() == 0) return out;
  std::vector<Count> buf;
  for (IpIndex ip = 1; ip <= matrix.n_ips(); ++ip) {
    auto row = matrix.row(ip);
    buf.assign(row.begin(), row.end());
    const std::size_t mid = buf.size() / 2;
    std::nth_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid), buf.end());
    const double hi = std::log10(buf[mid] + 0.1);
    if (buf.size() % 2) {
      out[ip - 1] = hi;
    } else {
      const Count lo = *std::max_element(buf.begin(), buf.begin() + static_cast<std::ptrdiff_t>(mid));
      out[ip - 1] = 0.5 * (std::log10(lo + 0.1) + hi);
    }
  }
  return out;
}

BlockSegmentation segment_ip_blocks(const AttackMatrix& matrix, std::span<const double> det_fraction,
                                    std::span<const int> pattern_of, const BlockParams& params) {
  const std::size_t n = matrix.n_ips();
  if (n < 2) throw ValidationError(kModule, "block segmentation needs at least two IPs");
  if ((!det_fraction.empty() && det_fraction.size() != n) ||
      (!pattern_of.empty() && pattern_of.size() != n)) {
    throw ValidationError(kModule, "per-IP annotations must cover every IP of the matrix");
  }
  const auto amp = median_log_amplitude(matrix);
  std::vector<PatternClass> cls(n, PatternClass::Stochastic);
  std::vector<int> pid(n, -1);
  for (std::size_t k = 0; k < n; ++k) {
    if (!det_fraction.empty()) {
      if (det_fraction[k] >= params.deterministic_min) cls[k] = PatternClass::Deterministic;
      else if (det_fraction[k] > params.stochastic_max) cls[k] = PatternClass::Mixed;
    }
    if (!pattern_of.empty() && cls[k] != PatternClass::Stochastic) pid[k] = pattern_of[k];
  }

  BlockSegmentation seg;
  auto close_block = [&](std::size_t a, std::size_t b) {  // [a, b)
    IpBlock blk;
    blk.ip_range = {static_cast<IpIndex>(a + 1), static_cast<IpIndex>(b)};
    blk.amplitude = median_of(std::vector<double>(amp.begin() + static_cast<std::ptrdiff_t>(a),
                                                  amp.begin() + static_cast<std::ptrdiff_t>(b)));
    blk.amplitude_class = static_cast<int>(std::lround(blk.amplitude));
    std::size_t nd = 0, ns = 0;
    std::map<int, std::size_t> ids;
    for (std::size_t k = a; k < b; ++k) {
      nd += cls[k] == PatternClass::Deterministic;
      ns += cls[k] == PatternClass::Stochastic;
      ++ids[pid[k]];
    }
    blk.pattern_class = nd == b - a   ? PatternClass::Deterministic
                        : ns == b - a ? PatternClass::Stochastic
                                      : PatternClass::Mixed;
    std::size_t best = 0;
    for (auto [id, c] : ids) {
      if (c > best) {
        best = c;
        blk.pattern_id = id;
      }
    }
    if (!seg.blocks.empty()) {
      IpBlock& prev = seg.blocks.back();
      if (prev.amplitude_class == blk.amplitude_class && prev.pattern_class == blk.pattern_class &&
          prev.pattern_id == blk.pattern_id) {
        prev.ip_range.last = blk.ip_range.last;
        return;
      }
    }
    seg.blocks.push_back(blk);
  };

  std::size_t start = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(amp[k] - amp[k - 1]) > params.amplitude_threshold || cls[k] != cls[k - 1] ||
        pid[k] != pid[k - 1]) {
      close_block(start, k);
      start = k;
    }
  }
  close_block(start, n);

  // Merged blocks keep their first amplitude; recompute over the final ranges.
  for (auto& blk : seg.blocks) {
    blk.amplitude = median_of(std::vector<double>(amp.begin() + blk.ip_range.first - 1,
                                                  amp.begin() + blk.ip_range.last));
    blk.amplitude_class = static_cast<int>(std::lround(blk.amplitude));
  }
  return seg;
}

}  // namespace attackscope
