#include "attackscope/matrix.hpp"

#include <cmath>
#include <cstring>
#include <istream>
#include <numeric>
#include <ostream>
#include <string>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "spatiotemporal_matrix";

template <typename T>
void put_le(std::ostream& out, T value) {
  std::uint64_t bits = 0;
  static_assert(sizeof(T) <= sizeof bits);
  std::memcpy(&bits, &value, sizeof(T));
  char bytes[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bytes[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  }
  out.write(bytes, sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  unsigned char bytes[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(bytes), sizeof(T))) {
    throw ParseError(kModule, "truncated binary matrix");
  }
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<std::uint64_t>(bytes[i]) << (8 * i);
  }
  T value;
  std::memcpy(&value, &bits, sizeof(T));
  return value;
}

}  // namespace

AttackMatrix::AttackMatrix(double delta_t, double t0, std::size_t n_ips,
                           std::size_t n_bins)
    : delta_t_(delta_t), t0_(t0), n_ips_(n_ips), n_bins_(n_bins),
      counts_(n_ips * n_bins, 0) {
  if (!(delta_t > 0) || !std::isfinite(delta_t)) {
    throw ValidationError(kModule, "delta_t must be positive");
  }
}

std::uint64_t AttackMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

std::uint64_t AttackMatrix::row_total(IpIndex ip) const {
  auto r = row(ip);
  return std::accumulate(r.begin(), r.end(), std::uint64_t{0});
}

BinResult bin_attacks(std::span<const FlowRecord> records, double delta_t,
                      std::size_t ip_count, const BinOptions& options) {
  if (!(delta_t > 0) || !std::isfinite(delta_t)) {
    throw ValidationError(kModule, "delta_t must be positive");
  }
  double t_min = 0, t_max = 0;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (r.ip < 1 || r.ip > ip_count) {
      throw ValidationError(kModule, "record ip_index " + std::to_string(r.ip) +
                                         " exceeds ip_count " +
                                         std::to_string(ip_count));
    }
    if (i == 0 || r.t < t_min) t_min = r.t;
    if (i == 0 || r.t > t_max) t_max = r.t;
  }
  const double t0 = options.t0.value_or(records.empty() ? 0.0 : t_min);

  std::size_t n_bins = 0;
  if (options.duration) {
    if (!(*options.duration >= 0)) {
      throw ValidationError(kModule, "duration must be non-negative");
    }
    n_bins = static_cast<std::size_t>(std::ceil(*options.duration / delta_t));
  } else if (!records.empty() && t_max >= t0) {
    n_bins = static_cast<std::size_t>(std::floor((t_max - t0) / delta_t)) + 1;
  }

  BinResult result{AttackMatrix(delta_t, t0, ip_count, n_bins), 0};
  for (const auto& r : records) {
    bool inside = r.t >= t0;
    std::size_t bin = 0;
    if (inside) {
      double b = std::floor((r.t - t0) / delta_t);
      if (t0 + b * delta_t > r.t) b -= 1;
      if (t0 + (b + 1) * delta_t <= r.t) b += 1;
      inside = b >= 0 && b < static_cast<double>(n_bins);
      bin = inside ? static_cast<std::size_t>(b) : 0;
    }
    if (!inside) {
      if (options.out_of_range == OutOfRangePolicy::Reject) {
        throw ValidationError(kModule, "record at t=" + std::to_string(r.t) +
                                           " lies outside the binning window");
      }
      ++result.dropped;
      continue;
    }
    ++result.matrix.at(r.ip, bin);
  }
  return result;
}

RebinResult rebin(const AttackMatrix& matrix, std::size_t factor) {
  if (factor == 0) throw ValidationError(kModule, "rebin factor must be >= 1");
  const std::size_t n_bins = matrix.n_bins() / factor;
  RebinResult result{AttackMatrix(matrix.delta_t() * static_cast<double>(factor),
                                  matrix.t0(), matrix.n_ips(), n_bins),
                     0};
  for (IpIndex ip = 1; ip <= matrix.n_ips(); ++ip) {
    auto src = matrix.row(ip);
    auto dst = result.matrix.row(ip);
    for (std::size_t b = 0; b < src.size(); ++b) {
      if (b / factor < n_bins) {
        dst[b / factor] += src[b];
      } else {
        result.dropped += src[b];
      }
    }
  }
  return result;
}

int coarse_state(Count w) {
  if (w == 0) return -1;
  return static_cast<int>(std::lround(std::log10(static_cast<double>(w))));
}

StateSequence coarse_grain_row(const AttackMatrix& matrix, IpIndex ip) {
  StateSequence seq{ip, {}, matrix.delta_t()};
  auto row = matrix.row(ip);
  seq.states.reserve(row.size());
  for (Count w : row) seq.states.push_back(coarse_state(w));
  return seq;
}

std::vector<StateSequence> coarse_grain(const AttackMatrix& matrix) {
  std::vector<StateSequence> out;
  out.reserve(matrix.n_ips());
  for (IpIndex ip = 1; ip <= matrix.n_ips(); ++ip) {
    out.push_back(coarse_grain_row(matrix, ip));
  }
  return out;
}

SectionSet section_split(const StateSequence& sequence, double hours) {
  if (!(hours > 0) || !std::isfinite(hours)) {
    throw ValidationError(kModule, "section length must be positive");
  }
  const double per_section = hours * 3600.0 / sequence.delta_t;
  const auto length = static_cast<std::size_t>(std::floor(per_section * (1 + 1e-12)));
  if (length == 0) {
    throw ValidationError(kModule, "section of " + std::to_string(hours) +
                                       " h cannot hold one state at delta_t=" +
                                       std::to_string(sequence.delta_t));
  }
  SectionSet set;
  set.section_length_hours = hours;
  set.states_per_section = length;
  const std::size_t count = sequence.states.size() / length;
  set.dropped_states = sequence.states.size() - count * length;
  for (std::size_t s = 0; s < count; ++s) {
    auto first = sequence.states.begin() + static_cast<std::ptrdiff_t>(s * length);
    set.sections.push_back(
        {sequence.ip, std::vector<int>(first, first + static_cast<std::ptrdiff_t>(length)),
         sequence.delta_t});
  }
  return set;
}

void write_matrix_csv(std::ostream& out, const AttackMatrix& matrix) {
  for (IpIndex ip = 1; ip <= matrix.n_ips(); ++ip) {
    auto row = matrix.row(ip);
    for (std::size_t b = 0; b < row.size(); ++b) {
      if (b) out << ',';
      out << row[b];
    }
    out << '\n';
  }
}

void write_matrix_binary(std::ostream& out, const AttackMatrix& matrix) {
  put_le<double>(out, matrix.delta_t());
  put_le<double>(out, matrix.t0());
  put_le<std::uint64_t>(out, matrix.n_ips());
  put_le<std::uint64_t>(out, matrix.n_bins());
  for (IpIndex ip = 1; ip <= matrix.n_ips(); ++ip) {
    for (Count c : matrix.row(ip)) put_le<std::uint32_t>(out, c);
  }
}

AttackMatrix read_matrix_binary(std::istream& in) {
  const auto delta_t = get_le<double>(in);
  const auto t0 = get_le<double>(in);
  const auto n_ips = get_le<std::uint64_t>(in);
  const auto n_bins = get_le<std::uint64_t>(in);
  if (n_bins != 0 && n_ips > (std::uint64_t{1} << 34) / n_bins) {
    throw ParseError(kModule, "binary matrix header declares an implausible size");
  }
  AttackMatrix m(delta_t, t0, n_ips, n_bins);
  for (IpIndex ip = 1; ip <= n_ips; ++ip) {
    for (auto& c : m.row(ip)) c = get_le<std::uint32_t>(in);
  }
  return m;
}

void write_states_csv(std::ostream& out, std::span<const StateSequence> sequences) {
  for (const auto& seq : sequences) {
    out << seq.ip;
    for (int x : seq.states) out << ',' << x;
    out << '\n';
  }
}

}  // namespace attackscope
