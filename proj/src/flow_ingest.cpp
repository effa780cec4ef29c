#include "attackscope/flow_ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <set>
#include <string>
#include <string_view>

#include "attackscope/error.hpp"

namespace attackscope {

namespace {

constexpr const char* kModule = "flow_ingest";

std::string_view trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\r' || c == '\n';
  };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

// Splits a record line into exactly two fields or returns false.
bool split_fields(std::string_view line, std::string_view& a,
                  std::string_view& b) {
  if (auto comma = line.find(','); comma != std::string_view::npos) {
    a = trim(line.substr(0, comma));
    b = trim(line.substr(comma + 1));
    return !a.empty() && !b.empty() && b.find(',') == std::string_view::npos &&
           b.find_first_of(" \t") == std::string_view::npos &&
           a.find_first_of(" \t") == std::string_view::npos;
  }
  auto ws = line.find_first_of(" \t");
  if (ws == std::string_view::npos) return false;
  a = trim(line.substr(0, ws));
  b = trim(line.substr(ws));
  return !a.empty() && !b.empty() &&
         b.find_first_of(" \t") == std::string_view::npos;
}

bool parse_double(std::string_view text, double& out) {
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, out);
  return ec == std::errc() && ptr == end;
}

IpIndex parse_ip_field(std::string_view text, std::size_t line_no) {
  long long value = 0;
  const char* end = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec == std::errc() && ptr == end) {
    if (value < 1 || value > 0xffffffffLL) {
      throw ValidationError(kModule, "line " + std::to_string(line_no) +
                                         ": ip_index must be >= 1, got " +
                                         std::string(text));
    }
    return static_cast<IpIndex>(value);
  }
  double as_double = 0;
  if (parse_double(text, as_double)) {
    throw ValidationError(kModule, "line " + std::to_string(line_no) +
                                       ": ip_index must be an integer, got " +
                                       std::string(text));
  }
  throw ParseError(kModule, "unreadable ip_index '" + std::string(text) + "'",
                   line_no);
}

double parse_time_field(std::string_view text, std::size_t line_no) {
  double t = 0;
  if (!parse_double(text, t) || !std::isfinite(t)) {
    throw ParseError(kModule, "unreadable timestamp '" + std::string(text) + "'",
                     line_no);
  }
  if (t < 0) {
    throw ValidationError(kModule, "line " + std::to_string(line_no) +
                                       ": negative timestamp " +
                                       std::string(text));
  }
  return round_to_microseconds(t);
}

template <typename Row>
std::vector<Row> parse_rows(std::istream& in) {
  std::vector<Row> rows;
  std::string raw;
  std::size_t line_no = 0;
  bool seen_data = false;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (!seen_data) {
      seen_data = true;
      if (line == "ip,t") continue;
    }
    std::string_view a, b;
    if (!split_fields(line, a, b)) {
      throw ParseError(kModule, "expected two fields 'ip_index,timestamp'",
                       line_no);
    }
    const IpIndex ip = parse_ip_field(a, line_no);
    const double t = parse_time_field(b, line_no);
    rows.push_back(Row{ip, t});
  }
  std::stable_sort(rows.begin(), rows.end(),
                   [](const Row& x, const Row& y) { return x.t < y.t; });
  return rows;
}

}  // namespace

double round_to_microseconds(double t) { return std::round(t * 1e6) / 1e6; }

void SessionizeParams::validate() const {
  if (!(flow_timeout > 0) || !(flow_lifetime >= flow_timeout) ||
      !std::isfinite(flow_lifetime)) {
    throw ValidationError(kModule,
                          "sessionize parameters require 0 < flow_timeout <= "
                          "flow_lifetime");
  }
}

std::vector<FlowRecord> parse_flow_records(std::istream& in) {
  return parse_rows<FlowRecord>(in);
}

std::vector<PacketEvent> parse_packet_events(std::istream& in) {
  return parse_rows<PacketEvent>(in);
}

void write_flow_records(std::ostream& out, std::span<const FlowRecord> records) {
  out << "ip,t\n";
  char buf[64];
  for (const auto& r : records) {
    int n = std::snprintf(buf, sizeof buf, "%u,%.6f\n", r.ip, r.t);
    out.write(buf, n);
  }
}

void sort_records(std::vector<FlowRecord>& records) {
  std::sort(records.begin(), records.end(),
            [](const FlowRecord& a, const FlowRecord& b) {
              return a.t < b.t || (a.t == b.t && a.ip < b.ip);
            });
}

std::vector<FlowRecord> sessionize(std::span<const PacketEvent> events,
                                   const SessionizeParams& params) {
  params.validate();
  std::vector<PacketEvent> sorted(events.begin(), events.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const PacketEvent& a, const PacketEvent& b) {
              return a.ip < b.ip || (a.ip == b.ip && a.t < b.t);
            });

  std::vector<FlowRecord> flows;
  for (std::size_t i = 0; i < sorted.size();) {
    const IpIndex ip = sorted[i].ip;
    double flow_start = sorted[i].t;
    double last = flow_start;
    flows.push_back({ip, flow_start});
    for (++i; i < sorted.size() && sorted[i].ip == ip; ++i) {
      const double t = sorted[i].t;
      if (t - last <= params.flow_timeout &&
          t - flow_start <= params.flow_lifetime) {
        last = t;
        continue;
      }
      flow_start = last = t;
      flows.push_back({ip, flow_start});
    }
  }
  sort_records(flows);
  return flows;
}

RecordSpan record_span(std::span<const FlowRecord> records) {
  RecordSpan span;
  span.record_count = records.size();
  if (records.empty()) return span;
  std::set<IpIndex> ips;
  span.min_ip = span.max_ip = records.front().ip;
  span.first_t = span.last_t = records.front().t;
  for (const auto& r : records) {
    ips.insert(r.ip);
    span.min_ip = std::min(span.min_ip, r.ip);
    span.max_ip = std::max(span.max_ip, r.ip);
    span.first_t = std::min(span.first_t, r.t);
    span.last_t = std::max(span.last_t, r.t);
  }
  span.distinct_ips = ips.size();
  return span;
}

IpRange parse_ip_range(const std::string& text) {
  auto parse_one = [&](std::string_view s) -> IpIndex {
    s = trim(s);
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || v < 1) {
      throw ParseError("cli_report", "bad IP range '" + text + "'");
    }
    return static_cast<IpIndex>(v);
  };
  std::string_view view = text;
  IpRange range;
  if (auto dots = view.find(".."); dots != std::string_view::npos) {
    range = {parse_one(view.substr(0, dots)), parse_one(view.substr(dots + 2))};
  } else {
    range.first = range.last = parse_one(view);
  }
  if (range.empty()) {
    throw ValidationError("cli_report", "empty IP range '" + text + "'");
  }
  return range;
}

std::string to_string(const IpRange& range) {
  return std::to_string(range.first) + ".." + std::to_string(range.last);
}

}  // namespace attackscope
