#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace attackscope {

using IpIndex = std::uint32_t;  // 1-based, consecutive victim IP index

// One attack event: victim IP `ip` was hit at time `t` (seconds).
struct FlowRecord {
  IpIndex ip = 1;
  double t = 0.0;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

// Inclusive, 1-based range of victim IP indices.
struct IpRange {
  IpIndex first = 1;
  IpIndex last = 0;

  bool empty() const { return last < first; }
  std::size_t size() const { return empty() ? 0 : last - first + 1; }
  bool contains(IpIndex ip) const { return ip >= first && ip <= last; }

  friend bool operator==(const IpRange&, const IpRange&) = default;
};

// Parses "a..b" (or a single index "a").
IpRange parse_ip_range(const std::string& text);
std::string to_string(const IpRange& range);

}  // namespace attackscope
