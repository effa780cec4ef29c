#pragma once

#include <iosfwd>
#include <span>
#include <vector>

#include "attackscope/types.hpp"

namespace attackscope {

// A raw packet observation before flow aggregation.
struct PacketEvent {
  IpIndex ip = 1;
  double t = 0.0;
};

struct SessionizeParams {
  double flow_timeout = 60.0;    // max gap between packets of one flow
  double flow_lifetime = 300.0;  // max time since the flow's first packet

  void validate() const;
};

struct RecordSpan {
  std::size_t record_count = 0;
  std::size_t distinct_ips = 0;
  IpIndex min_ip = 0;
  IpIndex max_ip = 0;
  double first_t = 0.0;
  double last_t = 0.0;
  double duration() const { return last_t - first_t; }
};

// Reads `ip<sep>timestamp` lines (sep is a comma or whitespace). Blank lines,
// lines starting with '#', and a leading `ip,t` header are skipped.
// Timestamps are rounded to the microsecond. Output is stably sorted by time.
std::vector<FlowRecord> parse_flow_records(std::istream& in);

// Canonical CSV: header `ip,t`, timestamps with six decimals.
void write_flow_records(std::ostream& out, std::span<const FlowRecord> records);

std::vector<PacketEvent> parse_packet_events(std::istream& in);

// Greedy per-IP flow grouping. A packet extends the current flow iff its gap
// to the previous packet is <= flow_timeout and its distance from the flow's
// first packet is <= flow_lifetime (both closed). Each flow yields one
// record stamped with its first packet; output is sorted by (t, ip).
std::vector<FlowRecord> sessionize(std::span<const PacketEvent> events,
                                   const SessionizeParams& params = {});

RecordSpan record_span(std::span<const FlowRecord> records);

// Time-sorts in place with a total order on (t, ip).
void sort_records(std::vector<FlowRecord>& records);

double round_to_microseconds(double t);

}  // namespace attackscope
